#include <doctest.h>

#include <cstdlib>

#include "textground/adapter.hpp"
#include "textground/error.hpp"
#include "textground/evalbench.hpp"
#include "textground/glc.hpp"

using namespace textground;

namespace {

struct AdapterPath {
  explicit AdapterPath(const std::string& value) { ::setenv(kAdapterPathEnv, value.c_str(), 1); }
  ~AdapterPath() { ::unsetenv(kAdapterPathEnv); }
};

}  // namespace

TEST_CASE("search path splits on colons") {
  AdapterPath env("/a::/b/c:");
  CHECK(adapter_search_path() == std::vector<std::string>{"/a", "/b/c"});
}

TEST_CASE("toy adapter is built in") {
  AdapterOptions opts;
  opts.seed = 3;
  const auto p = load_adapter("toy", opts);
  CHECK(p->metadata().model_id == "toy-L4-H2-D32-V64-s3");
}

TEST_CASE("plugin adapters load from the search path") {
  AdapterPath env(std::string("/nonexistent:") + TEXTGROUND_PLUGIN_DIR);
  AdapterOptions opts;
  opts.seed = 11;
  const auto plugin = load_adapter("testtoy", opts);
  ToyArch arch;
  arch.n_layers = 3;
  ToyModel direct(arch, 11);
  CHECK(plugin->metadata().model_id == direct.metadata().model_id);

  PromptInput in;
  in.query_tokens = direct.tokenize("open 24 hours");
  CHECK(decode_with_correction(*plugin, in, CorrectionConfig{}, 8).tokens ==
        decode_with_correction(direct, in, CorrectionConfig{}, 8).tokens);

  // Clones outlive the original and keep the library loaded.
  auto clone = plugin->clone();
  REQUIRE(clone);
  const auto samples = parse_manifest(
      R"({"sample_id": "x", "gt_words": ["open"], "task": "spotting", "question": "read", "category": "business"})");
  EvalOptions two;
  two.jobs = 2;
  CHECK(to_json(run_benchmark(*clone, samples, CorrectionConfig{}, two)) ==
        to_json(run_benchmark(direct, samples, CorrectionConfig{})));
}

TEST_CASE("broken plugins raise AdapterError") {
  AdapterPath env(TEXTGROUND_PLUGIN_DIR);
  CHECK_THROWS_AS(load_adapter("stale", {}), AdapterError);
  CHECK_THROWS_AS(load_adapter("nocreate", {}), AdapterError);
  CHECK_THROWS_AS(load_adapter("absent", {}), AdapterError);
  CHECK_THROWS_AS(load_adapter("../testtoy", {}), AdapterError);
  try {
    load_adapter("stale", {});
  } catch (const AdapterError& e) {
    CHECK(std::string(e.what()).find("API version 99") != std::string::npos);
  }
}
