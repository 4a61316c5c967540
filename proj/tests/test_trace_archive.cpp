#include <doctest.h>
#include <json.hpp>

#include <cstring>
#include <fstream>

#include "support/fixtures.hpp"
#include "support/trace_compare.hpp"
#include "textground/error.hpp"
#include "textground/trace_archive.hpp"

using namespace textground;
using fixtures::TempDir;
using fixtures::traces_bit_equal;
namespace fs = std::filesystem;

namespace {

void write_floats(const fs::path& path, const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary);
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    const unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                    static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

// One block, seq 3 (two image tokens in a 2x1 grid, one query token), d 2,
// vocab 3, written without the library writer.
void write_hand_archive(const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json manifest = {
      {"format_version", 1},
      {"model_id", "hand"},
      {"dtype", "f32"},
      {"endianness", "little"},
      {"layout",
       {{"n_image_tokens", 2},
        {"n_query_tokens", 1},
        {"image_token_range", {0, 2}},
        {"query_token_range", {2, 3}},
        {"grid_w", 2},
        {"grid_h", 1},
        {"patch_size", 16},
        {"image_w", 32},
        {"image_h", 16}}},
      {"token_ids", {0, 0, 2}},
      {"output_head", {{"norm", "rms"}, {"norm_epsilon", 1e-5}}},
      {"tensors",
       {{"attention.0", {{"file", "attention_0.f32"}, {"shape", {1, 3, 3}}}},
        {"hidden.0", {{"file", "hidden_0.f32"}, {"shape", {3, 2}}}},
        {"hidden.1", {{"file", "hidden_1.f32"}, {"shape", {3, 2}}}},
        {"head.weight", {{"file", "head_weight.f32"}, {"shape", {3, 2}}}},
        {"head.bias", {{"file", "head_bias.f32"}, {"shape", {3}}}},
        {"head.norm_gain", {{"file", "head_norm_gain.f32"}, {"shape", {2}}}}}}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2);
  write_floats(dir / "attention_0.f32", {1.0f, 0.0f, 0.0f, 0.5f, 0.5f, 0.0f, 0.25f, 0.25f, 0.5f});
  write_floats(dir / "hidden_0.f32", {1, 2, 3, 4, 5, 6});
  write_floats(dir / "hidden_1.f32", {-1, -2, -3, -4, -5, -6});
  write_floats(dir / "head_weight.f32", {1, 0, 0, 1, 1, 1});
  write_floats(dir / "head_bias.f32", {0.5f, 0.0f, -0.5f});
  write_floats(dir / "head_norm_gain.f32", {1, 1});
}

}  // namespace

TEST_CASE("hand-built archive reads back the written values") {
  TempDir tmp("hand");
  write_hand_archive(tmp / "trace");
  const auto t = read_trace(tmp / "trace");
  CHECK(t.model_id == "hand");
  CHECK(t.n_layers() == 1);
  CHECK(t.seq_len() == 3);
  CHECK(t.layout.image_token_range == IndexRange{0, 2});
  CHECK(t.token_ids == std::vector<TokenId>{0, 0, 2});
  CHECK(t.attentions[0].at(0, 2, 2) == 0.5f);
  CHECK(t.attentions[0].at(0, 1, 0) == 0.5f);
  CHECK(t.hidden_states[1].row(2)[1] == -6.0f);
  CHECK(t.output_head.weight_row(2)[0] == 1.0f);
  CHECK(t.output_head.bias[2] == -0.5f);
}

TEST_CASE("files are little-endian row-major float32") {
  TempDir tmp("bytes");
  fixtures::Rng rng(5);
  const auto t = fixtures::random_trace(rng, {});
  write_trace(t, tmp / "trace");
  std::ifstream in(tmp / "trace" / "hidden_2.f32", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() == t.hidden_states[2].states.size() * 4);
  for (std::size_t i = 0; i < t.hidden_states[2].states.size(); ++i) {
    const std::uint32_t bits = bytes[4 * i] | (bytes[4 * i + 1] << 8) | (bytes[4 * i + 2] << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    CHECK(v == t.hidden_states[2].states[i]);
  }
}

TEST_CASE("round trip is bit-exact over random traces") {
  TempDir tmp("roundtrip");
  fixtures::Rng rng(11);
  for (int i = 0; i < 25; ++i) {
    auto shape = fixtures::random_shape(rng);
    shape.zero_prob = 0.2;
    const auto t = fixtures::random_trace(rng, shape);
    write_trace(t, tmp / "trace");
    CHECK(traces_bit_equal(t, read_trace(tmp / "trace")));
  }
}

TEST_CASE("rewriting an archive replaces it and leaves no temporary siblings") {
  TempDir tmp("rewrite");
  fixtures::Rng rng(3);
  auto shape = fixtures::TraceShape{};
  shape.layers = 4;
  write_trace(fixtures::random_trace(rng, shape), tmp / "trace");
  shape.layers = 2;
  const auto second = fixtures::random_trace(rng, shape);
  write_trace(second, tmp / "trace");
  CHECK(traces_bit_equal(second, read_trace(tmp / "trace")));
  CHECK_FALSE(fs::exists(tmp / "trace" / "attention_3.f32"));
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("writer refuses to clobber an unrelated directory") {
  TempDir tmp("clobber");
  fs::create_directories(tmp / "data");
  std::ofstream(tmp / "data" / "keep.txt") << "x";
  fixtures::Rng rng(1);
  CHECK_THROWS_AS(write_trace(fixtures::random_trace(rng, {}), tmp / "data"), IoError);
  CHECK(fs::exists(tmp / "data" / "keep.txt"));
}

TEST_CASE("writer validates before touching disk") {
  TempDir tmp("invalid");
  fixtures::Rng rng(1);
  auto t = fixtures::random_trace(rng, {});
  t.attentions[0].at(0, 0, 0) += 0.5f;
  CHECK_THROWS_AS(write_trace(t, tmp / "trace"), ValidationError);
  CHECK_FALSE(fs::exists(tmp / "trace"));
}

TEST_CASE("missing tensor file is reported by name") {
  TempDir tmp("missing");
  write_hand_archive(tmp / "trace");
  fs::remove(tmp / "trace" / "hidden_1.f32");
  try {
    read_trace(tmp / "trace");
    FAIL("expected an IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("hidden_1.f32") != std::string::npos);
  }
}

TEST_CASE("manifest shape mismatch is detected") {
  TempDir tmp("shape");
  write_hand_archive(tmp / "trace");
  auto path = tmp / "trace" / "manifest.json";
  nlohmann::json m;
  std::ifstream(path) >> m;

  SUBCASE("declared shape differs from the layout") {
    m["tensors"]["hidden.1"]["shape"] = {3, 3};
    std::ofstream(path) << m.dump();
    CHECK_THROWS_AS(read_trace(tmp / "trace"), ValidationError);
  }
  SUBCASE("file shorter than the declared shape") {
    write_floats(tmp / "trace" / "hidden_1.f32", {1, 2, 3, 4, 5});
    CHECK_THROWS_AS(read_trace(tmp / "trace"), ValidationError);
  }
  SUBCASE("unsupported format version") {
    m["format_version"] = 2;
    std::ofstream(path) << m.dump();
    CHECK_THROWS_AS(read_trace(tmp / "trace"), ValidationError);
  }
  SUBCASE("big-endian archives are rejected") {
    m["endianness"] = "big";
    std::ofstream(path) << m.dump();
    CHECK_THROWS_AS(read_trace(tmp / "trace"), ValidationError);
  }
}

TEST_CASE("missing archive directory is an IoError") {
  TempDir tmp("none");
  CHECK_THROWS_AS(read_trace(tmp / "nothing"), IoError);
}
