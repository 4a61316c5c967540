#include "textground/adapter.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "textground/error.hpp"

namespace textground {

namespace {

using VersionFn = int (*)();
using CreateFn = TraceProvider* (*)(const char*);
using DestroyFn = void (*)(TraceProvider*);

// Keeps the shared object loaded for as long as any provider from it lives.
class PluginProvider final : public TraceProvider {
 public:
  PluginProvider(std::shared_ptr<void> handle, std::unique_ptr<TraceProvider, DestroyFn> inner)
      : handle_(std::move(handle)), inner_(std::move(inner)) {}

  MultimodalTrace prefill(const PromptInput& input) override { return inner_->prefill(input); }
  std::vector<float> prefill_logits() const override { return inner_->prefill_logits(); }
  StepResult step(TokenId token) override { return inner_->step(token); }
  ProviderMetadata metadata() const override { return inner_->metadata(); }
  std::vector<TokenId> tokenize(std::string_view text) const override { return inner_->tokenize(text); }
  std::string detokenize(const std::vector<TokenId>& tokens) const override { return inner_->detokenize(tokens); }

  std::unique_ptr<TraceProvider> clone() const override {
    auto copy = inner_->clone();
    if (!copy) return nullptr;
    // The clone was allocated by the plugin with plain new.
    auto deleter = +[](TraceProvider* p) { delete p; };
    return std::make_unique<PluginProvider>(handle_,
                                            std::unique_ptr<TraceProvider, DestroyFn>(copy.release(), deleter));
  }

 private:
  std::shared_ptr<void> handle_;
  std::unique_ptr<TraceProvider, DestroyFn> inner_;
};

template <typename Fn>
Fn symbol(void* handle, const char* name, const std::string& where) {
  void* sym = dlsym(handle, name);
  if (!sym) throw AdapterError(where + ": missing symbol " + name);
  return reinterpret_cast<Fn>(sym);
}

std::unique_ptr<TraceProvider> load_plugin(const std::filesystem::path& lib, const AdapterOptions& options) {
  const std::string where = lib.string();
  void* raw = dlopen(where.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!raw) throw AdapterError(std::string("cannot load ") + where + ": " + dlerror());
  std::shared_ptr<void> handle(raw, [](void* h) { dlclose(h); });

  const int version = symbol<VersionFn>(raw, "textground_adapter_api_version", where)();
  if (version != kProviderApiVersion) {
    throw AdapterError(where + ": adapter API version " + std::to_string(version) + ", expected " +
                       std::to_string(kProviderApiVersion));
  }
  auto create = symbol<CreateFn>(raw, "textground_adapter_create", where);
  auto destroy = symbol<DestroyFn>(raw, "textground_adapter_destroy", where);
  const std::string opts = nlohmann::json{{"seed", options.seed}}.dump();
  TraceProvider* provider = create(opts.c_str());
  if (!provider) throw AdapterError(where + ": adapter factory returned null");
  return std::make_unique<PluginProvider>(std::move(handle), std::unique_ptr<TraceProvider, DestroyFn>(provider, destroy));
}

}  // namespace

std::vector<std::string> adapter_search_path() {
  std::vector<std::string> dirs;
  const char* env = std::getenv(kAdapterPathEnv);
  if (!env) return dirs;
  std::string_view rest(env);
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    const auto dir = rest.substr(0, colon);
    if (!dir.empty()) dirs.emplace_back(dir);
    if (colon == std::string_view::npos) break;
    rest = rest.substr(colon + 1);
  }
  return dirs;
}

std::unique_ptr<TraceProvider> load_adapter(std::string_view name, const AdapterOptions& options) {
  if (name == "toy") return std::make_unique<ToyModel>(options.arch, options.seed);
  if (name.empty() || name.find('/') != std::string_view::npos) {
    throw AdapterError("invalid adapter name '" + std::string(name) + "'");
  }
  const std::string file = "lib" + std::string(kAdapterLibraryPrefix) + std::string(name) + ".so";
  for (const auto& dir : adapter_search_path()) {
    const auto candidate = std::filesystem::path(dir) / file;
    if (std::filesystem::exists(candidate)) return load_plugin(candidate, options);
  }
  throw AdapterError("adapter '" + std::string(name) + "' not found (looked for " + file + " in $" +
                     kAdapterPathEnv + ")");
}

}  // namespace textground
