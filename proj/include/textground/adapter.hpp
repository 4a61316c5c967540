#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "textground/provider.hpp"
#include "textground/toy_model.hpp"

namespace textground {

// Colon-separated directories searched for adapter plugins.
inline constexpr const char* kAdapterPathEnv = "TEXTGROUND_ADAPTER_PATH";

// A plugin named <name> lives in lib<prefix><name>.so and exports these
// C symbols:
//   int textground_adapter_api_version(void);   // must equal kProviderApiVersion
//   textground::TraceProvider* textground_adapter_create(const char* options_json);
//   void textground_adapter_destroy(textground::TraceProvider*);
// `options_json` is {"seed": <n>} plus anything the caller passes through.
inline constexpr std::string_view kAdapterLibraryPrefix = "textground_adapter_";

struct AdapterOptions {
  std::uint64_t seed = 7;
  ToyArch arch;  // used by the built-in toy adapter only
};

// "toy" is built in; any other name is resolved through kAdapterPathEnv.
// Throws AdapterError when the adapter cannot be found or loaded.
std::unique_ptr<TraceProvider> load_adapter(std::string_view name, const AdapterOptions& options);

// Directories from kAdapterPathEnv, in order.
std::vector<std::string> adapter_search_path();

}  // namespace textground
