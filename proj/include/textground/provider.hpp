#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "textground/trace.hpp"

namespace textground {

// Version of the TraceProvider contract. Plugins report the version they were
// built against and are rejected on mismatch.
inline constexpr int kProviderApiVersion = 1;

struct ImageGeometry {
  std::size_t grid_w = 4;
  std::size_t grid_h = 4;
  std::size_t patch_size = 16;
};

struct PromptInput {
  std::string image_ref;  // opaque to the harness; the toy model ignores it
  ImageGeometry image;
  std::vector<TokenId> query_tokens;
  // Teacher-forced tokens appended after the query, e.g. a previously
  // generated answer prefix that analysis wants covered by the trace.
  std::vector<TokenId> continuation;
};

// Per-step output for the newly appended position.
struct StepResult {
  std::vector<std::vector<float>> hidden_states;  // L + 1 vectors of d_model
  std::vector<float> logits;                      // vocab
};

struct ProviderMetadata {
  std::string model_id;
  TokenLayout layout;
  std::size_t n_layers = 0;
  std::size_t d_model = 0;
  std::size_t vocab = 0;
  TokenId eos_token = -1;  // negative when the model has no end-of-sequence token
};

// A model that can be traced and stepped autoregressively.
//
// prefill() resets the provider, runs the whole input and returns the full
// trace; the provider then holds its key/value history. step() appends one
// token to that history and returns the states of the new position.
// prefill_logits() are the next-token logits after the last prefill position.
class TraceProvider {
 public:
  virtual ~TraceProvider() = default;

  virtual MultimodalTrace prefill(const PromptInput& input) = 0;
  virtual std::vector<float> prefill_logits() const = 0;
  virtual StepResult step(TokenId token) = 0;
  virtual ProviderMetadata metadata() const = 0;

  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(const std::vector<TokenId>& tokens) const = 0;

  // Independent copy sharing immutable weights, for parallel evaluation.
  // Returns nullptr when the provider cannot be duplicated.
  virtual std::unique_ptr<TraceProvider> clone() const { return nullptr; }
};

}  // namespace textground
