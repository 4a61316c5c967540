#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "textground/provider.hpp"
#include "textground/trace.hpp"

namespace textground {

struct ToyArch {
  std::size_t n_layers = 4;
  std::size_t n_heads = 2;
  std::size_t d_model = 32;
  std::size_t vocab = 64;

  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t d_ff() const { return 4 * d_model; }
};

// Token id placed at image-prefix positions of the trace.
inline constexpr TokenId kImageTokenId = 0;
inline constexpr TokenId kToyEosToken = 1;

struct ToyBlockWeights {
  std::vector<float> attn_norm_gain;  // [d]
  std::vector<float> wq, wk, wv, wo;  // [d x d]
  std::vector<float> mlp_norm_gain;   // [d]
  std::vector<float> w_up;            // [d_ff x d]
  std::vector<float> b_up;            // [d_ff]
  std::vector<float> w_down;          // [d x d_ff]
  std::vector<float> b_down;          // [d]
};

struct ToyWeights {
  ToyArch arch;
  std::uint64_t seed = 0;
  std::vector<float> token_embedding;  // [vocab x d]
  std::vector<ToyBlockWeights> blocks;
  OutputHead head;

  // Learned image-prefix embedding for prefix position `index`.
  std::vector<float> image_embedding(std::size_t index) const;
};

// Weights are uniform draws from per-tensor splitmix64 streams keyed on
// (seed, tensor name): embeddings in [-1, 1], projections in
// [-sqrt(3 / fan_in), sqrt(3 / fan_in)], residual output projections further
// scaled by 1 / sqrt(2 L), norm gains in [0.9, 1.1], biases in [-0.1, 0.1].
// The image prefix row i comes from stream "image_prefix.<i>", so the prefix
// never shifts the other tensors.
ToyWeights make_toy_weights(const ToyArch& arch, std::uint64_t seed);

// Pre-norm decoder-only transformer with causal multi-head self-attention,
// GELU MLP blocks, sinusoidal positions and an RMS-normalized output head.
// Every position runs through the same per-position kernel whether it is part
// of a prefill or a step, so incremental decoding reproduces a full forward
// pass bit for bit.
class ToyModel final : public TraceProvider {
 public:
  ToyModel(const ToyArch& arch, std::uint64_t seed);
  explicit ToyModel(std::shared_ptr<const ToyWeights> weights);

  MultimodalTrace prefill(const PromptInput& input) override;
  std::vector<float> prefill_logits() const override;
  StepResult step(TokenId token) override;
  ProviderMetadata metadata() const override;
  std::unique_ptr<TraceProvider> clone() const override;
  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::string detokenize(const std::vector<TokenId>& tokens) const override;

  const ToyWeights& weights() const { return *weights_; }
  const std::string& model_id() const { return model_id_; }

 private:
  struct PositionOutput {
    std::vector<std::vector<float>> hidden;             // L + 1 vectors
    std::vector<std::vector<std::vector<float>>> attn;  // [layer][head][0..pos]
  };

  PositionOutput run_position(const std::vector<float>& embedding);
  void check_token(TokenId token) const;

  std::shared_ptr<const ToyWeights> weights_;
  std::string model_id_;
  TokenLayout layout_;
  // Key/value history per layer, [pos x d] each.
  std::vector<std::vector<float>> keys_, values_;
  std::size_t length_ = 0;
  std::vector<float> last_hidden_;
};

// One full forward pass over an image prefix of n_image_tokens followed by the
// prompt. The prefix grid is the most square factorization of n_image_tokens
// with 16-pixel patches.
MultimodalTrace toy_model_forward(const std::vector<TokenId>& prompt_tokens, std::size_t n_image_tokens,
                                  std::uint64_t seed, const ToyArch& arch);

}  // namespace textground
