#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textground/provider.hpp"
#include "textground/trace.hpp"
#include "textground/zoomtext.hpp"

namespace textground {

enum class Strategy { replacement, fusion, selective_replacement, off };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

inline constexpr double kDefaultFusionWeight = 0.1;

// How the correction source layer is chosen. Layer indices are 0-based block
// indices; ranges are half-open [lo, hi) and clipped to the model depth.
struct LayerPolicy {
  enum class Kind { grounded_argmax, fixed, random_in_range };

  Kind kind = Kind::grounded_argmax;
  std::size_t layer = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::uint64_t seed = 0;

  static LayerPolicy grounded() { return {}; }
  static LayerPolicy fixed(std::size_t layer) { return {Kind::fixed, layer, 0, 0, 0}; }
  static LayerPolicy random_in_range(std::size_t lo, std::size_t hi, std::uint64_t seed) {
    return {Kind::random_in_range, 0, lo, hi, seed};
  }

  // "grounded", "fixed:<l>", "random:<lo>-<hi>[:<seed>]"
  static LayerPolicy parse(std::string_view text);
  std::string describe() const;

  // Layer chosen for a model of n_layers blocks with per-layer grounding.
  std::size_t resolve(const std::vector<double>& grounding) const;
};

struct CorrectionConfig {
  Strategy strategy = Strategy::fusion;
  double fusion_weight = kDefaultFusionWeight;
  std::size_t top_k = kDefaultTopK;
  double epsilon = kDefaultEpsilon;
  double keep_fraction = kDefaultKeepFraction;
  LayerPolicy layer_policy;

  // Throws ValidationError when a field is out of range.
  void validate() const;
  ZoomTextConfig zoom() const { return {top_k, epsilon, keep_fraction}; }
};

nlohmann::json to_json(const CorrectionConfig& config);

struct GroundedLayer {
  std::size_t layer = 0;
  std::vector<double> grounding;  // A_l per block
};

// argmax over blocks of the text-region attention for `regions`, lowest index
// on ties.
GroundedLayer select_grounded_layer(const MultimodalTrace& trace, const TokenSelection& regions);

// Applies the configured strategy to one position's final hidden state.
// `in_selection` matters only for selective replacement.
std::vector<float> correct_row(std::span<const float> final_row, std::span<const float> grounded_row,
                               const CorrectionConfig& config, bool in_selection);

// replacement: every row from `grounded`; fusion: (1 - w) final + w grounded;
// selective_replacement: rows in `selection` from `grounded`; off: `final`.
HiddenStateTensor correct_hidden_states(const HiddenStateTensor& final, const HiddenStateTensor& grounded,
                                        const CorrectionConfig& config, const TokenSelection& selection);

struct CorrectionOutcome {
  std::size_t selected_layer = 0;
  std::vector<std::size_t> corrected_positions;
  Strategy strategy_used = Strategy::off;
  std::vector<double> per_layer_grounding;
  TokenSelection regions;
};

nlohmann::json to_json(const CorrectionOutcome& outcome);

struct DecodeResult {
  std::vector<TokenId> tokens;
  CorrectionOutcome outcome;
};

// Greedy decoding from the provider's own logits.
std::vector<TokenId> greedy_decode(TraceProvider& provider, const PromptInput& input, std::size_t max_new_tokens);

// Prefill, ZoomText on the prefill trace, layer selection, then greedy decoding
// where each step's final-layer hidden state is corrected before the output
// head. The provider's key/value history is never touched by the correction.
// When a correction leaves the hidden state bit-identical, the provider's
// native logits are used.
DecodeResult decode_with_correction(TraceProvider& provider, const PromptInput& input, const CorrectionConfig& config,
                                    std::size_t max_new_tokens);

}  // namespace textground
