#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textground/trace.hpp"

namespace textground {

struct HallucinationLocus {
  std::size_t position = 0;  // index into the generated sequence
  TokenId hallucinated_token_id = 0;
  TokenId ground_truth_token_id = 0;
};

// First index where the two token sequences disagree. No locus when they are
// identical or one is a strict prefix of the other.
std::optional<HallucinationLocus> extract_hallucinated_token(std::span<const TokenId> generated,
                                                             std::span<const TokenId> ground_truth);

// Per-layer next-token distribution: final norm, projection, softmax.
std::vector<double> logit_lens(std::span<const float> hidden, const OutputHead& head);

// Trace position whose next-token distribution produced generated[locus.position]:
// the last prompt position plus the locus offset.
std::size_t locus_trace_position(const MultimodalTrace& trace, const HallucinationLocus& locus);

// S_l = P_hal / (P_hal + P_gt) under the logit lens of block l's output at the
// locus position, for every block.
std::vector<double> tendency_profile(const MultimodalTrace& trace, const HallucinationLocus& locus);

struct RegionAttention {
  double score = 0.0;
  bool degenerate = false;  // image-to-image attention mass was zero
};

// Share of head-mean image-to-image attention that lands on `text_tokens`.
RegionAttention text_region_attention(const AttentionTensor& attn, const TokenLayout& layout,
                                      const TokenSelection& text_tokens);

// text_region_attention for every layer of the trace.
std::vector<double> grounding_profile(const MultimodalTrace& trace, const TokenSelection& text_tokens);

struct LayerProfile {
  std::size_t layer_index = 0;
  double tendency = 0.0;
  double grounding = 0.0;
};

std::vector<LayerProfile> layer_profiles(const MultimodalTrace& trace, const HallucinationLocus& locus,
                                         const TokenSelection& text_tokens);

struct SampleProfiles {
  std::string sample_id;
  std::vector<LayerProfile> layers;
};

struct SampleCorrelation {
  std::string sample_id;
  double rho = 0.0;
  bool defined = false;
};

struct CorrelationReport {
  std::vector<SampleCorrelation> per_sample;
  double aggregate_rho = 0.0;
  std::size_t n_defined = 0;
};

// Spearman rho between tendency and grounding per sample, averaged over the
// samples where it is defined. Throws if no sample has a defined rho.
CorrelationReport correlation_report(const std::vector<SampleProfiles>& samples);

nlohmann::json to_json(const CorrelationReport& report);
// CSV with header `layer,tendency,grounding`.
std::string profiles_csv(const std::vector<LayerProfile>& layers);

// Head-mean attention received by `token_index` from every position, per layer.
std::vector<double> attention_received(const MultimodalTrace& trace, std::size_t token_index);

// Coefficient of variation of attention_received across layers.
double attention_cv(const MultimodalTrace& trace, std::size_t token_index);

}  // namespace textground
