#include "textground/layer_analysis.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "textground/error.hpp"
#include "textground/head.hpp"
#include "textground/stats.hpp"

namespace textground {

std::optional<HallucinationLocus> extract_hallucinated_token(std::span<const TokenId> generated,
                                                             std::span<const TokenId> ground_truth) {
  if (generated.empty() || ground_truth.empty()) {
    throw ValidationError("extract_hallucinated_token: token sequences must be non-empty");
  }
  const std::size_t n = std::min(generated.size(), ground_truth.size());
  for (std::size_t t = 0; t < n; ++t) {
    if (generated[t] != ground_truth[t]) return HallucinationLocus{t, generated[t], ground_truth[t]};
  }
  return std::nullopt;
}

std::vector<double> logit_lens(std::span<const float> hidden, const OutputHead& head) {
  const auto logits = head_logits(hidden, head);
  return softmax(logits);
}

std::size_t locus_trace_position(const MultimodalTrace& trace, const HallucinationLocus& locus) {
  const auto& layout = trace.layout;
  const std::size_t prompt_end =
      layout.query_token_range.empty() ? layout.image_token_range.end : layout.query_token_range.end;
  if (prompt_end == 0) throw ValidationError("locus: trace has no prompt positions");
  const std::size_t pos = prompt_end - 1 + locus.position;
  if (pos >= trace.seq_len()) {
    std::ostringstream os;
    os << "locus: generated position " << locus.position << " maps to trace position " << pos
       << " beyond sequence length " << trace.seq_len();
    throw ValidationError(os.str());
  }
  return pos;
}

std::vector<double> tendency_profile(const MultimodalTrace& trace, const HallucinationLocus& locus) {
  const std::size_t pos = locus_trace_position(trace, locus);
  const auto vocab = trace.output_head.vocab;
  auto check_id = [&](TokenId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ValidationError("locus: token id " + std::to_string(id) + " outside vocabulary");
    }
  };
  check_id(locus.hallucinated_token_id);
  check_id(locus.ground_truth_token_id);

  std::vector<double> profile;
  profile.reserve(trace.n_layers());
  for (std::size_t l = 0; l < trace.n_layers(); ++l) {
    // p_hal / (p_hal + p_gt) under the softmax equals a logistic of the logit
    // gap, which stays finite when both probabilities underflow.
    const auto z = head_logits(trace.block_output(l).row(pos), trace.output_head);
    const double gap = z[static_cast<std::size_t>(locus.ground_truth_token_id)] -
                       z[static_cast<std::size_t>(locus.hallucinated_token_id)];
    profile.push_back(1.0 / (1.0 + std::exp(gap)));
  }
  return profile;
}

RegionAttention text_region_attention(const AttentionTensor& attn, const TokenLayout& layout,
                                      const TokenSelection& text_tokens) {
  const auto& img = layout.image_token_range;
  if (img.empty()) throw ValidationError("text_region_attention: layout has no image tokens");
  if (img.end > attn.seq) throw ValidationError("text_region_attention: image range exceeds attention size");
  for (auto j : text_tokens.indices) {
    if (!img.contains(j)) {
      throw ValidationError("text_region_attention: token " + std::to_string(j) + " is not an image token");
    }
  }

  double numer = 0.0, denom = 0.0;
  for (std::size_t i = img.begin; i < img.end; ++i) {
    for (std::size_t j = img.begin; j < img.end; ++j) denom += attn.head_mean(i, j);
    for (auto j : text_tokens.indices) numer += attn.head_mean(i, j);
  }
  if (denom == 0.0) return {0.0, true};
  return {std::clamp(numer / denom, 0.0, 1.0), false};
}

std::vector<double> grounding_profile(const MultimodalTrace& trace, const TokenSelection& text_tokens) {
  std::vector<double> out;
  out.reserve(trace.n_layers());
  for (const auto& attn : trace.attentions) out.push_back(text_region_attention(attn, trace.layout, text_tokens).score);
  return out;
}

std::vector<LayerProfile> layer_profiles(const MultimodalTrace& trace, const HallucinationLocus& locus,
                                         const TokenSelection& text_tokens) {
  const auto tendency = tendency_profile(trace, locus);
  const auto grounding = grounding_profile(trace, text_tokens);
  std::vector<LayerProfile> out;
  for (std::size_t l = 0; l < tendency.size(); ++l) out.push_back({l, tendency[l], grounding[l]});
  return out;
}

CorrelationReport correlation_report(const std::vector<SampleProfiles>& samples) {
  CorrelationReport report;
  double sum = 0.0;
  for (const auto& s : samples) {
    if (s.layers.size() < 2) {
      throw ValidationError("correlation_report: sample '" + s.sample_id + "' has fewer than two layers");
    }
    std::vector<double> tendency, grounding;
    for (const auto& l : s.layers) {
      tendency.push_back(l.tendency);
      grounding.push_back(l.grounding);
    }
    const auto r = spearman(tendency, grounding);
    report.per_sample.push_back({s.sample_id, r.rho, r.defined});
    if (r.defined) {
      sum += r.rho;
      ++report.n_defined;
    }
  }
  if (report.n_defined == 0) throw ValidationError("correlation_report: no sample has a defined correlation");
  report.aggregate_rho = sum / static_cast<double>(report.n_defined);
  return report;
}

nlohmann::json to_json(const CorrelationReport& report) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : report.per_sample) {
    per.push_back({{"sample_id", s.sample_id},
                   {"rho", s.defined ? nlohmann::json(s.rho) : nlohmann::json(nullptr)},
                   {"defined", s.defined}});
  }
  return {{"per_sample", per}, {"aggregate_rho", report.aggregate_rho}, {"n_defined", report.n_defined}};
}

std::string profiles_csv(const std::vector<LayerProfile>& layers) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "layer,tendency,grounding\n";
  for (const auto& l : layers) os << l.layer_index << ',' << l.tendency << ',' << l.grounding << '\n';
  return os.str();
}

std::vector<double> attention_received(const MultimodalTrace& trace, std::size_t token_index) {
  if (!trace.layout.image_token_range.contains(token_index)) {
    throw ValidationError("attention_cv: token " + std::to_string(token_index) + " is not an image token");
  }
  std::vector<double> series;
  series.reserve(trace.n_layers());
  for (const auto& attn : trace.attentions) {
    double total = 0.0;
    for (std::size_t q = 0; q < attn.seq; ++q) total += attn.head_mean(q, token_index);
    series.push_back(total);
  }
  return series;
}

double attention_cv(const MultimodalTrace& trace, std::size_t token_index) {
  if (trace.n_layers() < 2) throw ValidationError("attention_cv: need at least two layers");
  const auto series = attention_received(trace, token_index);
  return coefficient_of_variation(series);
}

}  // namespace textground
