#include "textground/head.hpp"

#include <algorithm>
#include <cmath>

#include "textground/error.hpp"

namespace textground {

std::vector<double> head_logits(std::span<const float> hidden, const OutputHead& head) {
  if (hidden.size() != head.d_model || head.weight.size() != head.vocab * head.d_model ||
      head.bias.size() != head.vocab || head.norm_gain.size() != head.d_model) {
    throw ValidationError("output head: hidden size " + std::to_string(hidden.size()) +
                          " does not match head d_model " + std::to_string(head.d_model));
  }
  double sq = 0.0;
  for (float v : hidden) sq += static_cast<double>(v) * v;
  const double inv_rms = 1.0 / std::sqrt(sq / static_cast<double>(hidden.size()) + head.norm_epsilon);

  std::vector<double> normed(hidden.size());
  for (std::size_t i = 0; i < hidden.size(); ++i) normed[i] = hidden[i] * inv_rms * head.norm_gain[i];

  std::vector<double> logits(head.vocab);
  for (std::size_t v = 0; v < head.vocab; ++v) {
    const auto w = head.weight_row(v);
    double acc = head.bias[v];
    for (std::size_t i = 0; i < normed.size(); ++i) acc += w[i] * normed[i];
    logits[v] = acc;
  }
  return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

}  // namespace textground
