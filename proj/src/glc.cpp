#include "textground/glc.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <sstream>

#include "textground/error.hpp"
#include "textground/head.hpp"
#include "textground/layer_analysis.hpp"

namespace textground {

namespace {

std::size_t parse_index(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ValidationError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool bit_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::replacement: return "replacement";
    case Strategy::fusion: return "fusion";
    case Strategy::selective_replacement: return "selective_replacement";
    case Strategy::off: return "off";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "replacement") return Strategy::replacement;
  if (text == "fusion") return Strategy::fusion;
  if (text == "selective_replacement" || text == "selective") return Strategy::selective_replacement;
  if (text == "off") return Strategy::off;
  throw ValidationError("unknown strategy '" + std::string(text) + "'");
}

LayerPolicy LayerPolicy::parse(std::string_view text) {
  if (text == "grounded" || text == "grounded_argmax") return grounded();
  if (text.starts_with("fixed:")) return fixed(parse_index(text.substr(6), "layer"));
  if (text.starts_with("random:")) {
    auto rest = text.substr(7);
    std::uint64_t seed = 0;
    if (auto colon = rest.find(':'); colon != std::string_view::npos) {
      seed = parse_index(rest.substr(colon + 1), "seed");
      rest = rest.substr(0, colon);
    }
    const auto dash = rest.find('-');
    if (dash == std::string_view::npos) throw ValidationError("layer range must look like <lo>-<hi>");
    return random_in_range(parse_index(rest.substr(0, dash), "layer"), parse_index(rest.substr(dash + 1), "layer"),
                           seed);
  }
  throw ValidationError("unknown layer policy '" + std::string(text) + "'");
}

std::string LayerPolicy::describe() const {
  switch (kind) {
    case Kind::grounded_argmax: return "grounded";
    case Kind::fixed: return "fixed:" + std::to_string(layer);
    case Kind::random_in_range:
      return "random:" + std::to_string(lo) + "-" + std::to_string(hi) + ":" + std::to_string(seed);
  }
  return "unknown";
}

std::size_t LayerPolicy::resolve(const std::vector<double>& grounding) const {
  const std::size_t n = grounding.size();
  if (n == 0) throw ValidationError("layer policy: model has no layers");
  switch (kind) {
    case Kind::grounded_argmax:
      return argmax(std::span<const double>(grounding));
    case Kind::fixed:
      if (layer >= n) {
        throw ValidationError("layer policy: fixed layer " + std::to_string(layer) + " exceeds depth " +
                              std::to_string(n));
      }
      return layer;
    case Kind::random_in_range: {
      const std::size_t top = std::min(hi, n);
      if (lo >= top) {
        throw ValidationError("layer policy: range " + std::to_string(lo) + "-" + std::to_string(hi) +
                              " is empty for depth " + std::to_string(n));
      }
      return lo + static_cast<std::size_t>(mix(seed) % (top - lo));
    }
  }
  return 0;
}

void CorrectionConfig::validate() const {
  if (!(fusion_weight >= 0.0 && fusion_weight <= 1.0)) throw ValidationError("fusion weight must lie in [0, 1]");
  if (top_k < 1) throw ValidationError("top_k must be at least 1");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ValidationError("keep_fraction must lie in (0, 1]");
}

nlohmann::json to_json(const CorrectionConfig& c) {
  return {{"strategy", to_string(c.strategy)}, {"w", c.fusion_weight},
          {"k", c.top_k},                      {"epsilon", c.epsilon},
          {"keep_fraction", c.keep_fraction},  {"layer_policy", c.layer_policy.describe()}};
}

GroundedLayer select_grounded_layer(const MultimodalTrace& trace, const TokenSelection& regions) {
  if (regions.empty()) throw ValidationError("select_grounded_layer: region selection is empty");
  GroundedLayer out;
  out.grounding = grounding_profile(trace, regions);
  out.layer = argmax(std::span<const double>(out.grounding));
  return out;
}

std::vector<float> correct_row(std::span<const float> final_row, std::span<const float> grounded_row,
                               const CorrectionConfig& config, bool in_selection) {
  if (final_row.size() != grounded_row.size()) throw ValidationError("correction: hidden sizes differ");
  switch (config.strategy) {
    case Strategy::replacement: return {grounded_row.begin(), grounded_row.end()};
    case Strategy::selective_replacement:
      return in_selection ? std::vector<float>(grounded_row.begin(), grounded_row.end())
                          : std::vector<float>(final_row.begin(), final_row.end());
    case Strategy::fusion: {
      const double w = config.fusion_weight;
      std::vector<float> out(final_row.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>((1.0 - w) * final_row[i] + w * grounded_row[i]);
      }
      return out;
    }
    case Strategy::off: break;
  }
  return {final_row.begin(), final_row.end()};
}

HiddenStateTensor correct_hidden_states(const HiddenStateTensor& final, const HiddenStateTensor& grounded,
                                        const CorrectionConfig& config, const TokenSelection& selection) {
  if (final.seq != grounded.seq || final.d_model != grounded.d_model || final.states.size() != grounded.states.size()) {
    throw ValidationError("correct_hidden_states: final and grounded tensors differ in shape");
  }
  std::vector<bool> selected(final.seq, false);
  for (auto i : selection.indices) {
    if (i >= final.seq) throw ValidationError("correct_hidden_states: selection index out of range");
    selected[i] = true;
  }
  HiddenStateTensor out = final;
  for (std::size_t p = 0; p < final.seq; ++p) {
    const auto row = correct_row(final.row(p), grounded.row(p), config, selected[p]);
    std::copy(row.begin(), row.end(), out.row(p).begin());
  }
  return out;
}

nlohmann::json to_json(const CorrectionOutcome& o) {
  return {{"selected_layer", o.selected_layer},
          {"strategy", to_string(o.strategy_used)},
          {"corrected_positions", o.corrected_positions},
          {"per_layer_grounding", o.per_layer_grounding},
          {"selected_tokens", o.regions.indices},
          {"selected_token_scores", o.regions.scores}};
}

std::vector<TokenId> greedy_decode(TraceProvider& provider, const PromptInput& input, std::size_t max_new_tokens) {
  std::vector<TokenId> out;
  if (max_new_tokens == 0) return out;
  provider.prefill(input);
  const TokenId eos = provider.metadata().eos_token;
  std::vector<float> logits = provider.prefill_logits();
  while (true) {
    const auto next = static_cast<TokenId>(argmax(std::span<const float>(logits)));
    if (next == eos) break;
    out.push_back(next);
    if (out.size() == max_new_tokens) break;
    try {
      logits = provider.step(next).logits;
    } catch (const std::exception& e) {
      throw AdapterError("decode step " + std::to_string(out.size()) + ": " + e.what());
    }
  }
  return out;
}

DecodeResult decode_with_correction(TraceProvider& provider, const PromptInput& input, const CorrectionConfig& config,
                                    std::size_t max_new_tokens) {
  config.validate();
  MultimodalTrace trace;
  try {
    trace = provider.prefill(input);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw AdapterError(std::string("prefill: ") + e.what());
  }

  DecodeResult result;
  auto& outcome = result.outcome;
  outcome.strategy_used = config.strategy;
  outcome.regions = zoom_text(trace, config.zoom()).selection;
  outcome.per_layer_grounding = grounding_profile(trace, outcome.regions);
  outcome.selected_layer = config.layer_policy.resolve(outcome.per_layer_grounding);

  const std::size_t seq = trace.seq_len();
  const std::size_t source = outcome.selected_layer + 1;  // hidden-state index of the selected block's output
  std::vector<bool> in_selection(seq, false);
  for (auto i : outcome.regions.indices) in_selection[i] = true;

  if (max_new_tokens == 0) return result;
  const TokenId eos = provider.metadata().eos_token;

  auto choose = [&](std::span<const float> final_row, std::span<const float> grounded_row, bool selected,
                    const std::vector<float>& native) {
    const auto corrected = correct_row(final_row, grounded_row, config, selected);
    if (bit_equal(corrected, final_row)) return static_cast<TokenId>(argmax(std::span<const float>(native)));
    const auto logits = head_logits(corrected, trace.output_head);
    return static_cast<TokenId>(argmax(std::span<const double>(logits)));
  };

  const std::size_t last = seq - 1;
  TokenId next = choose(trace.final_hidden().row(last), trace.hidden_states[source].row(last), in_selection[last],
                        provider.prefill_logits());
  std::size_t decoded_positions = 0;
  while (next != eos) {
    result.tokens.push_back(next);
    if (result.tokens.size() == max_new_tokens) break;
    StepResult step;
    try {
      step = provider.step(next);
    } catch (const std::exception& e) {
      throw AdapterError("decode step " + std::to_string(result.tokens.size()) + ": " + e.what());
    }
    if (step.hidden_states.size() != trace.hidden_states.size()) {
      throw AdapterError("decode step " + std::to_string(result.tokens.size()) +
                         ": provider returned the wrong number of hidden states");
    }
    ++decoded_positions;
    next = choose(step.hidden_states.back(), step.hidden_states[source], false, step.logits);
  }

  switch (config.strategy) {
    case Strategy::off: break;
    case Strategy::selective_replacement:
      outcome.corrected_positions.assign(outcome.regions.indices.begin(), outcome.regions.indices.end());
      std::sort(outcome.corrected_positions.begin(), outcome.corrected_positions.end());
      break;
    case Strategy::replacement:
    case Strategy::fusion:
      for (std::size_t p = 0; p < seq + decoded_positions; ++p) outcome.corrected_positions.push_back(p);
      break;
  }
  return result;
}

}  // namespace textground
