#pragma once

#include <stdexcept>

#include "textground/head.hpp"
#include "textground/provider.hpp"

namespace fixtures {

// Provider that replays a fixed prefill trace. Every step returns the same
// per-layer states (`step_states`), and can be told to fail at a given step.
class ScriptedProvider final : public textground::TraceProvider {
 public:
  ScriptedProvider(textground::MultimodalTrace trace, std::vector<std::vector<float>> step_states,
                   textground::TokenId eos)
      : trace_(std::move(trace)), step_states_(std::move(step_states)), eos_(eos) {}

  textground::MultimodalTrace prefill(const textground::PromptInput&) override {
    steps_ = 0;
    prefilled_ = true;
    return trace_;
  }

  std::vector<float> prefill_logits() const override {
    return to_float(textground::head_logits(trace_.final_hidden().row(trace_.seq_len() - 1), trace_.output_head));
  }

  textground::StepResult step(textground::TokenId) override {
    if (!prefilled_) throw std::runtime_error("step before prefill");
    if (++steps_ == fail_at_step) throw std::runtime_error("scripted failure");
    textground::StepResult r;
    r.hidden_states = step_states_;
    r.logits = to_float(textground::head_logits(step_states_.back(), trace_.output_head));
    return r;
  }

  textground::ProviderMetadata metadata() const override {
    textground::ProviderMetadata m;
    m.model_id = "scripted";
    m.layout = trace_.layout;
    m.n_layers = trace_.n_layers();
    m.d_model = trace_.output_head.d_model;
    m.vocab = trace_.output_head.vocab;
    m.eos_token = eos_;
    return m;
  }

  std::vector<textground::TokenId> tokenize(std::string_view) const override { return {}; }
  std::string detokenize(const std::vector<textground::TokenId>& tokens) const override {
    std::string s;
    for (auto t : tokens) s += std::to_string(t) + " ";
    return s;
  }

  std::size_t fail_at_step = 0;  // 0 disables

 private:
  static std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

  textground::MultimodalTrace trace_;
  std::vector<std::vector<float>> step_states_;
  textground::TokenId eos_;
  std::size_t steps_ = 0;
  bool prefilled_ = false;
};

// Scenario where the last prompt position's final hidden state prefers token
// 0 (the hallucinated token) while block 1, the most text-grounded block,
// points at token 1 (the ground-truth token).
//
// Three blocks over a 2x2 image and two query tokens; d_model = vocab = 4 and
// the head is the identity, so logits follow the normalized hidden state.
// Final state at the last position: a e0 + b e1 with a > b. Block 1 output:
// s e1. Fusion picks token 1 exactly when w > (a - b) / (a - b + s). Every
// step after the first returns states pointing at token 3, the
// end-of-sequence token.
//
// Attention: query rows look at image tokens 0 and 1 (0.4 each) and 2 and 3
// (0.1 each); image rows spread evenly over the image in blocks 0 and 2 and
// only over tokens 0 and 1 in block 1. Refocus sees no shift, keeps {0, 1},
// and block 1 has the highest text-region attention.
inline constexpr textground::TokenId kScenarioHal = 0;
inline constexpr textground::TokenId kScenarioGt = 1;
inline constexpr textground::TokenId kScenarioEos = 3;

inline textground::MultimodalTrace flip_scenario_trace(double a, double b, double s) {
  using namespace textground;
  MultimodalTrace t;
  t.model_id = "flip-scenario";
  t.layout = make_layout(2, 2, 16, 2);
  const std::size_t seq = 6, d = 4;
  t.token_ids = {0, 0, 0, 0, 2, 2};
  for (std::size_t l = 0; l < 3; ++l) {
    AttentionTensor attn(l, 1, seq);
    for (std::size_t i = 0; i < 4; ++i) {
      if (l == 1) {
        attn.at(0, i, 0) = attn.at(0, i, 1) = 0.5f;
      } else {
        for (std::size_t j = 0; j < 4; ++j) attn.at(0, i, j) = 0.25f;
      }
    }
    for (std::size_t q = 4; q < 6; ++q) {
      attn.at(0, q, 0) = attn.at(0, q, 1) = 0.4f;
      attn.at(0, q, 2) = attn.at(0, q, 3) = 0.1f;
    }
    t.attentions.push_back(std::move(attn));
  }
  for (std::size_t l = 0; l <= 3; ++l) {
    HiddenStateTensor hs(l, seq, d);
    for (std::size_t p = 0; p < seq; ++p) hs.row(p)[2] = 1.0f;
    t.hidden_states.push_back(std::move(hs));
  }
  auto last = t.hidden_states[3].row(seq - 1);
  last[0] = static_cast<float>(a);
  last[1] = static_cast<float>(b);
  last[2] = 0.0f;
  auto grounded = t.hidden_states[2].row(seq - 1);
  grounded[1] = static_cast<float>(s);
  grounded[2] = 0.0f;

  auto& head = t.output_head;
  head.vocab = 4;
  head.d_model = d;
  head.weight.assign(16, 0.0f);
  for (std::size_t v = 0; v < 4; ++v) head.weight[v * d + v] = 1.0f;
  head.bias.assign(4, 0.0f);
  head.norm_gain.assign(d, 1.0f);
  return t;
}

inline std::vector<std::vector<float>> eos_step_states() {
  return std::vector<std::vector<float>>(4, std::vector<float>{0.0f, 0.0f, 0.0f, 5.0f});
}

}  // namespace fixtures
