#include <doctest.h>

#include <cmath>
#include <cstring>

#include "support/fixtures.hpp"
#include "support/scripted_provider.hpp"
#include "textground/error.hpp"
#include "textground/glc.hpp"
#include "textground/layer_analysis.hpp"
#include "textground/toy_model.hpp"

using namespace textground;

namespace {

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

CorrectionConfig with_strategy(Strategy s, double w = kDefaultFusionWeight) {
  CorrectionConfig c;
  c.strategy = s;
  c.fusion_weight = w;
  return c;
}

PromptInput toy_prompt(std::vector<TokenId> q) {
  PromptInput in;
  in.image.grid_w = in.image.grid_h = 3;
  in.query_tokens = std::move(q);
  return in;
}

}  // namespace

TEST_CASE("defaults") {
  const CorrectionConfig c;
  CHECK(c.strategy == Strategy::fusion);
  CHECK(c.fusion_weight == 0.1);
  CHECK(c.top_k == 128);
  CHECK(c.epsilon == 1e-6);
  CHECK(c.keep_fraction == 0.5);
  CHECK(c.layer_policy.kind == LayerPolicy::Kind::grounded_argmax);
  const auto j = to_json(c);
  CHECK(j["k"] == 128);
  CHECK(j["w"] == 0.1);
  CHECK(j["strategy"] == "fusion");
}

TEST_CASE("config validation") {
  CorrectionConfig c;
  c.fusion_weight = 1.2;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.top_k = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.epsilon = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.keep_fraction = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("strategy names") {
  for (auto s : {Strategy::replacement, Strategy::fusion, Strategy::selective_replacement, Strategy::off}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK(parse_strategy("selective") == Strategy::selective_replacement);
  CHECK_THROWS_AS(parse_strategy("blend"), ValidationError);
}

TEST_CASE("layer policies") {
  const std::vector<double> g{0.2, 0.7, 0.7, 0.1};
  CHECK(LayerPolicy::grounded().resolve(g) == 1);
  CHECK(LayerPolicy::parse("fixed:3").resolve(g) == 3);
  CHECK_THROWS_AS(LayerPolicy::fixed(4).resolve(g), ValidationError);
  const auto r = LayerPolicy::parse("random:1-3:42");
  CHECK(r.kind == LayerPolicy::Kind::random_in_range);
  CHECK(r.describe() == "random:1-3:42");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto l = LayerPolicy::random_in_range(1, 3, seed).resolve(g);
    CHECK(l >= 1);
    CHECK(l < 3);
    CHECK(LayerPolicy::random_in_range(1, 3, seed).resolve(g) == l);
  }
  CHECK(LayerPolicy::random_in_range(2, 10, 1).resolve(g) < 4);
  CHECK_THROWS_AS(LayerPolicy::random_in_range(4, 6, 1).resolve(g), ValidationError);
  CHECK_THROWS_AS(LayerPolicy::parse("fixed:x"), ValidationError);
  CHECK_THROWS_AS(LayerPolicy::parse("random:3"), ValidationError);
  CHECK_THROWS_AS(LayerPolicy::parse("best"), ValidationError);
  CHECK(LayerPolicy::parse(LayerPolicy::fixed(2).describe()).layer == 2);
}

TEST_CASE("grounded layer is the argmax of text-region attention") {
  const auto t = fixtures::flip_scenario_trace(2, 1, 1);
  const auto g = select_grounded_layer(t, make_selection({{0, 1}, {1, 1}}, SelectionOrigin::refocus));
  CHECK(g.layer == 1);
  CHECK(g.grounding == std::vector<double>{0.5, 1.0, 0.5});
  CHECK_THROWS_AS(select_grounded_layer(t, {}), ValidationError);
}

TEST_CASE("fusion matches the elementwise affine oracle") {
  fixtures::Rng rng(5);
  for (double w : {0.0, 0.1, 0.5, 1.0}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<float> f(16), g(16);
      for (auto& x : f) x = static_cast<float>(fixtures::uniform(rng, -3, 3));
      for (auto& x : g) x = static_cast<float>(fixtures::uniform(rng, -3, 3));
      const auto out = correct_row(f, g, with_strategy(Strategy::fusion, w), false);
      for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(out[i] - ((1 - w) * f[i] + w * g[i])) <= 1e-6);
    }
  }
  const std::vector<float> f{1.5f, -2.0f}, g{0.25f, 4.0f};
  CHECK(same_bits(correct_row(f, g, with_strategy(Strategy::fusion, 0.0), false), f));
  CHECK(same_bits(correct_row(f, g, with_strategy(Strategy::fusion, 1.0), false), g));
  CHECK_THROWS_AS(correct_row(f, std::vector<float>{1.0f}, CorrectionConfig{}, false), ValidationError);
}

TEST_CASE("selective replacement bounds") {
  fixtures::Rng rng(9);
  const auto t = fixtures::random_trace(rng, {});
  const auto& fin = t.final_hidden();
  const auto& src = t.hidden_states[1];
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t i = 0; i < fin.seq; ++i) all.emplace_back(i, 1.0);
  const auto everything = make_selection(all, SelectionOrigin::refocus);

  const auto sel_all = correct_hidden_states(fin, src, with_strategy(Strategy::selective_replacement), everything);
  const auto repl = correct_hidden_states(fin, src, with_strategy(Strategy::replacement), {});
  CHECK(same_bits(sel_all.states, repl.states));
  CHECK(same_bits(repl.states, src.states));

  const auto sel_none = correct_hidden_states(fin, src, with_strategy(Strategy::selective_replacement), {});
  CHECK(same_bits(sel_none.states, fin.states));
  CHECK(same_bits(correct_hidden_states(fin, src, with_strategy(Strategy::off), everything).states, fin.states));

  const auto some = make_selection({{2, 1.0}}, SelectionOrigin::refocus);
  const auto partial = correct_hidden_states(fin, src, with_strategy(Strategy::selective_replacement), some);
  for (std::size_t p = 0; p < fin.seq; ++p) CHECK(same_bits(partial.row(p), p == 2 ? src.row(p) : fin.row(p)));

  CHECK_THROWS_AS(correct_hidden_states(fin, HiddenStateTensor(0, 2, fin.d_model), CorrectionConfig{}, {}),
                  ValidationError);
  CHECK_THROWS_AS(correct_hidden_states(fin, src, CorrectionConfig{},
                                        make_selection({{fin.seq, 1.0}}, SelectionOrigin::refocus)),
                  ValidationError);
}

TEST_CASE("correction leaves its inputs untouched") {
  fixtures::Rng rng(10);
  const auto t = fixtures::random_trace(rng, {});
  const auto before = t;
  correct_hidden_states(t.final_hidden(), t.hidden_states[1], CorrectionConfig{}, {});
  for (std::size_t l = 0; l < t.hidden_states.size(); ++l) {
    CHECK(same_bits(t.hidden_states[l].states, before.hidden_states[l].states));
  }
}

TEST_CASE("identity corrections reproduce greedy decoding on the toy model") {
  fixtures::Rng rng(2024);
  ToyModel model(ToyArch{}, 7);
  for (int i = 0; i < 10; ++i) {
    std::vector<TokenId> q;
    for (std::size_t j = 0, n = fixtures::pick(rng, 1, 8); j < n; ++j) {
      q.push_back(static_cast<TokenId>(fixtures::pick(rng, 2, 63)));
    }
    const auto in = toy_prompt(q);
    const auto plain = greedy_decode(model, in, 12);
    CHECK(decode_with_correction(model, in, with_strategy(Strategy::off), 12).tokens == plain);
    CHECK(decode_with_correction(model, in, with_strategy(Strategy::fusion, 0.0), 12).tokens == plain);
    CHECK(decode_with_correction(model, in, with_strategy(Strategy::selective_replacement), 12).tokens == plain);
  }
}

TEST_CASE("decode stops at max_new_tokens and end-of-sequence") {
  ToyModel model(ToyArch{}, 7);
  const auto in = toy_prompt({5, 6, 7});
  CHECK(greedy_decode(model, in, 0).empty());
  CHECK(decode_with_correction(model, in, CorrectionConfig{}, 0).tokens.empty());
  CHECK(greedy_decode(model, in, 3).size() <= 3);

  fixtures::ScriptedProvider p(fixtures::flip_scenario_trace(2, 1, 1), fixtures::eos_step_states(),
                               fixtures::kScenarioEos);
  const auto r = decode_with_correction(p, {}, with_strategy(Strategy::off), 10);
  CHECK(r.tokens == std::vector<TokenId>{fixtures::kScenarioHal});
}

TEST_CASE("fusion flips the scripted divergence past the analytic threshold") {
  const double a = 2.0, b = 1.0, s = 1.0;  // threshold (a - b) / (a - b + s) = 0.5
  fixtures::ScriptedProvider p(fixtures::flip_scenario_trace(a, b, s), fixtures::eos_step_states(),
                               fixtures::kScenarioEos);
  auto run = [&](Strategy st, double w) { return decode_with_correction(p, {}, with_strategy(st, w), 4); };
  CHECK(run(Strategy::fusion, 0.0).tokens == std::vector<TokenId>{fixtures::kScenarioHal});
  CHECK(run(Strategy::fusion, 0.49).tokens == std::vector<TokenId>{fixtures::kScenarioHal});
  CHECK(run(Strategy::fusion, 0.51).tokens == std::vector<TokenId>{fixtures::kScenarioGt});
  CHECK(run(Strategy::replacement, 0.0).tokens == std::vector<TokenId>{fixtures::kScenarioGt});

  const auto r = run(Strategy::fusion, 0.6);
  CHECK(r.outcome.selected_layer == 1);
  CHECK(r.outcome.per_layer_grounding == std::vector<double>{0.5, 1.0, 0.5});
  CHECK(r.outcome.regions.indices == std::vector<std::size_t>{0, 1});
  // 6 prompt positions plus the decoded token fed back once.
  CHECK(r.outcome.corrected_positions.size() == 7);
  const auto j = to_json(r.outcome);
  CHECK(j["selected_layer"] == 1);
  CHECK(j["strategy"] == "fusion");
  CHECK(j["selected_tokens"].size() == 2);

  CHECK(run(Strategy::off, 0.1).outcome.corrected_positions.empty());
  CHECK(run(Strategy::selective_replacement, 0.1).outcome.corrected_positions == std::vector<std::size_t>{0, 1});

  CorrectionConfig fixed = with_strategy(Strategy::replacement);
  fixed.layer_policy = LayerPolicy::fixed(0);
  const auto rf = decode_with_correction(p, {}, fixed, 4);
  CHECK(rf.outcome.selected_layer == 0);
  CHECK(rf.tokens.front() == 2);  // block 0 output at the last position points at token 2
}

TEST_CASE("provider failures carry the step index") {
  fixtures::ScriptedProvider p(fixtures::flip_scenario_trace(2, 1, 1),
                               std::vector<std::vector<float>>(4, std::vector<float>{1, 0, 0, 0}),
                               fixtures::kScenarioEos);
  p.fail_at_step = 3;
  try {
    decode_with_correction(p, {}, CorrectionConfig{}, 10);
    FAIL("expected AdapterError");
  } catch (const AdapterError& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
  }
  CHECK_THROWS_AS(greedy_decode(p, {}, 10), AdapterError);
}
