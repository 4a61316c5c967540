#include "textground/evalbench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "textground/error.hpp"

namespace textground {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(Task task) { return task == Task::spotting ? "spotting" : "understanding"; }

std::string_view to_string(Category category) {
  switch (category) {
    case Category::business: return "business";
    case Category::industry: return "industry";
    case Category::transportation: return "transportation";
    case Category::public_facilities: return "public_facilities";
    case Category::daily_life: return "daily_life";
  }
  return "unknown";
}

Task parse_task(std::string_view text) {
  if (text == "spotting") return Task::spotting;
  if (text == "understanding") return Task::understanding;
  throw ValidationError("unknown task '" + std::string(text) + "'");
}

Category parse_category(std::string_view text) {
  for (auto c : kAllCategories) {
    if (to_string(c) == text) return c;
  }
  throw ValidationError("unknown category '" + std::string(text) + "'");
}

void validate_sample(const BenchmarkSample& s) {
  if (s.sample_id.empty()) throw ValidationError("sample_id must be non-empty");
  if (s.task == Task::spotting) {
    if (s.gt_words.empty()) throw ValidationError("spotting sample '" + s.sample_id + "' has no gt_words");
    return;
  }
  if (s.choices.size() < 2 || s.choices.size() > 4) {
    throw ValidationError("understanding sample '" + s.sample_id + "' must have 2-4 choices, found " +
                          std::to_string(s.choices.size()));
  }
  std::set<std::string> labels;
  for (const auto& c : s.choices) {
    const auto l = lower(c.label);
    if (l.size() != 1 || l[0] < 'a' || l[0] > 'd') {
      throw ValidationError("sample '" + s.sample_id + "': choice label '" + c.label + "' is not one of A-D");
    }
    if (!labels.insert(l).second) throw ValidationError("sample '" + s.sample_id + "': duplicate choice label");
  }
  if (s.answer_labels.empty()) throw ValidationError("understanding sample '" + s.sample_id + "' has no answer");
  for (const auto& a : s.answer_labels) {
    if (!labels.count(lower(a))) {
      throw ValidationError("sample '" + s.sample_id + "': answer label '" + a + "' is not a choice");
    }
  }
}

BenchmarkSample sample_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("sample must be a JSON object");
  BenchmarkSample s;
  try {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.image_ref = j.value("image_ref", std::string{});
    s.task = parse_task(j.at("task").get<std::string>());
    s.question = j.value("question", std::string{});
    s.category = parse_category(j.at("category").get<std::string>());
    s.gt_words = j.value("gt_words", std::vector<std::string>{});
    if (j.contains("boxes")) {
      for (const auto& box : j.at("boxes")) {
        if (!box.is_array() || box.size() != 4) throw ValidationError("each box must have four [x, y] vertices");
        Quad q;
        for (std::size_t i = 0; i < 4; ++i) {
          const auto& p = box.at(i);
          if (!p.is_array() || p.size() != 2) throw ValidationError("box vertices must be [x, y] pairs");
          q.pts[i] = {p.at(0).get<double>(), p.at(1).get<double>()};
        }
        s.boxes.push_back(q);
      }
    }
    if (j.contains("choices")) {
      for (const auto& c : j.at("choices")) {
        s.choices.push_back({c.at("label").get<std::string>(), c.at("text").get<std::string>()});
      }
    }
    s.answer_labels = j.value("answer_labels", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ValidationError(e.what());
  }
  validate_sample(s);
  return s;
}

json to_json(const BenchmarkSample& s) {
  json boxes = json::array();
  for (const auto& q : s.boxes) {
    json box = json::array();
    for (const auto& p : q.pts) box.push_back({p.x, p.y});
    boxes.push_back(box);
  }
  json j{{"sample_id", s.sample_id},   {"image_ref", s.image_ref},      {"boxes", boxes},
         {"gt_words", s.gt_words},     {"task", to_string(s.task)},     {"question", s.question},
         {"category", to_string(s.category)}};
  if (s.task == Task::understanding) {
    json choices = json::array();
    for (const auto& c : s.choices) choices.push_back({{"label", c.label}, {"text", c.text}});
    j["choices"] = choices;
    j["answer_labels"] = s.answer_labels;
  }
  return j;
}

std::vector<BenchmarkSample> parse_manifest(std::string_view text) {
  std::vector<BenchmarkSample> out;
  std::size_t line_no = 0, start = 0;
  std::set<std::string> ids;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      if (end == text.size()) break;
      continue;
    }
    try {
      auto sample = sample_from_json(json::parse(line));
      if (!ids.insert(sample.sample_id).second) throw ValidationError("duplicate sample_id '" + sample.sample_id + "'");
      out.push_back(std::move(sample));
    } catch (const json::exception& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (end == text.size()) break;
  }
  return out;
}

std::vector<BenchmarkSample> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

const json& manifest_schema() {
  static const json schema = json::parse(R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "BenchmarkSample",
  "type": "object",
  "required": ["sample_id", "task", "category"],
  "properties": {
    "sample_id": {"type": "string", "minLength": 1},
    "image_ref": {"type": "string"},
    "boxes": {
      "type": "array",
      "items": {
        "type": "array", "minItems": 4, "maxItems": 4,
        "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}
      }
    },
    "gt_words": {"type": "array", "items": {"type": "string"}},
    "task": {"enum": ["spotting", "understanding"]},
    "question": {"type": "string"},
    "choices": {
      "type": "array", "minItems": 2, "maxItems": 4,
      "items": {
        "type": "object", "required": ["label", "text"],
        "properties": {"label": {"type": "string", "pattern": "^[A-Da-d]$"}, "text": {"type": "string"}}
      }
    },
    "answer_labels": {"type": "array", "items": {"type": "string"}},
    "category": {"enum": ["business", "industry", "transportation", "public_facilities", "daily_life"]}
  },
  "allOf": [
    {"if": {"properties": {"task": {"const": "spotting"}}},
     "then": {"required": ["gt_words"], "properties": {"gt_words": {"minItems": 1}}}},
    {"if": {"properties": {"task": {"const": "understanding"}}},
     "then": {"required": ["choices", "answer_labels"], "properties": {"answer_labels": {"minItems": 1}}}}
  ]
})");
  return schema;
}

std::string normalize_word(std::string_view word) {
  std::size_t b = 0, e = word.size();
  auto strip = [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isspace(u) || std::ispunct(u);
  };
  while (b < e && strip(word[b])) ++b;
  while (e > b && strip(word[e - 1])) --e;
  return lower(word.substr(b, e - b));
}

SpottingScore score_from_counts(std::size_t matched, std::size_t n_pred, std::size_t n_gt) {
  SpottingScore s;
  s.matched = matched;
  s.n_pred = n_pred;
  s.n_gt = n_gt;
  if (n_pred == 0 && n_gt == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = n_pred ? static_cast<double>(matched) / static_cast<double>(n_pred) : 0.0;
  s.recall = n_gt ? static_cast<double>(matched) / static_cast<double>(n_gt) : 0.0;
  // Same as 2PR / (P + R), with a single rounding.
  s.f1 = static_cast<double>(2 * matched) / static_cast<double>(n_pred + n_gt);
  return s;
}

SpottingScore spotting_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gt_words) {
  std::map<std::string, std::size_t> pred_counts, gt_counts;
  std::size_t n_pred = 0, n_gt = 0;
  for (const auto& w : predicted) {
    if (auto n = normalize_word(w); !n.empty()) {
      ++pred_counts[n];
      ++n_pred;
    }
  }
  for (const auto& w : gt_words) {
    if (auto n = normalize_word(w); !n.empty()) {
      ++gt_counts[n];
      ++n_gt;
    }
  }
  std::size_t matched = 0;
  for (const auto& [word, count] : gt_counts) {
    if (auto it = pred_counts.find(word); it != pred_counts.end()) matched += std::min(count, it->second);
  }
  return score_from_counts(matched, n_pred, n_gt);
}

std::vector<std::string> extract_predicted_words(std::string_view answer) {
  std::vector<std::string> words;
  std::istringstream is{std::string(answer)};
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

std::optional<char> extract_choice_label(std::string_view answer) {
  for (std::size_t i = 0; i < answer.size(); ++i) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(answer[i])));
    if (c < 'A' || c > 'D') continue;
    const bool left_ok = i == 0 || !is_alnum(answer[i - 1]);
    const bool right_ok = i + 1 == answer.size() || !is_alnum(answer[i + 1]);
    if (left_ok && right_ok) return c;
  }
  return std::nullopt;
}

UnderstandingScore understanding_score(std::optional<std::string_view> predicted_label, const BenchmarkSample& sample) {
  if (sample.task != Task::understanding) throw ValidationError("understanding_score: sample is not multiple-choice");
  UnderstandingScore out;
  if (!predicted_label) {
    out.flagged = true;
    return out;
  }
  const auto pred = normalize_word(*predicted_label);
  const bool offered = std::any_of(sample.choices.begin(), sample.choices.end(),
                                   [&](const Choice& c) { return lower(c.label) == pred; });
  if (!offered) {
    out.flagged = true;
    return out;
  }
  out.correct = std::any_of(sample.answer_labels.begin(), sample.answer_labels.end(),
                            [&](const std::string& a) { return lower(a) == pred; });
  return out;
}

std::string prompt_text(const BenchmarkSample& sample) {
  std::string text = sample.question;
  if (sample.task == Task::understanding) {
    for (const auto& c : sample.choices) text += " " + c.label + ". " + c.text;
  }
  return text;
}

ImageGeometry image_geometry(std::string_view image_ref, const ImageGeometry& fallback) {
  constexpr std::string_view prefix = "synthetic:";
  if (!image_ref.starts_with(prefix)) return fallback;
  auto spec = image_ref.substr(prefix.size());
  auto parse = [&](std::string_view t) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v == 0) {
      throw ValidationError("bad synthetic image spec '" + std::string(image_ref) + "'");
    }
    return v;
  };
  ImageGeometry g = fallback;
  if (auto at = spec.find('@'); at != std::string_view::npos) {
    g.patch_size = parse(spec.substr(at + 1));
    spec = spec.substr(0, at);
  }
  const auto x = spec.find('x');
  if (x == std::string_view::npos) throw ValidationError("bad synthetic image spec '" + std::string(image_ref) + "'");
  g.grid_w = parse(spec.substr(0, x));
  g.grid_h = parse(spec.substr(x + 1));
  return g;
}

SampleResult evaluate_sample(TraceProvider& provider, const BenchmarkSample& sample, const CorrectionConfig& config,
                             const EvalOptions& options) {
  SampleResult r;
  r.sample_id = sample.sample_id;
  r.task = sample.task;
  r.category = sample.category;
  try {
    PromptInput input;
    input.image_ref = sample.image_ref;
    input.image = image_geometry(sample.image_ref, options.image);
    input.query_tokens = provider.tokenize(prompt_text(sample));

    CorrectionConfig cfg = config;
    if (cfg.layer_policy.kind == LayerPolicy::Kind::random_in_range) {
      cfg.layer_policy.seed = cfg.layer_policy.seed ^ fnv1a(sample.sample_id);
    }
    auto decoded = decode_with_correction(provider, input, cfg, options.max_new_tokens);
    r.tokens = decoded.tokens;
    r.selected_layer = decoded.outcome.selected_layer;
    r.answer = provider.detokenize(decoded.tokens);
  } catch (const std::exception& e) {
    r.errored = true;
    r.error = e.what();
    return r;
  }

  if (sample.task == Task::spotting) {
    r.spotting = spotting_f1(extract_predicted_words(r.answer), sample.gt_words);
  } else {
    const auto label = extract_choice_label(r.answer);
    std::optional<std::string_view> view;
    std::string label_text;
    if (label) {
      label_text.assign(1, *label);
      view = label_text;
    }
    r.understanding = understanding_score(view, sample);
  }
  return r;
}

double TaskScores::average_f1() const {
  std::vector<double> parts;
  if (spotting_f1) parts.push_back(*spotting_f1);
  if (understanding_f1) parts.push_back(*understanding_f1);
  return mean(parts);
}

namespace {

TaskScores fold(const std::vector<const SampleResult*>& results) {
  TaskScores t;
  std::size_t matched = 0, n_pred = 0, n_gt = 0, correct = 0;
  std::vector<double> per_sample_f1;
  for (const auto* r : results) {
    if (r->errored) continue;
    if (r->task == Task::spotting) {
      ++t.n_spotting;
      matched += r->spotting.matched;
      n_pred += r->spotting.n_pred;
      n_gt += r->spotting.n_gt;
      per_sample_f1.push_back(r->spotting.f1);
    } else {
      ++t.n_understanding;
      correct += r->understanding.correct ? 1 : 0;
    }
  }
  if (t.n_spotting) {
    t.spotting_f1 = score_from_counts(matched, n_pred, n_gt).f1;
    t.spotting_macro_f1 = mean(per_sample_f1);
  }
  if (t.n_understanding) t.understanding_f1 = static_cast<double>(correct) / static_cast<double>(t.n_understanding);
  return t;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json scores_json(const TaskScores& t) {
  return {{"spotting_f1", optional_json(t.spotting_f1)},
          {"spotting_macro_f1", optional_json(t.spotting_macro_f1)},
          {"understanding_f1", optional_json(t.understanding_f1)},
          {"n_spotting", t.n_spotting},
          {"n_understanding", t.n_understanding},
          {"average_f1", t.average_f1()}};
}

// Shortest text that round-trips, so 0.1 prints as 0.1.
std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void csv_value(std::ostream& os, const std::optional<double>& v) {
  if (v) os << *v;
}

}  // namespace

EvalReport aggregate_results(std::vector<SampleResult> results, std::string digest) {
  std::sort(results.begin(), results.end(),
            [](const SampleResult& a, const SampleResult& b) { return a.sample_id < b.sample_id; });
  EvalReport report;
  report.config_digest = std::move(digest);
  report.n_samples = results.size();
  std::vector<const SampleResult*> all;
  for (const auto& r : results) {
    all.push_back(&r);
    if (r.errored) ++report.n_errored;
    if (!r.errored && r.task == Task::understanding && r.understanding.flagged) ++report.n_flagged;
  }
  report.per_task = fold(all);
  report.average_f1 = report.per_task.average_f1();
  for (auto c : kAllCategories) {
    std::vector<const SampleResult*> subset;
    for (const auto* r : all) {
      if (r->category == c) subset.push_back(r);
    }
    if (!subset.empty()) report.per_category.emplace_back(c, fold(subset));
  }
  report.samples = std::move(results);
  return report;
}

std::string config_digest(const CorrectionConfig& config, const ProviderMetadata& meta, const EvalOptions& options) {
  json j = to_json(config);
  j["model_id"] = meta.model_id;
  j["max_new_tokens"] = options.max_new_tokens;
  j["default_image"] = {options.image.grid_w, options.image.grid_h, options.image.patch_size};
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return os.str();
}

EvalReport run_benchmark(TraceProvider& provider, const std::vector<BenchmarkSample>& samples,
                         const CorrectionConfig& config, const EvalOptions& options) {
  config.validate();
  std::vector<SampleResult> results(samples.size());

  std::vector<std::unique_ptr<TraceProvider>> workers;
  const std::size_t wanted = std::min(options.jobs, samples.size());
  for (std::size_t i = 1; i < wanted; ++i) {
    auto c = provider.clone();
    if (!c) {
      workers.clear();
      break;
    }
    workers.push_back(std::move(c));
  }

  if (workers.empty()) {
    for (std::size_t i = 0; i < samples.size(); ++i) results[i] = evaluate_sample(provider, samples[i], config, options);
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&](TraceProvider& p) {
      for (std::size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
        results[i] = evaluate_sample(p, samples[i], config, options);
      }
    };
    std::vector<std::jthread> threads;
    for (auto& w : workers) threads.emplace_back([&work, &w] { work(*w); });
    work(provider);
  }
  return aggregate_results(std::move(results), config_digest(config, provider.metadata(), options));
}

json to_json(const EvalReport& report) {
  json per_category = json::object();
  for (const auto& [c, scores] : report.per_category) per_category[std::string(to_string(c))] = scores_json(scores);
  json samples = json::array();
  for (const auto& r : report.samples) {
    json s{{"sample_id", r.sample_id}, {"task", to_string(r.task)}, {"category", to_string(r.category)},
           {"errored", r.errored}};
    if (r.errored) {
      s["error"] = r.error;
    } else {
      s["answer"] = r.answer;
      s["selected_layer"] = r.selected_layer;
      if (r.task == Task::spotting) {
        s["precision"] = r.spotting.precision;
        s["recall"] = r.spotting.recall;
        s["f1"] = r.spotting.f1;
      } else {
        s["correct"] = r.understanding.correct;
        s["flagged"] = r.understanding.flagged;
      }
    }
    samples.push_back(s);
  }
  return {{"per_task", scores_json(report.per_task)}, {"average_f1", report.average_f1},
          {"per_category", per_category},             {"n_samples", report.n_samples},
          {"n_errored", report.n_errored},            {"n_flagged", report.n_flagged},
          {"config_digest", report.config_digest},    {"samples", samples}};
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "task,category,n,score\n";
  auto rows = [&](const std::string& category, const TaskScores& t) {
    if (t.spotting_f1) os << "spotting," << category << ',' << t.n_spotting << ',' << *t.spotting_f1 << '\n';
    if (t.spotting_macro_f1) {
      os << "spotting_macro," << category << ',' << t.n_spotting << ',' << *t.spotting_macro_f1 << '\n';
    }
    if (t.understanding_f1) {
      os << "understanding," << category << ',' << t.n_understanding << ',' << *t.understanding_f1 << '\n';
    }
    os << "average," << category << ',' << t.n_spotting + t.n_understanding << ',' << t.average_f1() << '\n';
  };
  rows("all", report.per_task);
  for (const auto& [c, t] : report.per_category) rows(std::string(to_string(c)), t);
  return os.str();
}

std::vector<WeightSweepRow> sweep_fusion_weight(TraceProvider& provider, const std::vector<BenchmarkSample>& samples,
                                                const CorrectionConfig& base, const std::vector<double>& weights,
                                                const EvalOptions& options) {
  if (weights.empty()) throw ValidationError("sweep: weight list is empty");
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("sweep: weights must lie in [0, 1]");
  }
  std::vector<WeightSweepRow> rows;
  for (double w : weights) {
    CorrectionConfig cfg = base;
    cfg.strategy = Strategy::fusion;
    cfg.fusion_weight = w;
    rows.push_back({w, run_benchmark(provider, samples, cfg, options)});
  }
  return rows;
}

std::string weight_sweep_csv(const std::vector<WeightSweepRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "weight,n_samples,spotting_f1,understanding_f1,average_f1\n";
  for (const auto& r : rows) {
    os << shortest(r.weight) << ',' << r.report.n_samples << ',';
    csv_value(os, r.report.per_task.spotting_f1);
    os << ',';
    csv_value(os, r.report.per_task.understanding_f1);
    os << ',' << r.report.average_f1 << '\n';
  }
  return os.str();
}

std::vector<LayerRangeSpec> parse_layer_ranges(std::string_view text) {
  std::vector<LayerRangeSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const auto item = text.substr(start, end - start);
    start = end + 1;
    if (item == "random") {
      out.push_back({true, 0, 0});
    } else {
      const auto dash = item.find('-');
      auto num = [&](std::string_view t) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
          throw ValidationError("bad layer range '" + std::string(item) + "'");
        }
        return v;
      };
      if (dash == std::string_view::npos) throw ValidationError("bad layer range '" + std::string(item) + "'");
      LayerRangeSpec spec{false, num(item.substr(0, dash)), num(item.substr(dash + 1))};
      if (spec.lo >= spec.hi) throw ValidationError("empty layer range '" + std::string(item) + "'");
      out.push_back(spec);
    }
    if (end == text.size()) break;
  }
  if (out.empty()) throw ValidationError("no layer ranges given");
  return out;
}

std::vector<LayerRangeRow> sweep_layer_ranges(TraceProvider& provider, const std::vector<BenchmarkSample>& samples,
                                              const CorrectionConfig& base, const std::vector<LayerRangeSpec>& ranges,
                                              std::size_t n_layers, const EvalOptions& options) {
  if (ranges.empty()) throw ValidationError("sweep: layer range list is empty");
  std::vector<LayerRangeRow> rows;
  for (const auto& spec : ranges) {
    LayerRangeRow row;
    std::vector<double> avg, spot, und;
    auto collect = [&](const EvalReport& r) {
      avg.push_back(r.average_f1);
      if (r.per_task.spotting_f1) spot.push_back(*r.per_task.spotting_f1);
      if (r.per_task.understanding_f1) und.push_back(*r.per_task.understanding_f1);
    };
    if (spec.random) {
      row.label = "random";
      CorrectionConfig cfg = base;
      cfg.layer_policy = LayerPolicy::random_in_range(0, n_layers, base.layer_policy.seed);
      row.random_report = run_benchmark(provider, samples, cfg, options);
      collect(row.random_report);
    } else {
      row.label = std::to_string(spec.lo) + "-" + std::to_string(spec.hi);
      const std::size_t hi = std::min(spec.hi, n_layers);
      if (spec.lo >= hi) throw ValidationError("layer range " + row.label + " is outside the model depth");
      for (std::size_t l = spec.lo; l < hi; ++l) {
        CorrectionConfig cfg = base;
        cfg.layer_policy = LayerPolicy::fixed(l);
        row.per_layer.emplace_back(l, run_benchmark(provider, samples, cfg, options));
        collect(row.per_layer.back().second);
      }
    }
    row.mean_average_f1 = mean(avg);
    row.mean_spotting_f1 = mean(spot);
    row.mean_understanding_f1 = mean(und);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string layer_sweep_csv(const std::vector<LayerRangeRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "range,layer,spotting_f1,understanding_f1,average_f1\n";
  for (const auto& row : rows) {
    for (const auto& [layer, report] : row.per_layer) {
      os << row.label << ',' << layer << ',';
      csv_value(os, report.per_task.spotting_f1);
      os << ',';
      csv_value(os, report.per_task.understanding_f1);
      os << ',' << report.average_f1 << '\n';
    }
    os << row.label << ",mean," << row.mean_spotting_f1 << ',' << row.mean_understanding_f1 << ','
       << row.mean_average_f1 << '\n';
  }
  return os.str();
}

}  // namespace textground
