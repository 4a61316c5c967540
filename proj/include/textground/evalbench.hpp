#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textground/geometry.hpp"
#include "textground/glc.hpp"
#include "textground/provider.hpp"

namespace textground {

enum class Task { spotting, understanding };
enum class Category { business, industry, transportation, public_facilities, daily_life };

inline constexpr Category kAllCategories[] = {Category::business, Category::industry, Category::transportation,
                                              Category::public_facilities, Category::daily_life};

std::string_view to_string(Task task);
std::string_view to_string(Category category);
Task parse_task(std::string_view text);
Category parse_category(std::string_view text);

struct Choice {
  std::string label;
  std::string text;
};

struct BenchmarkSample {
  std::string sample_id;
  std::string image_ref;
  std::vector<Quad> boxes;
  std::vector<std::string> gt_words;
  Task task = Task::spotting;
  std::string question;
  std::vector<Choice> choices;
  std::vector<std::string> answer_labels;
  Category category = Category::daily_life;
};

// Throws ValidationError when a sample breaks an invariant: understanding
// samples need 2-4 choices with distinct single-letter A-D labels and at least
// one answer label among them; spotting samples need ground-truth words.
void validate_sample(const BenchmarkSample& sample);

BenchmarkSample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchmarkSample& sample);

// JSONL, one sample per line; blank lines are skipped. Errors cite the line.
std::vector<BenchmarkSample> load_manifest(const std::filesystem::path& path);
std::vector<BenchmarkSample> parse_manifest(std::string_view text);

// JSON schema describing one manifest line.
const nlohmann::json& manifest_schema();

// Lowercased, whitespace-trimmed, boundary punctuation stripped. Empty when
// nothing is left.
std::string normalize_word(std::string_view word);

struct SpottingScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t n_pred = 0;
  std::size_t n_gt = 0;
};

// Precision/recall/F1 from match counts; (1, 1, 1) when both sides are empty.
SpottingScore score_from_counts(std::size_t matched, std::size_t n_pred, std::size_t n_gt);

// Case-insensitive exact word matching with multiset semantics: each
// ground-truth word consumes at most one prediction.
SpottingScore spotting_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gt_words);

// Whitespace tokenization of a free-form answer.
std::vector<std::string> extract_predicted_words(std::string_view answer);

// First A-D letter (either case) not adjacent to another letter or digit.
std::optional<char> extract_choice_label(std::string_view answer);

struct UnderstandingScore {
  bool correct = false;
  bool flagged = false;  // predicted label missing or not among the sample's choices
};

UnderstandingScore understanding_score(std::optional<std::string_view> predicted_label, const BenchmarkSample& sample);

// Prompt text for a sample: the question, followed by "A. text B. text ..."
// for understanding samples.
std::string prompt_text(const BenchmarkSample& sample);

// Image geometry for `image_ref`: "synthetic:<w>x<h>[@<patch>]" overrides the
// fallback.
ImageGeometry image_geometry(std::string_view image_ref, const ImageGeometry& fallback);

struct EvalOptions {
  std::size_t max_new_tokens = 16;
  std::size_t jobs = 1;
  ImageGeometry image;
};

struct SampleResult {
  std::string sample_id;
  Task task = Task::spotting;
  Category category = Category::daily_life;
  bool errored = false;
  std::string error;
  std::string answer;
  std::vector<TokenId> tokens;
  std::size_t selected_layer = 0;
  SpottingScore spotting;
  UnderstandingScore understanding;
};

struct TaskScores {
  std::optional<double> spotting_f1;        // micro: pooled match counts
  std::optional<double> spotting_macro_f1;  // mean of per-sample F1
  std::optional<double> understanding_f1;   // fraction correct
  std::size_t n_spotting = 0;
  std::size_t n_understanding = 0;

  // Mean of the subtask scores that have samples; 0 when neither does.
  double average_f1() const;
};

struct EvalReport {
  TaskScores per_task;
  double average_f1 = 0.0;
  std::vector<std::pair<Category, TaskScores>> per_category;
  std::size_t n_samples = 0;
  std::size_t n_errored = 0;
  std::size_t n_flagged = 0;
  std::string config_digest;
  std::vector<SampleResult> samples;  // sorted by sample_id
};

// Folds per-sample results into a report. Results are sorted by sample_id
// first, so the outcome does not depend on completion order.
EvalReport aggregate_results(std::vector<SampleResult> results, std::string config_digest);

SampleResult evaluate_sample(TraceProvider& provider, const BenchmarkSample& sample, const CorrectionConfig& config,
                             const EvalOptions& options);

// Runs decode_with_correction on every sample. With jobs > 1 and a cloneable
// provider, samples are spread over worker clones; otherwise they run in
// order. A random_in_range layer policy draws a fresh layer per sample from a
// seed derived from the policy seed and the sample id.
EvalReport run_benchmark(TraceProvider& provider, const std::vector<BenchmarkSample>& samples,
                         const CorrectionConfig& config, const EvalOptions& options = {});

std::string config_digest(const CorrectionConfig& config, const ProviderMetadata& meta, const EvalOptions& options);

nlohmann::json to_json(const EvalReport& report);
// CSV columns: task,category,n,score
std::string report_csv(const EvalReport& report);

struct WeightSweepRow {
  double weight = 0.0;
  EvalReport report;
};

// One benchmark run per fusion weight, with the strategy forced to fusion.
std::vector<WeightSweepRow> sweep_fusion_weight(TraceProvider& provider, const std::vector<BenchmarkSample>& samples,
                                                const CorrectionConfig& base, const std::vector<double>& weights,
                                                const EvalOptions& options = {});

std::string weight_sweep_csv(const std::vector<WeightSweepRow>& rows);

struct LayerRangeRow {
  std::string label;  // "<lo>-<hi>" or "random"
  std::vector<std::pair<std::size_t, EvalReport>> per_layer;
  EvalReport random_report;  // filled for the "random" row
  double mean_average_f1 = 0.0;
  double mean_spotting_f1 = 0.0;
  double mean_understanding_f1 = 0.0;
};

struct LayerRangeSpec {
  bool random = false;
  std::size_t lo = 0;
  std::size_t hi = 0;
};

// Parses "0-10,10-20,random".
std::vector<LayerRangeSpec> parse_layer_ranges(std::string_view text);

// For each range, one run per layer with a fixed layer policy, averaged over
// the layers of the range (clipped to model depth). A "random" entry runs once
// with random_in_range over the whole depth.
std::vector<LayerRangeRow> sweep_layer_ranges(TraceProvider& provider, const std::vector<BenchmarkSample>& samples,
                                              const CorrectionConfig& base, const std::vector<LayerRangeSpec>& ranges,
                                              std::size_t n_layers, const EvalOptions& options = {});

std::string layer_sweep_csv(const std::vector<LayerRangeRow>& rows);

}  // namespace textground
