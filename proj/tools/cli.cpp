#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "textground/adapter.hpp"
#include "textground/error.hpp"
#include "textground/evalbench.hpp"
#include "textground/geometry.hpp"
#include "textground/glc.hpp"
#include "textground/layer_analysis.hpp"
#include "textground/toy_model.hpp"
#include "textground/toy_tokenizer.hpp"
#include "textground/trace_archive.hpp"
#include "textground/zoomtext.hpp"

namespace textground::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads a JSON object of option values. Top-level keys apply to the
// subcommand being run; a nested object keyed by a subcommand name applies
// only to that subcommand. Values given on the command line win.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");

    std::vector<std::string> active;
    for (const auto* sub : app_->get_subcommands()) active.push_back(sub->get_name());

    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        if (std::find(active.begin(), active.end(), key) == active.end()) continue;
        for (const auto& [k2, v2] : value.items()) items.push_back(item({key}, k2, v2));
      } else {
        items.push_back(item(active, key, value));
      }
    }
    return items;
  }

 private:
  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name, const json& value) {
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = name;
    auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) it.inputs.push_back(text(v));
    } else {
      it.inputs.push_back(text(value));
    }
    return it;
  }

  const CLI::App* app_;
};

// Everything a subcommand may be configured with. Each subcommand binds the
// subset it uses.
struct RunConfig {
  // model
  std::string adapter = "toy";
  std::uint64_t seed = 7;
  std::size_t layers = 4;
  std::size_t heads = 2;
  std::size_t d_model = 32;
  std::size_t vocab = 64;
  std::string grid = "4x4";
  std::size_t patch = 16;
  // prompt
  std::string prompt = "what does the sign say?";
  std::string prompt_tokens;
  std::string continuation;
  std::size_t generate = 0;
  std::size_t max_new = 16;
  // correction
  std::string strategy = std::string(to_string(Strategy::fusion));
  double w = kDefaultFusionWeight;
  std::size_t k = kDefaultTopK;
  double epsilon = kDefaultEpsilon;
  double keep_fraction = kDefaultKeepFraction;
  std::string layer_policy = "grounded";
  // paths
  std::string out;
  std::vector<std::string> traces;
  std::vector<std::string> generated;
  std::vector<std::string> gt;
  std::vector<std::string> boxes;
  std::string manifest;
  // run control
  bool heatmap = false;
  std::size_t jobs = 1;
  std::string format = "both";
  std::string weights;
  std::string layer_ranges;
};

void add_model_flags(CLI::App* cmd, RunConfig& c, bool with_adapter) {
  if (with_adapter) {
    cmd->add_option("--adapter", c.adapter, "Model adapter: 'toy' or a plugin name found on $" +
                                                std::string(kAdapterPathEnv))
        ->capture_default_str();
  }
  cmd->add_option("--seed", c.seed, "Seed for the toy model weights")->capture_default_str();
  cmd->add_option("--layers", c.layers, "Toy model depth")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--heads", c.heads, "Toy model attention heads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--d-model", c.d_model, "Toy model width")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--vocab", c.vocab, "Toy model vocabulary size")->capture_default_str();
}

void add_image_flags(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--grid", c.grid, "Image token grid, <w>x<h>")->capture_default_str();
  cmd->add_option("--patch", c.patch, "Patch size in pixels")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_prompt_flags(CLI::App* cmd, RunConfig& c) {
  auto* text = cmd->add_option("--prompt", c.prompt, "Query text")->capture_default_str();
  auto* ids = cmd->add_option("--prompt-tokens", c.prompt_tokens, "Query as comma-separated token ids");
  text->excludes(ids);
}

void add_zoom_flags(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--k", c.k, "Glimpse candidate count")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--epsilon", c.epsilon, "Refocus denominator stabilizer")->capture_default_str();
  cmd->add_option("--keep-fraction", c.keep_fraction, "Share of glimpse candidates kept by refocus")
      ->capture_default_str();
}

void add_correction_flags(CLI::App* cmd, RunConfig& c) {
  add_zoom_flags(cmd, c);
  cmd->add_option("--strategy", c.strategy, "replacement | fusion | selective_replacement | off")
      ->capture_default_str();
  cmd->add_option("--w", c.w, "Fusion weight on the grounded layer")->capture_default_str();
  cmd->add_option("--layer-policy", c.layer_policy, "grounded | fixed:<l> | random:<lo>-<hi>[:<seed>]")
      ->capture_default_str();
  cmd->add_option("--max-new", c.max_new, "Maximum generated tokens")->capture_default_str();
}

ToyArch toy_arch(const RunConfig& c) {
  ToyArch arch{c.layers, c.heads, c.d_model, c.vocab};
  if (arch.d_model % arch.n_heads != 0) throw UsageError("--d-model must be divisible by --heads");
  if (arch.vocab < ToyTokenizer::kMinVocab) {
    throw UsageError("--vocab must be at least " + std::to_string(ToyTokenizer::kMinVocab));
  }
  return arch;
}

ImageGeometry image_of(const RunConfig& c) {
  const auto x = c.grid.find('x');
  auto num = [&](std::string_view t) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v == 0) throw UsageError("--grid must look like 4x4");
    return v;
  };
  if (x == std::string::npos) throw UsageError("--grid must look like 4x4");
  return {num(std::string_view(c.grid).substr(0, x)), num(std::string_view(c.grid).substr(x + 1)), c.patch};
}

std::string image_ref_of(const ImageGeometry& g) {
  return "synthetic:" + std::to_string(g.grid_w) + "x" + std::to_string(g.grid_h) + "@" +
         std::to_string(g.patch_size);
}

CorrectionConfig correction_of(const RunConfig& c) {
  CorrectionConfig cfg;
  try {
    cfg.strategy = parse_strategy(c.strategy);
    cfg.fusion_weight = c.w;
    cfg.top_k = c.k;
    cfg.epsilon = c.epsilon;
    cfg.keep_fraction = c.keep_fraction;
    cfg.layer_policy = LayerPolicy::parse(c.layer_policy);
    cfg.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

// "text:<words>" is encoded with the toy tokenizer, "@<file>" reads the spec
// from a file, anything else is a comma- or space-separated id list.
std::vector<TokenId> parse_tokens(const std::string& spec) {
  if (spec.starts_with("@")) {
    auto text = read_file(spec.substr(1));
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return parse_tokens(text);
  }
  if (spec.starts_with("text:")) return ToyTokenizer::encode(spec.substr(5));
  std::vector<TokenId> ids;
  std::string field;
  std::istringstream is(spec);
  while (std::getline(is, field, ',')) {
    std::istringstream fs(field);
    std::string item;
    while (fs >> item) {
      TokenId v = 0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size() || v < 0) {
        throw UsageError("bad token id '" + item + "'");
      }
      ids.push_back(v);
    }
  }
  return ids;
}

std::vector<TokenId> prompt_tokens_of(const RunConfig& c, const TraceProvider& provider) {
  if (!c.prompt_tokens.empty()) return parse_tokens(c.prompt_tokens);
  return provider.tokenize(c.prompt);
}

// JSON list of boxes, each four [x, y] vertices or [x0, y0, x1, y1].
std::vector<Quad> load_boxes(const fs::path& path) {
  std::vector<Quad> boxes;
  try {
    const auto j = json::parse(read_file(path));
    for (const auto& b : j) {
      if (b.size() == 4 && b.at(0).is_number()) {
        boxes.push_back(Quad::axis_aligned(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                           b[3].get<double>()));
        continue;
      }
      if (b.size() != 4) throw ValidationError(path.string() + ": each box needs four vertices");
      Quad q;
      for (std::size_t i = 0; i < 4; ++i) q.pts[i] = {b[i].at(0).get<double>(), b[i].at(1).get<double>()};
      boxes.push_back(q);
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return boxes;
}

void require_exists(const std::string& path, const char* flag) {
  if (!fs::exists(path)) throw UsageError(std::string(flag) + ": " + path + " does not exist");
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  if (fs::exists(dir) && !fs::is_directory(dir)) throw UsageError("--out: " + out + " is not a directory");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + out + ": " + ec.message());
  return dir;
}

std::string join_ids(const std::vector<TokenId>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i]);
  return s;
}

int cmd_trace(const RunConfig& c, std::ostream& out) {
  const auto arch = toy_arch(c);
  const auto image = image_of(c);
  if (c.generate > 0 && !c.continuation.empty()) throw UsageError("--generate and --continuation are exclusive");

  ToyModel model(arch, c.seed);
  PromptInput input;
  input.image = image;
  input.image_ref = image_ref_of(image);
  input.query_tokens = prompt_tokens_of(c, model);
  if (!c.continuation.empty()) input.continuation = parse_tokens(c.continuation);
  if (c.generate > 0) input.continuation = greedy_decode(model, input, c.generate);

  const auto trace = model.prefill(input);
  write_trace(trace, c.out);
  out << "model: " << trace.model_id << "\n"
      << "tokens: " << trace.seq_len() << " (" << trace.layout.n_image_tokens << " image, "
      << trace.layout.n_query_tokens << " query, " << input.continuation.size() << " continuation)\n";
  if (!input.continuation.empty()) {
    out << "continuation: " << join_ids(input.continuation) << " \"" << model.detokenize(input.continuation)
        << "\"\n";
  }
  out << "wrote " << c.out << "\n";
  return kExitOk;
}

int cmd_analyze(const RunConfig& c, std::ostream& out) {
  if (c.traces.empty()) throw UsageError("analyze: at least one --trace is required");
  if (c.generated.size() != c.traces.size() || c.gt.size() != c.traces.size()) {
    throw UsageError("analyze: give one --generated and one --gt per --trace");
  }
  if (!c.boxes.empty() && c.boxes.size() != c.traces.size()) {
    throw UsageError("analyze: give one --boxes per --trace or none");
  }
  for (const auto& t : c.traces) require_exists(t, "--trace");
  for (const auto& b : c.boxes) require_exists(b, "--boxes");
  ZoomTextConfig zoom{c.k, c.epsilon, c.keep_fraction};
  if (!(zoom.epsilon > 0.0) || !(zoom.keep_fraction > 0.0 && zoom.keep_fraction <= 1.0)) {
    throw UsageError("--epsilon must be positive and --keep-fraction in (0, 1]");
  }
  std::vector<std::pair<std::vector<TokenId>, std::vector<TokenId>>> answers;
  for (std::size_t i = 0; i < c.traces.size(); ++i) answers.emplace_back(parse_tokens(c.generated[i]), parse_tokens(c.gt[i]));
  const auto dir = prepare_out(c.out);

  std::vector<SampleProfiles> profiled;
  json loci = json::array();
  std::set<std::string> used_ids;
  for (std::size_t i = 0; i < c.traces.size(); ++i) {
    const auto trace = read_trace(c.traces[i]);
    std::string id = fs::path(c.traces[i]).lexically_normal().filename().string();
    if (id.empty()) id = fs::path(c.traces[i]).lexically_normal().parent_path().filename().string();
    if (id.empty() || !used_ids.insert(id).second) id = "sample" + std::to_string(i);
    used_ids.insert(id);

    const auto zt = zoom_text(trace, zoom);
    const TokenSelection text_tokens =
        c.boxes.empty() ? zt.selection : boxes_to_tokens(load_boxes(c.boxes[i]), trace.layout);

    const auto locus = extract_hallucinated_token(answers[i].first, answers[i].second);
    if (locus) {
      SampleProfiles sp{id, layer_profiles(trace, *locus, text_tokens)};
      write_file(dir / (id + ".profiles.csv"), profiles_csv(sp.layers));
      profiled.push_back(std::move(sp));
      loci.push_back({{"sample_id", id},
                      {"position", locus->position},
                      {"hallucinated_token_id", locus->hallucinated_token_id},
                      {"ground_truth_token_id", locus->ground_truth_token_id},
                      {"trace_position", locus_trace_position(trace, *locus)}});
    } else {
      out << id << ": no hallucination locus\n";
      loci.push_back({{"sample_id", id}, {"position", nullptr}});
    }

    if (trace.n_layers() >= 2) {
      std::ostringstream cv;
      cv << std::setprecision(17) << "token_index,row,col,cv,text_region\n";
      const auto& img = trace.layout.image_token_range;
      for (std::size_t t = img.begin; t < img.end; ++t) {
        const std::size_t local = t - img.begin;
        cv << t << ',' << local / trace.layout.grid_w << ',' << local % trace.layout.grid_w << ','
           << attention_cv(trace, t) << ',' << (text_tokens.contains(t) ? 1 : 0) << '\n';
      }
      write_file(dir / (id + ".cv.csv"), cv.str());
    }
    if (c.heatmap) {
      write_file(dir / (id + ".zoomtext.csv"), zoomtext_csv(trace.layout, zt));
      write_heatmap_png(dir / (id + ".heatmap.png"), trace.layout, zt);
    }
  }

  json report;
  if (profiled.empty()) {
    report = {{"note", "no hallucination locus"}, {"per_sample", json::array()}, {"aggregate_rho", nullptr},
              {"n_defined", 0}};
    out << "no hallucination locus in any sample\n";
  } else {
    try {
      report = to_json(correlation_report(profiled));
      out << "aggregate spearman rho: " << report["aggregate_rho"].dump() << " over " << report["n_defined"]
          << " sample(s)\n";
    } catch (const ValidationError& e) {
      report = {{"note", e.what()}, {"per_sample", json::array()}, {"aggregate_rho", nullptr}, {"n_defined", 0}};
      out << "correlation undefined: " << e.what() << "\n";
    }
  }
  report["loci"] = loci;
  write_file(dir / "correlation.json", report.dump(2) + "\n");
  out << "wrote " << dir.string() << "\n";
  return kExitOk;
}

std::unique_ptr<TraceProvider> adapter_of(const RunConfig& c) {
  AdapterOptions opts;
  opts.seed = c.seed;
  opts.arch = toy_arch(c);
  return load_adapter(c.adapter, opts);
}

int cmd_mitigate(const RunConfig& c, std::ostream& out) {
  const auto config = correction_of(c);
  const auto image = image_of(c);
  if (c.heatmap && c.out.empty()) throw UsageError("--heatmap needs --out");
  std::optional<fs::path> dir;
  if (!c.out.empty()) dir = prepare_out(c.out);

  auto provider = adapter_of(c);
  PromptInput input;
  input.image = image;
  input.image_ref = image_ref_of(image);
  input.query_tokens = prompt_tokens_of(c, *provider);

  const auto result = decode_with_correction(*provider, input, config, c.max_new);
  const json doc{{"model_id", provider->metadata().model_id},
                 {"answer", provider->detokenize(result.tokens)},
                 {"tokens", result.tokens},
                 {"config", to_json(config)},
                 {"outcome", to_json(result.outcome)}};
  out << doc.dump(2) << "\n";
  if (dir) {
    write_file(*dir / "mitigate.json", doc.dump(2) + "\n");
    if (c.heatmap) {
      const auto trace = provider->prefill(input);
      const auto zt = zoom_text(trace, config.zoom());
      write_file(*dir / "zoomtext.csv", zoomtext_csv(trace.layout, zt));
      write_heatmap_png(*dir / "heatmap.png", trace.layout, zt);
    }
  }
  return kExitOk;
}

std::vector<BenchmarkSample> manifest_of(const RunConfig& c) {
  require_exists(c.manifest, "--manifest");
  auto samples = load_manifest(c.manifest);
  if (samples.empty()) throw ValidationError("manifest " + c.manifest + " has no samples");
  return samples;
}

EvalOptions eval_options(const RunConfig& c) {
  EvalOptions o;
  o.max_new_tokens = c.max_new;
  o.jobs = c.jobs;
  o.image = image_of(c);
  return o;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const auto config = correction_of(c);
  const auto options = eval_options(c);
  const auto samples = manifest_of(c);
  const auto dir = prepare_out(c.out);
  auto provider = adapter_of(c);

  const auto report = run_benchmark(*provider, samples, config, options);
  if (c.format == "json" || c.format == "both") write_file(dir / "report.json", to_json(report).dump(2) + "\n");
  if (c.format == "csv" || c.format == "both") write_file(dir / "report.csv", report_csv(report));
  auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("n/a"); };
  out << "samples: " << report.n_samples << " (errored " << report.n_errored << ", flagged " << report.n_flagged
      << ")\n"
      << "spotting_f1: " << show(report.per_task.spotting_f1) << "\n"
      << "understanding_f1: " << show(report.per_task.understanding_f1) << "\n"
      << "average_f1: " << report.average_f1 << "\n"
      << "wrote " << dir.string() << "\n";
  return kExitOk;
}

std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> weights;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      std::size_t used = 0;
      weights.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad weight '" + item + "'");
    }
  }
  if (weights.empty()) throw UsageError("--weights is empty");
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw UsageError("--weights must lie in [0, 1]");
  }
  return weights;
}

int cmd_sweep(const RunConfig& c, std::ostream& out) {
  if (c.weights.empty() == c.layer_ranges.empty()) throw UsageError("sweep: give exactly one of --weights, --layer-ranges");
  const auto config = correction_of(c);
  const auto options = eval_options(c);
  std::vector<double> weights;
  std::vector<LayerRangeSpec> ranges;
  if (!c.weights.empty()) {
    weights = parse_weights(c.weights);
  } else {
    try {
      ranges = parse_layer_ranges(c.layer_ranges);
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  }
  const auto samples = manifest_of(c);
  const auto dir = prepare_out(c.out);
  auto provider = adapter_of(c);

  std::string csv, name;
  if (!weights.empty()) {
    name = "weight_sweep.csv";
    csv = weight_sweep_csv(sweep_fusion_weight(*provider, samples, config, weights, options));
  } else {
    name = "layer_sweep.csv";
    csv = layer_sweep_csv(
        sweep_layer_ranges(*provider, samples, config, ranges, provider->metadata().n_layers, options));
  }
  write_file(dir / name, csv);
  out << csv << "wrote " << (dir / name).string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text-region grounding diagnostics and grounded-layer correction", "textground"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file of option values; command-line flags take precedence");

  RunConfig c;

  auto* trace = app.add_subcommand("trace", "Run the toy model and write a trace archive");
  add_model_flags(trace, c, false);
  add_image_flags(trace, c);
  add_prompt_flags(trace, c);
  trace->add_option("--continuation", c.continuation, "Teacher-forced tokens after the query");
  trace->add_option("--generate", c.generate, "Greedily decode N tokens and include them in the trace");
  trace->add_option("--out", c.out, "Archive directory")->required();

  auto* analyze = app.add_subcommand("analyze", "Per-layer tendency/grounding profiles, correlation and CV");
  analyze->add_option("--trace", c.traces, "Trace archive (repeatable)")->required();
  analyze->add_option("--generated", c.generated, "Generated tokens per trace: ids, text:<words> or @file");
  analyze->add_option("--gt", c.gt, "Ground-truth tokens per trace: ids, text:<words> or @file");
  analyze->add_option("--boxes", c.boxes, "JSON text-region boxes per trace; ZoomText selection when absent");
  analyze->add_flag("--heatmap", c.heatmap, "Also write ZoomText CSV and PNG heatmaps");
  add_zoom_flags(analyze, c);
  analyze->add_option("--out", c.out, "Output directory")->required();

  auto* mitigate = app.add_subcommand("mitigate", "Decode with grounded-layer correction");
  add_model_flags(mitigate, c, true);
  add_image_flags(mitigate, c);
  add_prompt_flags(mitigate, c);
  add_correction_flags(mitigate, c);
  mitigate->add_flag("--heatmap", c.heatmap, "Also write the ZoomText heatmap (needs --out)");
  mitigate->add_option("--out", c.out, "Output directory");

  auto* eval = app.add_subcommand("eval", "Score a benchmark manifest");
  add_model_flags(eval, c, true);
  add_image_flags(eval, c);
  add_correction_flags(eval, c);
  eval->add_option("--manifest", c.manifest, "JSONL benchmark manifest")->required();
  eval->add_option("--jobs", c.jobs, "Parallel workers")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--format", c.format, "Report formats")
      ->check(CLI::IsMember({"json", "csv", "both"}))
      ->capture_default_str();
  eval->add_option("--out", c.out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Fusion-weight or layer-range ablation tables");
  add_model_flags(sweep, c, true);
  add_image_flags(sweep, c);
  add_correction_flags(sweep, c);
  sweep->add_option("--manifest", c.manifest, "JSONL benchmark manifest")->required();
  sweep->add_option("--weights", c.weights, "Comma-separated fusion weights, e.g. 0,0.1,0.5");
  sweep->add_option("--layer-ranges", c.layer_ranges, "Comma-separated half-open ranges, e.g. 0-2,2-4,random");
  sweep->add_option("--jobs", c.jobs, "Parallel workers")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--out", c.out, "Output directory")->required();

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (trace->parsed()) return cmd_trace(c, out);
    if (analyze->parsed()) return cmd_analyze(c, out);
    if (mitigate->parsed()) return cmd_mitigate(c, out);
    if (eval->parsed()) return cmd_eval(c, out);
    if (sweep->parsed()) return cmd_sweep(c, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const AdapterError& e) {
    err << "adapter error: " << e.what() << "\n";
    return kExitAdapter;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace textground::cli
