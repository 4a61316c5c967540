#include "textground/zoomtext.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "textground/error.hpp"

namespace textground {

GlimpseResult glimpse(const MultimodalTrace& trace, std::size_t k) {
  if (k == 0) throw ValidationError("glimpse: k must be at least 1");
  const auto& layout = trace.layout;
  if (layout.query_token_range.empty()) throw ValidationError("glimpse: trace has no query tokens");
  if (trace.attentions.empty()) throw ValidationError("glimpse: trace has no attention layers");
  const auto& attn = trace.attentions.back();
  const auto& img = layout.image_token_range;
  const std::size_t n = img.size();

  GlimpseResult result;
  result.map.scores.assign(n, 0.0);
  const double rows = static_cast<double>(attn.heads * layout.query_token_range.size());
  for (std::size_t h = 0; h < attn.heads; ++h) {
    for (std::size_t q = layout.query_token_range.begin; q < layout.query_token_range.end; ++q) {
      const auto row = attn.row(h, q);
      double mass = 0.0;
      for (std::size_t j = img.begin; j < img.end; ++j) mass += row[j];
      if (mass <= 0.0) {
        result.map.normalized = false;
        continue;
      }
      for (std::size_t j = 0; j < n; ++j) result.map.scores[j] += row[img.begin + j] / mass;
    }
  }
  for (auto& s : result.map.scores) s /= rows;

  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(n);
  for (std::size_t j = 0; j < n; ++j) scored.emplace_back(img.begin + j, result.map.scores[j]);
  result.selection = make_selection(std::move(scored), SelectionOrigin::glimpse);
  const std::size_t keep = std::min(k, n);
  result.selection.indices.resize(keep);
  result.selection.scores.resize(keep);
  return result;
}

ShiftScoreMatrix shift_score_matrix(const MultimodalTrace& trace, const TokenSelection& candidates, double epsilon) {
  if (candidates.empty()) throw ValidationError("refocus: candidate set is empty");
  if (!(epsilon > 0.0)) throw ValidationError("refocus: epsilon must be positive");
  if (trace.attentions.empty()) throw ValidationError("refocus: trace has no attention layers");
  std::set<std::size_t> unique;
  for (auto idx : candidates.indices) {
    if (!trace.layout.image_token_range.contains(idx)) {
      throw ValidationError("refocus: candidate " + std::to_string(idx) + " is outside the image-token range");
    }
    unique.insert(idx);
  }

  ShiftScoreMatrix m;
  m.candidate_indices.assign(unique.begin(), unique.end());
  const std::size_t k = m.size();
  const auto& first = trace.attentions.front();
  const auto& last = trace.attentions.back();
  m.values.resize(k * k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      const double a1 = first.head_mean(m.candidate_indices[a], m.candidate_indices[b]);
      const double al = last.head_mean(m.candidate_indices[a], m.candidate_indices[b]);
      m.values[a * k + b] = (al - a1) / (a1 + epsilon);
    }
  }
  return m;
}

std::vector<double> token_shift_scores(const ShiftScoreMatrix& matrix) {
  const std::size_t k = matrix.size();
  std::vector<double> scores(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < k; ++b) sum += matrix.at(a, b) + matrix.at(b, a);
    scores[a] = sum / (2.0 * static_cast<double>(k));
  }
  return scores;
}

namespace {

void check_keep_fraction(double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ValidationError("refocus: keep_fraction must lie in (0, 1]");
  }
}

std::size_t keep_count(std::size_t k, double keep_fraction) {
  check_keep_fraction(keep_fraction);
  const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(k)));
  return std::clamp<std::size_t>(keep, 1, k);
}

TokenSelection keep_top(const ShiftScoreMatrix& matrix, const std::vector<double>& shift, double keep_fraction) {
  const std::size_t keep = keep_count(matrix.size(), keep_fraction);
  std::vector<std::pair<std::size_t, double>> scored;
  for (std::size_t a = 0; a < matrix.size(); ++a) scored.emplace_back(matrix.candidate_indices[a], shift[a]);
  auto sel = make_selection(std::move(scored), SelectionOrigin::refocus);
  sel.indices.resize(keep);
  sel.scores.resize(keep);
  return sel;
}

}  // namespace

TokenSelection refocus(const MultimodalTrace& trace, const TokenSelection& candidates, double epsilon,
                       double keep_fraction) {
  check_keep_fraction(keep_fraction);
  const auto matrix = shift_score_matrix(trace, candidates, epsilon);
  return keep_top(matrix, token_shift_scores(matrix), keep_fraction);
}

ZoomTextResult zoom_text(const MultimodalTrace& trace, const ZoomTextConfig& config) {
  check_keep_fraction(config.keep_fraction);
  ZoomTextResult out;
  auto g = glimpse(trace, config.k);
  out.map = std::move(g.map);
  out.candidates = std::move(g.selection);
  const auto matrix = shift_score_matrix(trace, out.candidates, config.epsilon);
  out.shift_indices = matrix.candidate_indices;
  out.shift_scores = token_shift_scores(matrix);
  out.selection = keep_top(matrix, out.shift_scores, config.keep_fraction);
  return out;
}

double selection_iou(const TokenSelection& predicted, const TokenSelection& reference) {
  const std::set<std::size_t> a(predicted.indices.begin(), predicted.indices.end());
  const std::set<std::size_t> b(reference.indices.begin(), reference.indices.end());
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (auto i : a) inter += b.count(i);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string zoomtext_csv(const TokenLayout& layout, const ZoomTextResult& result) {
  std::unordered_map<std::size_t, double> shift;
  for (std::size_t i = 0; i < result.shift_indices.size(); ++i) shift[result.shift_indices[i]] = result.shift_scores[i];
  const std::set<std::size_t> kept(result.selection.indices.begin(), result.selection.indices.end());

  std::ostringstream os;
  os << std::setprecision(17);
  os << "token_index,row,col,glimpse_score,shift_score,kept\n";
  for (std::size_t j = 0; j < layout.n_image_tokens; ++j) {
    const std::size_t token = layout.image_token_range.begin + j;
    os << token << ',' << j / layout.grid_w << ',' << j % layout.grid_w << ',' << result.map.scores[j] << ',';
    if (auto it = shift.find(token); it != shift.end()) os << it->second;
    os << ',' << (kept.count(token) ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace textground
