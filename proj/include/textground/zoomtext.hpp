#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "textground/trace.hpp"

namespace textground {

inline constexpr std::size_t kDefaultTopK = 128;
inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr double kDefaultKeepFraction = 0.5;

// Query-to-image attention map over the image tokens (index 0 is the first
// image token).
struct GlimpseMap {
  std::vector<double> scores;
  // False when some query row put no mass on image tokens, in which case the
  // map does not sum to one.
  bool normalized = true;
};

struct GlimpseResult {
  GlimpseMap map;
  TokenSelection selection;
};

// Final-layer attention of every query position, restricted to image columns
// and renormalized per row, averaged over heads and query positions. Selects
// the top min(k, N) tokens (score descending, then index ascending).
GlimpseResult glimpse(const MultimodalTrace& trace, std::size_t k);

// Elementwise (A_last - A_first) / (A_first + epsilon) over the head-mean
// image-to-image attention among the candidates. Rows and columns follow
// candidate_indices, which are sorted ascending.
struct ShiftScoreMatrix {
  std::vector<std::size_t> candidate_indices;
  std::vector<double> values;  // [K x K], row-major

  std::size_t size() const { return candidate_indices.size(); }
  double at(std::size_t a, std::size_t b) const { return values[a * size() + b]; }
};

ShiftScoreMatrix shift_score_matrix(const MultimodalTrace& trace, const TokenSelection& candidates, double epsilon);

// Per-candidate shift: mean over the candidate's row and column of the matrix,
// aligned with candidate_indices.
std::vector<double> token_shift_scores(const ShiftScoreMatrix& matrix);

// Keeps the ceil(keep_fraction * K) candidates with the highest shift score.
TokenSelection refocus(const MultimodalTrace& trace, const TokenSelection& candidates, double epsilon,
                       double keep_fraction);

struct ZoomTextConfig {
  std::size_t k = kDefaultTopK;
  double epsilon = kDefaultEpsilon;
  double keep_fraction = kDefaultKeepFraction;
};

struct ZoomTextResult {
  GlimpseMap map;
  TokenSelection candidates;
  std::vector<std::size_t> shift_indices;  // ascending
  std::vector<double> shift_scores;        // aligned with shift_indices
  TokenSelection selection;
};

// Glimpse followed by refocus.
ZoomTextResult zoom_text(const MultimodalTrace& trace, const ZoomTextConfig& config);

// |pred ∩ ref| / |pred ∪ ref|; 1 when both are empty.
double selection_iou(const TokenSelection& predicted, const TokenSelection& reference);

// CSV: token_index,row,col,glimpse_score,shift_score,kept. shift_score is
// empty for tokens that were not glimpse candidates.
std::string zoomtext_csv(const TokenLayout& layout, const ZoomTextResult& result);

// Grid-shaped RGB PNG: gray level proportional to the glimpse score, kept
// tokens outlined in red. Each token is rendered as a cell_px square.
void write_heatmap_png(const std::filesystem::path& path, const TokenLayout& layout, const ZoomTextResult& result,
                       std::size_t cell_px = 16);

}  // namespace textground
