#pragma once

#include <span>
#include <vector>

namespace textground {

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
  double rho;    // NaN when undefined
  bool defined;  // false when either input has zero rank variance
};

// Tie-corrected Spearman coefficient: Pearson correlation of average ranks.
// Throws std::invalid_argument unless both inputs have the same length >= 2.
SpearmanResult spearman(std::span<const double> xs, std::span<const double> ys);

// Population standard deviation over mean; 0 when the mean is 0.
double coefficient_of_variation(std::span<const double> series);

}  // namespace textground
