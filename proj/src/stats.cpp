#include "textground/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace textground {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean_rank;
    i = j;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: inputs differ in length");
  if (xs.size() < 2) throw std::invalid_argument("spearman: need at least two observations");

  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  // Both rank vectors sum to n(n+1)/2, so their mean is exact.
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {std::numeric_limits<double>::quiet_NaN(), false};
  const double rho = sxy / std::sqrt(sxx * syy);
  return {std::clamp(rho, -1.0, 1.0), true};
}

double coefficient_of_variation(std::span<const double> series) {
  if (series.empty()) return 0.0;
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  if (mean == 0.0) return 0.0;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= n;
  return std::sqrt(var) / mean;
}

}  // namespace textground
