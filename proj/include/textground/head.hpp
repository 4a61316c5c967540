#pragma once

#include <span>
#include <vector>

#include "textground/trace.hpp"

namespace textground {

// RMS-normalizes `hidden` with the head's gain, then applies W h + b.
// Accumulates in double. Throws ValidationError on dimension mismatch.
std::vector<double> head_logits(std::span<const float> hidden, const OutputHead& head);

// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);

// Index of the largest value; lowest index wins ties.
template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace textground
