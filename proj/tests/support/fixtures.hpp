#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "textground/trace.hpp"

namespace fixtures {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct TraceShape {
  std::size_t layers = 3;
  std::size_t heads = 2;
  std::size_t grid_w = 3;
  std::size_t grid_h = 3;
  std::size_t n_query = 3;
  std::size_t n_continuation = 0;
  std::size_t d_model = 8;
  std::size_t vocab = 16;
  double zero_prob = 0.0;  // chance that an attention weight is exactly zero
};

inline TraceShape random_shape(Rng& rng) {
  TraceShape s;
  s.layers = pick(rng, 1, 5);
  s.heads = pick(rng, 1, 4);
  s.grid_w = pick(rng, 1, 6);
  s.grid_h = pick(rng, 1, 6);
  s.n_query = pick(rng, 1, 4);
  s.n_continuation = pick(rng, 0, 3);
  s.d_model = pick(rng, 2, 12);
  s.vocab = pick(rng, 2, 20);
  return s;
}

// Fills a row with a random distribution normalized in double precision.
inline void random_distribution(Rng& rng, std::span<float> row, double zero_prob) {
  std::vector<double> w(row.size());
  double sum = 0.0;
  for (auto& x : w) {
    x = uniform(rng, 0.0, 1.0) < zero_prob ? 0.0 : uniform(rng, 0.01, 1.0);
    sum += x;
  }
  if (sum == 0.0) {
    w[0] = 1.0;
    sum = 1.0;
  }
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(w[i] / sum);
}

inline textground::MultimodalTrace random_trace(Rng& rng, const TraceShape& s) {
  using namespace textground;
  MultimodalTrace t;
  t.model_id = "random-" + std::to_string(rng() % 100000);
  t.layout = make_layout(s.grid_w, s.grid_h, 16, s.n_query);
  const std::size_t seq = t.layout.n_image_tokens + s.n_query + s.n_continuation;
  for (std::size_t i = 0; i < seq; ++i) {
    t.token_ids.push_back(static_cast<TokenId>(pick(rng, 0, s.vocab - 1)));
  }
  for (std::size_t l = 0; l < s.layers; ++l) {
    AttentionTensor a(l, s.heads, seq);
    for (std::size_t h = 0; h < s.heads; ++h) {
      for (std::size_t q = 0; q < seq; ++q) random_distribution(rng, a.row(h, q), s.zero_prob);
    }
    t.attentions.push_back(std::move(a));
  }
  for (std::size_t l = 0; l <= s.layers; ++l) {
    HiddenStateTensor hs(l, seq, s.d_model);
    for (auto& x : hs.states) x = static_cast<float>(uniform(rng, -2.0, 2.0));
    t.hidden_states.push_back(std::move(hs));
  }
  auto& head = t.output_head;
  head.vocab = s.vocab;
  head.d_model = s.d_model;
  head.weight.resize(s.vocab * s.d_model);
  head.bias.resize(s.vocab);
  head.norm_gain.resize(s.d_model);
  for (auto& x : head.weight) x = static_cast<float>(uniform(rng, -1.0, 1.0));
  for (auto& x : head.bias) x = static_cast<float>(uniform(rng, -0.5, 0.5));
  for (auto& x : head.norm_gain) x = static_cast<float>(uniform(rng, 0.5, 1.5));
  return t;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("textground-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
