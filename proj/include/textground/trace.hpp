#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace textground {

using TokenId = std::int32_t;

// Half-open index interval [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return size() == 0; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

// Partition of a sequence into image tokens and query tokens plus the pixel
// geometry of the image-token grid. Positions after the query range, if any,
// hold generated (continuation) tokens.
struct TokenLayout {
  std::size_t n_image_tokens = 0;
  std::size_t n_query_tokens = 0;
  IndexRange image_token_range;
  IndexRange query_token_range;
  std::size_t grid_w = 0;
  std::size_t grid_h = 0;
  std::size_t patch_size = 0;
  std::size_t image_w = 0;
  std::size_t image_h = 0;

  bool operator==(const TokenLayout&) const = default;

  // Image token index of grid cell (row, col).
  std::size_t token_at(std::size_t row, std::size_t col) const {
    return image_token_range.begin + row * grid_w + col;
  }
};

// Builds the usual layout: image prefix of grid_w * grid_h tokens followed by
// n_query query tokens. Image size defaults to the full grid extent.
TokenLayout make_layout(std::size_t grid_w, std::size_t grid_h, std::size_t patch_size,
                        std::size_t n_query);

// Throws ValidationError if the layout is internally inconsistent or does not
// fit in a sequence of seq_len positions.
void validate_layout(const TokenLayout& layout, std::size_t seq_len);

// Attention probabilities of one layer, [heads x seq x seq], row-major. Row
// (h, q) is the distribution of query position q over key positions.
struct AttentionTensor {
  std::size_t layer_index = 0;
  std::size_t heads = 0;
  std::size_t seq = 0;
  std::vector<float> weights;

  AttentionTensor() = default;
  AttentionTensor(std::size_t layer, std::size_t n_heads, std::size_t seq_len)
      : layer_index(layer), heads(n_heads), seq(seq_len), weights(n_heads * seq_len * seq_len, 0.0f) {}

  float& at(std::size_t h, std::size_t q, std::size_t k) { return weights[(h * seq + q) * seq + k]; }
  float at(std::size_t h, std::size_t q, std::size_t k) const { return weights[(h * seq + q) * seq + k]; }

  std::span<float> row(std::size_t h, std::size_t q) { return {weights.data() + (h * seq + q) * seq, seq}; }
  std::span<const float> row(std::size_t h, std::size_t q) const {
    return {weights.data() + (h * seq + q) * seq, seq};
  }

  // Arithmetic mean over heads of weight(q -> k).
  double head_mean(std::size_t q, std::size_t k) const;
};

// Residual-stream states of one layer, [seq x d_model], row-major.
struct HiddenStateTensor {
  std::size_t layer_index = 0;
  std::size_t seq = 0;
  std::size_t d_model = 0;
  std::vector<float> states;

  HiddenStateTensor() = default;
  HiddenStateTensor(std::size_t layer, std::size_t seq_len, std::size_t dim)
      : layer_index(layer), seq(seq_len), d_model(dim), states(seq_len * dim, 0.0f) {}

  std::span<float> row(std::size_t pos) { return {states.data() + pos * d_model, d_model}; }
  std::span<const float> row(std::size_t pos) const { return {states.data() + pos * d_model, d_model}; }
};

// Final RMS normalization followed by an affine projection to the vocabulary.
struct OutputHead {
  std::size_t vocab = 0;
  std::size_t d_model = 0;
  std::vector<float> weight;     // [vocab x d_model]
  std::vector<float> bias;       // [vocab]
  std::vector<float> norm_gain;  // [d_model]
  float norm_epsilon = 1e-5f;

  std::span<const float> weight_row(std::size_t v) const { return {weight.data() + v * d_model, d_model}; }
};

// One forward pass: attentions[l] belongs to block l, hidden_states[0] is the
// embedding output and hidden_states[l + 1] the output of block l.
struct MultimodalTrace {
  std::string model_id;
  TokenLayout layout;
  std::vector<TokenId> token_ids;
  std::vector<AttentionTensor> attentions;
  std::vector<HiddenStateTensor> hidden_states;
  OutputHead output_head;

  std::size_t n_layers() const { return attentions.size(); }
  std::size_t seq_len() const { return token_ids.size(); }
  // Output of block `layer` (0-based).
  const HiddenStateTensor& block_output(std::size_t layer) const { return hidden_states.at(layer + 1); }
  const HiddenStateTensor& final_hidden() const { return hidden_states.back(); }
};

// Checks every MultimodalTrace invariant (counts, shapes, finiteness, attention
// rows being distributions within 1e-5). Throws ValidationError.
void validate_trace(const MultimodalTrace& trace);

enum class SelectionOrigin { glimpse, refocus, ground_truth_boxes };

std::string_view to_string(SelectionOrigin origin);

// Ordered image-token indices with non-increasing scores.
struct TokenSelection {
  std::vector<std::size_t> indices;
  std::vector<double> scores;
  SelectionOrigin origin = SelectionOrigin::glimpse;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  bool contains(std::size_t index) const;
};

// Sorts (index, score) pairs by score descending, ties by ascending index.
TokenSelection make_selection(std::vector<std::pair<std::size_t, double>> scored, SelectionOrigin origin);

void validate_selection(const TokenSelection& selection, const TokenLayout& layout);

}  // namespace textground
