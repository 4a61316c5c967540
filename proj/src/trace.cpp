#include "textground/trace.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "textground/error.hpp"

namespace textground {

namespace {

constexpr double kRowSumTolerance = 1e-5;

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

}  // namespace

TokenLayout make_layout(std::size_t grid_w, std::size_t grid_h, std::size_t patch_size,
                        std::size_t n_query) {
  TokenLayout layout;
  layout.grid_w = grid_w;
  layout.grid_h = grid_h;
  layout.patch_size = patch_size;
  layout.image_w = grid_w * patch_size;
  layout.image_h = grid_h * patch_size;
  layout.n_image_tokens = grid_w * grid_h;
  layout.n_query_tokens = n_query;
  layout.image_token_range = {0, layout.n_image_tokens};
  layout.query_token_range = {layout.n_image_tokens, layout.n_image_tokens + n_query};
  return layout;
}

void validate_layout(const TokenLayout& layout, std::size_t seq_len) {
  if (layout.n_image_tokens != layout.grid_w * layout.grid_h) {
    fail("layout: n_image_tokens must equal grid_w * grid_h");
  }
  if (layout.image_token_range.size() != layout.n_image_tokens ||
      layout.image_token_range.end < layout.image_token_range.begin) {
    fail("layout: image_token_range does not match n_image_tokens");
  }
  if (layout.query_token_range.size() != layout.n_query_tokens ||
      layout.query_token_range.end < layout.query_token_range.begin) {
    fail("layout: query_token_range does not match n_query_tokens");
  }
  const auto& img = layout.image_token_range;
  const auto& qry = layout.query_token_range;
  if (!img.empty() && !qry.empty() && img.begin < qry.end && qry.begin < img.end) {
    fail("layout: image and query token ranges overlap");
  }
  if (img.end > seq_len || qry.end > seq_len) {
    std::ostringstream os;
    os << "layout: token ranges exceed sequence length " << seq_len;
    fail(os.str());
  }
  if (layout.patch_size == 0 && layout.n_image_tokens > 0) fail("layout: patch_size must be positive");
  if (layout.patch_size * layout.grid_w < layout.image_w || layout.patch_size * layout.grid_h < layout.image_h) {
    fail("layout: patch grid does not cover the image");
  }
}

double AttentionTensor::head_mean(std::size_t q, std::size_t k) const {
  double sum = 0.0;
  for (std::size_t h = 0; h < heads; ++h) sum += at(h, q, k);
  return sum / static_cast<double>(heads);
}

void validate_trace(const MultimodalTrace& trace) {
  const std::size_t seq = trace.seq_len();
  const std::size_t n_layers = trace.attentions.size();
  if (n_layers == 0) fail("trace: at least one layer is required");
  if (trace.hidden_states.size() != n_layers + 1) {
    std::ostringstream os;
    os << "trace: expected " << n_layers + 1 << " hidden-state tensors, found " << trace.hidden_states.size();
    fail(os.str());
  }
  validate_layout(trace.layout, seq);

  const auto& head = trace.output_head;
  const std::size_t d_model = trace.hidden_states.front().d_model;
  if (d_model == 0) fail("trace: d_model must be positive");
  if (head.d_model != d_model) fail("trace: output head d_model does not match hidden states");
  if (head.vocab == 0) fail("trace: output head vocabulary is empty");
  if (head.weight.size() != head.vocab * head.d_model || head.bias.size() != head.vocab ||
      head.norm_gain.size() != head.d_model) {
    fail("trace: output head parameter shapes are inconsistent");
  }
  for (float v : head.weight) if (!std::isfinite(v)) fail("trace: non-finite output head weight");
  for (float v : head.bias) if (!std::isfinite(v)) fail("trace: non-finite output head bias");
  for (float v : head.norm_gain) if (!std::isfinite(v)) fail("trace: non-finite output head norm gain");

  for (TokenId id : trace.token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= head.vocab) fail("trace: token id outside vocabulary");
  }

  for (std::size_t l = 0; l < trace.hidden_states.size(); ++l) {
    const auto& hs = trace.hidden_states[l];
    if (hs.seq != seq || hs.d_model != d_model || hs.states.size() != seq * d_model) {
      std::ostringstream os;
      os << "trace: hidden state " << l << " has shape [" << hs.seq << " x " << hs.d_model << "], expected ["
         << seq << " x " << d_model << "]";
      fail(os.str());
    }
    for (float v : hs.states) {
      if (!std::isfinite(v)) fail("trace: hidden state " + std::to_string(l) + " has non-finite entries");
    }
  }

  const std::size_t heads = trace.attentions.front().heads;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& attn = trace.attentions[l];
    if (attn.heads == 0 || attn.heads != heads || attn.seq != seq || attn.weights.size() != heads * seq * seq) {
      std::ostringstream os;
      os << "trace: attention " << l << " has shape [" << attn.heads << " x " << attn.seq << " x " << attn.seq
         << "], expected [" << heads << " x " << seq << " x " << seq << "]";
      fail(os.str());
    }
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t q = 0; q < seq; ++q) {
        double sum = 0.0;
        for (float w : attn.row(h, q)) {
          if (!(w >= 0.0f) || !std::isfinite(w)) {
            fail("trace: attention " + std::to_string(l) + " has negative or non-finite weights");
          }
          sum += w;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          std::ostringstream os;
          os << "trace: attention " << l << " row (head " << h << ", position " << q << ") sums to " << sum;
          fail(os.str());
        }
      }
    }
  }
}

std::string_view to_string(SelectionOrigin origin) {
  switch (origin) {
    case SelectionOrigin::glimpse: return "glimpse";
    case SelectionOrigin::refocus: return "refocus";
    case SelectionOrigin::ground_truth_boxes: return "ground_truth_boxes";
  }
  return "unknown";
}

bool TokenSelection::contains(std::size_t index) const {
  return std::find(indices.begin(), indices.end(), index) != indices.end();
}

TokenSelection make_selection(std::vector<std::pair<std::size_t, double>> scored, SelectionOrigin origin) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  TokenSelection out;
  out.origin = origin;
  out.indices.reserve(scored.size());
  out.scores.reserve(scored.size());
  for (const auto& [index, score] : scored) {
    out.indices.push_back(index);
    out.scores.push_back(score);
  }
  return out;
}

void validate_selection(const TokenSelection& selection, const TokenLayout& layout) {
  if (selection.indices.size() != selection.scores.size()) fail("selection: indices and scores differ in length");
  std::unordered_set<std::size_t> seen;
  for (std::size_t i = 0; i < selection.indices.size(); ++i) {
    const auto idx = selection.indices[i];
    if (!layout.image_token_range.contains(idx)) {
      fail("selection: token " + std::to_string(idx) + " is outside the image-token range");
    }
    if (!seen.insert(idx).second) fail("selection: duplicate token " + std::to_string(idx));
    if (i > 0 && selection.scores[i] > selection.scores[i - 1]) fail("selection: scores are not non-increasing");
  }
}

}  // namespace textground
