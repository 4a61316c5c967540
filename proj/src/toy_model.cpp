#include "textground/toy_model.hpp"

#include <cmath>
#include <sstream>

#include "textground/error.hpp"
#include "textground/head.hpp"
#include "textground/toy_tokenizer.hpp"

namespace textground {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Stream {
 public:
  Stream(std::uint64_t seed, const std::string& name) : state_(seed ^ fnv1a(name)) {}

  // Uniform in [-bound, bound].
  float uniform(double bound) {
    const double u = static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53;
    return static_cast<float>((2.0 * u - 1.0) * bound);
  }

  std::vector<float> fill(std::size_t n, double bound, double center = 0.0) {
    std::vector<float> out(n);
    for (auto& v : out) v = static_cast<float>(center + uniform(bound));
    return out;
  }

 private:
  std::uint64_t state_;
};

void rms_norm(const std::vector<float>& x, const std::vector<float>& gain, std::vector<float>& out) {
  double sq = 0.0;
  for (float v : x) sq += static_cast<double>(v) * v;
  const double inv = 1.0 / std::sqrt(sq / static_cast<double>(x.size()) + 1e-5);
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x[i] * inv * gain[i]);
}

// out[r] = sum_c m[r, c] * x[c] (+ bias[r])
void matvec(const std::vector<float>& m, const std::vector<float>& x, std::size_t rows, std::vector<float>& out,
            const std::vector<float>* bias = nullptr) {
  const std::size_t cols = x.size();
  out.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias ? (*bias)[r] : 0.0;
    const float* row = m.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * x[c];
    out[r] = static_cast<float>(acc);
  }
}

float gelu(float x) {
  const double v = x;
  return static_cast<float>(0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v))));
}

std::vector<float> sinusoidal(std::size_t pos, std::size_t d) {
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
    const double angle = static_cast<double>(pos) * freq;
    out[i] = static_cast<float>(0.5 * ((i % 2 == 0) ? std::sin(angle) : std::cos(angle)));
  }
  return out;
}

void check_arch(const ToyArch& arch) {
  if (arch.n_layers == 0 || arch.n_heads == 0 || arch.d_model == 0 || arch.vocab == 0) {
    throw ValidationError("toy model: architecture dimensions must be positive");
  }
  if (arch.d_model % arch.n_heads != 0) throw ValidationError("toy model: d_model must be divisible by heads");
}

std::string make_model_id(const ToyArch& a, std::uint64_t seed) {
  std::ostringstream os;
  os << "toy-L" << a.n_layers << "-H" << a.n_heads << "-D" << a.d_model << "-V" << a.vocab << "-s" << seed;
  return os.str();
}

}  // namespace

std::vector<float> ToyWeights::image_embedding(std::size_t index) const {
  Stream s(seed, "image_prefix." + std::to_string(index));
  return s.fill(arch.d_model, 1.0);
}

ToyWeights make_toy_weights(const ToyArch& arch, std::uint64_t seed) {
  check_arch(arch);
  const std::size_t d = arch.d_model, dff = arch.d_ff();
  const double proj = std::sqrt(3.0 / static_cast<double>(d));
  const double proj_ff = std::sqrt(3.0 / static_cast<double>(dff));
  const double residual = 1.0 / std::sqrt(2.0 * static_cast<double>(arch.n_layers));

  ToyWeights w;
  w.arch = arch;
  w.seed = seed;
  w.token_embedding = Stream(seed, "token_embedding").fill(arch.vocab * d, 1.0);
  for (std::size_t l = 0; l < arch.n_layers; ++l) {
    const std::string p = "block." + std::to_string(l) + ".";
    ToyBlockWeights b;
    b.attn_norm_gain = Stream(seed, p + "attn_norm").fill(d, 0.1, 1.0);
    b.wq = Stream(seed, p + "wq").fill(d * d, proj);
    b.wk = Stream(seed, p + "wk").fill(d * d, proj);
    b.wv = Stream(seed, p + "wv").fill(d * d, proj);
    b.wo = Stream(seed, p + "wo").fill(d * d, proj * residual);
    b.mlp_norm_gain = Stream(seed, p + "mlp_norm").fill(d, 0.1, 1.0);
    b.w_up = Stream(seed, p + "w_up").fill(dff * d, proj);
    b.b_up = Stream(seed, p + "b_up").fill(dff, 0.1);
    b.w_down = Stream(seed, p + "w_down").fill(d * dff, proj_ff * residual);
    b.b_down = Stream(seed, p + "b_down").fill(d, 0.1);
    w.blocks.push_back(std::move(b));
  }
  w.head.vocab = arch.vocab;
  w.head.d_model = d;
  w.head.weight = Stream(seed, "head.weight").fill(arch.vocab * d, proj);
  w.head.bias = Stream(seed, "head.bias").fill(arch.vocab, 0.1);
  w.head.norm_gain = Stream(seed, "head.norm_gain").fill(d, 0.1, 1.0);
  w.head.norm_epsilon = 1e-5f;
  return w;
}

ToyModel::ToyModel(const ToyArch& arch, std::uint64_t seed)
    : ToyModel(std::make_shared<const ToyWeights>(make_toy_weights(arch, seed))) {}

ToyModel::ToyModel(std::shared_ptr<const ToyWeights> weights)
    : weights_(std::move(weights)), model_id_(make_model_id(weights_->arch, weights_->seed)) {
  check_arch(weights_->arch);
}

void ToyModel::check_token(TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= weights_->arch.vocab) {
    throw ValidationError("toy model: token id " + std::to_string(token) + " does not fit vocabulary of " +
                          std::to_string(weights_->arch.vocab));
  }
}

ToyModel::PositionOutput ToyModel::run_position(const std::vector<float>& embedding) {
  const auto& arch = weights_->arch;
  const std::size_t d = arch.d_model, hd = arch.head_dim(), pos = length_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  PositionOutput out;
  std::vector<float> x = embedding;
  const auto pe = sinusoidal(pos, d);
  for (std::size_t i = 0; i < d; ++i) x[i] += pe[i];
  out.hidden.push_back(x);
  out.attn.resize(arch.n_layers);

  std::vector<float> normed, q, k, v, mixed(d), proj, up, down;
  for (std::size_t l = 0; l < arch.n_layers; ++l) {
    const auto& b = weights_->blocks[l];
    rms_norm(x, b.attn_norm_gain, normed);
    matvec(b.wq, normed, d, q);
    matvec(b.wk, normed, d, k);
    matvec(b.wv, normed, d, v);
    keys_[l].insert(keys_[l].end(), k.begin(), k.end());
    values_[l].insert(values_[l].end(), v.begin(), v.end());

    out.attn[l].resize(arch.n_heads);
    for (std::size_t h = 0; h < arch.n_heads; ++h) {
      std::vector<double> scores(pos + 1);
      double mx = -INFINITY;
      for (std::size_t j = 0; j <= pos; ++j) {
        const float* kj = keys_[l].data() + j * d + h * hd;
        double dot = 0.0;
        for (std::size_t c = 0; c < hd; ++c) dot += static_cast<double>(q[h * hd + c]) * kj[c];
        scores[j] = dot * scale;
        mx = std::max(mx, scores[j]);
      }
      double sum = 0.0;
      for (auto& s : scores) {
        s = std::exp(s - mx);
        sum += s;
      }
      auto& probs = out.attn[l][h];
      probs.resize(pos + 1);
      for (std::size_t j = 0; j <= pos; ++j) probs[j] = static_cast<float>(scores[j] / sum);
      for (std::size_t c = 0; c < hd; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= pos; ++j) acc += static_cast<double>(probs[j]) * values_[l][j * d + h * hd + c];
        mixed[h * hd + c] = static_cast<float>(acc);
      }
    }
    matvec(b.wo, mixed, d, proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];

    rms_norm(x, b.mlp_norm_gain, normed);
    matvec(b.w_up, normed, arch.d_ff(), up, &b.b_up);
    for (auto& u : up) u = gelu(u);
    matvec(b.w_down, up, d, down, &b.b_down);
    for (std::size_t i = 0; i < d; ++i) x[i] += down[i];
    out.hidden.push_back(x);
  }
  ++length_;
  last_hidden_ = x;
  return out;
}

MultimodalTrace ToyModel::prefill(const PromptInput& input) {
  const auto& arch = weights_->arch;
  for (TokenId t : input.query_tokens) check_token(t);
  for (TokenId t : input.continuation) check_token(t);

  layout_ = make_layout(input.image.grid_w, input.image.grid_h, input.image.patch_size, input.query_tokens.size());
  keys_.assign(arch.n_layers, {});
  values_.assign(arch.n_layers, {});
  length_ = 0;

  MultimodalTrace trace;
  trace.model_id = model_id_;
  trace.layout = layout_;
  trace.token_ids.assign(layout_.n_image_tokens, kImageTokenId);
  trace.token_ids.insert(trace.token_ids.end(), input.query_tokens.begin(), input.query_tokens.end());
  trace.token_ids.insert(trace.token_ids.end(), input.continuation.begin(), input.continuation.end());
  const std::size_t seq = trace.token_ids.size();
  if (seq == 0) throw ValidationError("toy model: empty input");

  for (std::size_t l = 0; l < arch.n_layers; ++l) trace.attentions.emplace_back(l, arch.n_heads, seq);
  for (std::size_t l = 0; l <= arch.n_layers; ++l) trace.hidden_states.emplace_back(l, seq, arch.d_model);

  const std::size_t d = arch.d_model;
  for (std::size_t p = 0; p < seq; ++p) {
    std::vector<float> emb;
    if (p < layout_.n_image_tokens) {
      emb = weights_->image_embedding(p);
    } else {
      const auto id = static_cast<std::size_t>(trace.token_ids[p]);
      emb.assign(weights_->token_embedding.begin() + id * d, weights_->token_embedding.begin() + (id + 1) * d);
    }
    auto out = run_position(emb);
    for (std::size_t l = 0; l <= arch.n_layers; ++l) {
      std::copy(out.hidden[l].begin(), out.hidden[l].end(), trace.hidden_states[l].row(p).begin());
    }
    for (std::size_t l = 0; l < arch.n_layers; ++l) {
      for (std::size_t h = 0; h < arch.n_heads; ++h) {
        std::copy(out.attn[l][h].begin(), out.attn[l][h].end(), trace.attentions[l].row(h, p).begin());
      }
    }
  }
  trace.output_head = weights_->head;
  return trace;
}

std::vector<float> ToyModel::prefill_logits() const {
  if (length_ == 0) throw AdapterError("toy model: prefill has not been run");
  const auto logits = head_logits(last_hidden_, weights_->head);
  return {logits.begin(), logits.end()};
}

StepResult ToyModel::step(TokenId token) {
  if (length_ == 0) throw AdapterError("toy model: step called before prefill");
  check_token(token);
  const std::size_t d = weights_->arch.d_model;
  const auto id = static_cast<std::size_t>(token);
  std::vector<float> emb(weights_->token_embedding.begin() + id * d, weights_->token_embedding.begin() + (id + 1) * d);
  auto out = run_position(emb);
  StepResult result;
  result.hidden_states = std::move(out.hidden);
  const auto logits = head_logits(result.hidden_states.back(), weights_->head);
  result.logits.assign(logits.begin(), logits.end());
  return result;
}

ProviderMetadata ToyModel::metadata() const {
  ProviderMetadata m;
  m.model_id = model_id_;
  m.layout = layout_;
  m.n_layers = weights_->arch.n_layers;
  m.d_model = weights_->arch.d_model;
  m.vocab = weights_->arch.vocab;
  m.eos_token = weights_->arch.vocab > static_cast<std::size_t>(kToyEosToken) ? kToyEosToken : -1;
  return m;
}

std::unique_ptr<TraceProvider> ToyModel::clone() const { return std::make_unique<ToyModel>(weights_); }

std::vector<TokenId> ToyModel::tokenize(std::string_view text) const { return ToyTokenizer::encode(text); }

std::string ToyModel::detokenize(const std::vector<TokenId>& tokens) const { return ToyTokenizer::decode(tokens); }

MultimodalTrace toy_model_forward(const std::vector<TokenId>& prompt_tokens, std::size_t n_image_tokens,
                                  std::uint64_t seed, const ToyArch& arch) {
  std::size_t grid_h = n_image_tokens == 0 ? 0 : 1;
  for (std::size_t f = 1; f * f <= n_image_tokens; ++f) {
    if (n_image_tokens % f == 0) grid_h = f;
  }
  PromptInput input;
  input.image.grid_h = grid_h;
  input.image.grid_w = grid_h == 0 ? 0 : n_image_tokens / grid_h;
  input.image.patch_size = 16;
  input.query_tokens = prompt_tokens;
  ToyModel model(arch, seed);
  return model.prefill(input);
}

}  // namespace textground
