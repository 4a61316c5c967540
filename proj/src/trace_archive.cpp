#include "textground/trace_archive.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "textground/error.hpp"

namespace textground {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TensorEntry {
  std::string name;
  std::string file;
  std::vector<std::size_t> shape;
};

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_f32(const fs::path& file, std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    bytes[4 * i + 0] = static_cast<unsigned char>(bits & 0xffu);
    bytes[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xffu);
    bytes[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xffu);
    bytes[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xffu);
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + file.string());
}

std::vector<float> read_f32(const fs::path& file, std::size_t expected_count) {
  std::error_code ec;
  const auto size = fs::file_size(file, ec);
  if (ec) throw IoError("cannot stat " + file.string() + ": " + ec.message());
  if (size != expected_count * 4) {
    std::ostringstream os;
    os << file.string() << " holds " << size << " bytes but the manifest shape needs " << expected_count * 4;
    throw ValidationError(os.str());
  }
  std::vector<unsigned char> bytes(size);
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("failed reading " + file.string());
  std::vector<float> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

json layout_to_json(const TokenLayout& l) {
  return json{{"n_image_tokens", l.n_image_tokens},
              {"n_query_tokens", l.n_query_tokens},
              {"image_token_range", {l.image_token_range.begin, l.image_token_range.end}},
              {"query_token_range", {l.query_token_range.begin, l.query_token_range.end}},
              {"grid_w", l.grid_w},
              {"grid_h", l.grid_h},
              {"patch_size", l.patch_size},
              {"image_w", l.image_w},
              {"image_h", l.image_h}};
}

IndexRange range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("manifest: token range must be a [begin, end] pair");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

TokenLayout layout_from_json(const json& j) {
  TokenLayout l;
  l.n_image_tokens = j.at("n_image_tokens").get<std::size_t>();
  l.n_query_tokens = j.at("n_query_tokens").get<std::size_t>();
  l.image_token_range = range_from_json(j.at("image_token_range"));
  l.query_token_range = range_from_json(j.at("query_token_range"));
  l.grid_w = j.at("grid_w").get<std::size_t>();
  l.grid_h = j.at("grid_h").get<std::size_t>();
  l.patch_size = j.at("patch_size").get<std::size_t>();
  l.image_w = j.at("image_w").get<std::size_t>();
  l.image_h = j.at("image_h").get<std::size_t>();
  return l;
}

std::string attention_name(std::size_t l) { return "attention." + std::to_string(l); }
std::string hidden_name(std::size_t l) { return "hidden." + std::to_string(l); }

fs::path normalized_target(const fs::path& path) {
  auto p = path.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p;
}

fs::path temp_sibling(const fs::path& target) {
  static std::atomic<unsigned> counter{0};
  auto name = target.filename().string() + ".tmp-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter.fetch_add(1));
  return target.parent_path() / name;
}

}  // namespace

void write_trace(const MultimodalTrace& trace, const fs::path& path) {
  validate_trace(trace);
  const fs::path target = normalized_target(path);
  const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) throw IoError("parent directory of " + target.string() + " does not exist");

  std::error_code ec;
  if (fs::exists(target)) {
    const bool replaceable =
        fs::is_directory(target) && (fs::is_empty(target) || fs::exists(target / "manifest.json"));
    if (!replaceable) throw IoError(target.string() + " exists and is not a trace archive");
  }

  const fs::path tmp = temp_sibling(target);
  fs::remove_all(tmp, ec);
  if (!fs::create_directory(tmp, ec) || ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());

  try {
    std::vector<TensorEntry> entries;
    auto emit = [&](std::string name, std::vector<std::size_t> shape, std::span<const float> values) {
      std::string file = name;
      std::replace(file.begin(), file.end(), '.', '_');
      file += ".f32";
      write_f32(tmp / file, values);
      entries.push_back({std::move(name), std::move(file), std::move(shape)});
    };

    const std::size_t seq = trace.seq_len();
    for (const auto& attn : trace.attentions) {
      emit(attention_name(attn.layer_index), {attn.heads, seq, seq}, attn.weights);
    }
    for (std::size_t l = 0; l < trace.hidden_states.size(); ++l) {
      const auto& hs = trace.hidden_states[l];
      emit(hidden_name(l), {seq, hs.d_model}, hs.states);
    }
    const auto& head = trace.output_head;
    emit("head.weight", {head.vocab, head.d_model}, head.weight);
    emit("head.bias", {head.vocab}, head.bias);
    emit("head.norm_gain", {head.d_model}, head.norm_gain);

    json tensors = json::object();
    for (const auto& e : entries) tensors[e.name] = json{{"file", e.file}, {"shape", e.shape}};

    json manifest{{"format_version", kTraceFormatVersion},
                  {"model_id", trace.model_id},
                  {"dtype", "f32"},
                  {"endianness", "little"},
                  {"layout", layout_to_json(trace.layout)},
                  {"token_ids", trace.token_ids},
                  {"output_head", {{"norm", "rms"}, {"norm_epsilon", head.norm_epsilon}}},
                  {"tensors", tensors}};

    std::ofstream out(tmp / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + tmp.string());
    out << manifest.dump(2) << '\n';
    out.close();
    if (!out) throw IoError("failed writing manifest in " + tmp.string());

    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp, ec);
    throw IoError("writing trace archive " + target.string() + ": " + e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

MultimodalTrace read_trace(const fs::path& path) {
  const fs::path root = normalized_target(path);
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("trace archive " + root.string() + " has no readable manifest.json");

  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ValidationError("corrupt manifest " + manifest_path.string() + ": " + e.what());
  }

  MultimodalTrace trace;
  std::map<std::string, TensorEntry> tensors;
  try {
    if (manifest.at("format_version").get<int>() != kTraceFormatVersion) {
      throw ValidationError("unsupported trace format_version in " + manifest_path.string());
    }
    if (manifest.at("dtype").get<std::string>() != "f32") throw ValidationError("manifest: dtype must be f32");
    if (manifest.at("endianness").get<std::string>() != "little") {
      throw ValidationError("manifest: endianness must be little");
    }
    trace.model_id = manifest.at("model_id").get<std::string>();
    trace.layout = layout_from_json(manifest.at("layout"));
    trace.token_ids = manifest.at("token_ids").get<std::vector<TokenId>>();
    const auto& head_meta = manifest.at("output_head");
    if (head_meta.at("norm").get<std::string>() != "rms") throw ValidationError("manifest: unsupported head norm");
    trace.output_head.norm_epsilon = head_meta.at("norm_epsilon").get<float>();
    for (const auto& [name, entry] : manifest.at("tensors").items()) {
      tensors[name] = {name, entry.at("file").get<std::string>(), entry.at("shape").get<std::vector<std::size_t>>()};
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  std::size_t n_layers = 0;
  while (tensors.count(attention_name(n_layers))) ++n_layers;
  if (n_layers == 0) throw ValidationError("manifest " + manifest_path.string() + " declares no attention tensors");

  std::vector<std::string> required;
  for (std::size_t l = 0; l < n_layers; ++l) required.push_back(attention_name(l));
  for (std::size_t l = 0; l <= n_layers; ++l) required.push_back(hidden_name(l));
  for (const char* n : {"head.weight", "head.bias", "head.norm_gain"}) required.emplace_back(n);

  std::vector<std::string> missing;
  for (const auto& name : required) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      missing.push_back(name + " (not in manifest)");
    } else if (!fs::is_regular_file(root / it->second.file)) {
      missing.push_back(name + " (" + it->second.file + ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = "trace archive " + root.string() + " is missing tensors:";
    for (const auto& m : missing) msg += " " + m;
    throw IoError(msg);
  }

  const std::size_t seq = trace.token_ids.size();
  auto expect_shape = [&](const TensorEntry& e, std::size_t rank) {
    if (e.shape.size() != rank) throw ValidationError("tensor " + e.name + " has wrong rank in manifest");
  };

  const auto& hidden0 = tensors.at(hidden_name(0));
  expect_shape(hidden0, 2);
  const std::size_t d_model = hidden0.shape[1];
  const std::size_t heads = tensors.at(attention_name(0)).shape.empty() ? 0 : tensors.at(attention_name(0)).shape[0];

  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& e = tensors.at(attention_name(l));
    expect_shape(e, 3);
    if (e.shape[0] != heads || e.shape[1] != seq || e.shape[2] != seq) {
      std::ostringstream os;
      os << "tensor " << e.name << " shape does not match seq=" << seq << ", heads=" << heads;
      throw ValidationError(os.str());
    }
    AttentionTensor attn;
    attn.layer_index = l;
    attn.heads = heads;
    attn.seq = seq;
    attn.weights = read_f32(root / e.file, element_count(e.shape));
    trace.attentions.push_back(std::move(attn));
  }
  for (std::size_t l = 0; l <= n_layers; ++l) {
    const auto& e = tensors.at(hidden_name(l));
    expect_shape(e, 2);
    if (e.shape[0] != seq || e.shape[1] != d_model) {
      std::ostringstream os;
      os << "tensor " << e.name << " shape does not match seq=" << seq << ", d_model=" << d_model;
      throw ValidationError(os.str());
    }
    HiddenStateTensor hs;
    hs.layer_index = l;
    hs.seq = seq;
    hs.d_model = d_model;
    hs.states = read_f32(root / e.file, element_count(e.shape));
    trace.hidden_states.push_back(std::move(hs));
  }

  auto& head = trace.output_head;
  const auto& w = tensors.at("head.weight");
  expect_shape(w, 2);
  head.vocab = w.shape[0];
  head.d_model = w.shape[1];
  head.weight = read_f32(root / w.file, element_count(w.shape));
  const auto& b = tensors.at("head.bias");
  expect_shape(b, 1);
  if (b.shape[0] != head.vocab) throw ValidationError("tensor head.bias does not match vocabulary size");
  head.bias = read_f32(root / b.file, head.vocab);
  const auto& g = tensors.at("head.norm_gain");
  expect_shape(g, 1);
  if (g.shape[0] != head.d_model) throw ValidationError("tensor head.norm_gain does not match d_model");
  head.norm_gain = read_f32(root / g.file, head.d_model);

  validate_trace(trace);
  return trace;
}

}  // namespace textground
