#include "streamkws/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "streamkws/errors.hpp"

namespace streamkws {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// ---- little-endian primitives -------------------------------------------

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  out.reserve(out.size() + values.size() * 4);
  for (float f : values) put_le(out, std::bit_cast<std::uint32_t>(f));
}

// ---- shapes and layer kinds ------------------------------------------------

json shape_to_json(const Shape& s) {
  json a = json::array();
  for (auto d : s) {
    if (d == kSymbolicTime) {
      a.push_back("T");
    } else {
      a.push_back(d);
    }
  }
  return a;
}

Shape shape_from_json(const json& a) {
  Shape s;
  for (const auto& d : a) {
    if (d.is_string()) {
      if (d.get<std::string>() != "T") throw FormatError("unknown symbolic dimension");
      s.push_back(kSymbolicTime);
    } else {
      s.push_back(d.get<std::int64_t>());
    }
  }
  return s;
}

Padding padding_from(const std::string& s) {
  if (s == "causal") return Padding::Causal;
  if (s == "valid") return Padding::Valid;
  throw FormatError("unknown padding '" + s + "'");
}

ActivationFn activation_from(const std::string& s) {
  for (auto fn : {ActivationFn::Relu, ActivationFn::Sigmoid, ActivationFn::Tanh,
                  ActivationFn::Softmax}) {
    if (activation_name(fn) == s) return fn;
  }
  throw FormatError("unknown activation '" + s + "'");
}

GraphMode mode_from(const std::string& s) {
  for (auto m : {GraphMode::NonStreaming, GraphMode::StreamingInternal,
                 GraphMode::StreamingExternal}) {
    if (mode_name(m) == s) return m;
  }
  throw FormatError("unknown graph mode '" + s + "'");
}

json kind_to_json(const LayerKind& kind) {
  json j = std::visit(
      overloaded{
          [](const layers::Input& p) { return json{{"frame_shape", shape_to_json(p.frame_shape)}}; },
          [](const layers::Conv2D& p) {
            return json{{"kernel_t", p.kernel_t},     {"kernel_f", p.kernel_f},
                        {"stride_t", p.stride_t},     {"stride_f", p.stride_f},
                        {"dilation_t", p.dilation_t}, {"filters", p.filters},
                        {"padding", padding_name(p.padding)}};
          },
          [](const layers::Conv1D& p) {
            return json{{"kernel_t", p.kernel_t},     {"stride_t", p.stride_t},
                        {"dilation_t", p.dilation_t}, {"filters", p.filters},
                        {"padding", padding_name(p.padding)}};
          },
          [](const layers::DepthwiseConv1D& p) {
            return json{{"kernel_t", p.kernel_t},
                        {"multiplier", p.multiplier},
                        {"padding", padding_name(p.padding)}};
          },
          [](const layers::Dense& p) { return json{{"units", p.units}, {"use_bias", p.use_bias}}; },
          [](const layers::Flatten&) { return json::object(); },
          [](const layers::GlobalAvgPoolTime&) { return json::object(); },
          [](const layers::AvgPool2D& p) {
            return json{{"pool_t", p.pool_t},
                        {"pool_f", p.pool_f},
                        {"stride_t", p.stride_t},
                        {"stride_f", p.stride_f}};
          },
          [](const layers::Activation& p) { return json{{"fn", activation_name(p.fn)}}; },
          [](const layers::BatchNormInference&) { return json::object(); },
          [](const layers::GRU& p) {
            return json{{"units", p.units}, {"return_sequences", p.return_sequences}};
          },
          [](const layers::BidirectionalGRU& p) { return json{{"units", p.units}}; },
          [](const layers::Add&) { return json::object(); },
          [](const layers::Concat& p) { return json{{"axis", p.axis}}; },
          [](const layers::MultiHeadAttention& p) {
            return json{{"heads", p.heads}, {"key_dim", p.key_dim}};
          },
          [](const layers::CenterSelect&) { return json::object(); },
          [](const layers::RingBuffer& p) { return json{{"length", p.length}}; },
          [](const layers::Stream& p) { return json{{"inner", kind_to_json(*p.inner)}}; },
      },
      kind.value);
  j["type"] = kind_name(kind);
  return j;
}

LayerKind kind_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  auto i64 = [&](const char* key) { return j.at(key).get<std::int64_t>(); };
  if (type == "Input") return layers::Input{shape_from_json(j.at("frame_shape"))};
  if (type == "Conv2D") {
    return layers::Conv2D{i64("kernel_t"), i64("kernel_f"), i64("stride_t"), i64("stride_f"),
                          i64("dilation_t"), i64("filters"),
                          padding_from(j.at("padding").get<std::string>())};
  }
  if (type == "Conv1D") {
    return layers::Conv1D{i64("kernel_t"), i64("stride_t"), i64("dilation_t"), i64("filters"),
                          padding_from(j.at("padding").get<std::string>())};
  }
  if (type == "DepthwiseConv1D") {
    return layers::DepthwiseConv1D{i64("kernel_t"), i64("multiplier"),
                                   padding_from(j.at("padding").get<std::string>())};
  }
  if (type == "Dense") return layers::Dense{i64("units"), j.at("use_bias").get<bool>()};
  if (type == "Flatten") return layers::Flatten{};
  if (type == "GlobalAvgPoolTime") return layers::GlobalAvgPoolTime{};
  if (type == "AvgPool2D") {
    return layers::AvgPool2D{i64("pool_t"), i64("pool_f"), i64("stride_t"), i64("stride_f")};
  }
  if (type == "Activation") return layers::Activation{activation_from(j.at("fn").get<std::string>())};
  if (type == "BatchNormInference") return layers::BatchNormInference{};
  if (type == "GRU") return layers::GRU{i64("units"), j.at("return_sequences").get<bool>()};
  if (type == "BidirectionalGRU") return layers::BidirectionalGRU{i64("units")};
  if (type == "Add") return layers::Add{};
  if (type == "Concat") return layers::Concat{i64("axis")};
  if (type == "MultiHeadAttention") return layers::MultiHeadAttention{i64("heads"), i64("key_dim")};
  if (type == "CenterSelect") return layers::CenterSelect{};
  if (type == "RingBuffer") return layers::RingBuffer{i64("length")};
  if (type == "Stream") return stream(kind_from_json(j.at("inner")));
  throw FormatError("unknown layer type '" + type + "'");
}

std::string_view state_kind_name(StateKind k) {
  return k == StateKind::RingBuffer ? "ring_buffer" : "recurrent";
}

StateKind state_kind_from(const std::string& s) {
  if (s == "ring_buffer") return StateKind::RingBuffer;
  if (s == "recurrent") return StateKind::Recurrent;
  throw FormatError("unknown state kind '" + s + "'");
}

// ---- container -------------------------------------------------------------

std::vector<std::uint8_t> pack(const json& manifest, std::span<const float> blob) {
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put_floats(out, blob);
  return out;
}

struct Unpacked {
  json manifest;
  std::vector<float> blob;
};

Unpacked unpack(const std::vector<std::uint8_t>& bytes, std::string_view expected_format) {
  constexpr std::size_t header = 4 + 4 + 8;
  if (bytes.size() < header) throw FormatError("file too short for header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(version));
  }
  const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (manifest_len > bytes.size() - header) throw FormatError("manifest length exceeds file");
  Unpacked u;
  try {
    u.manifest = json::parse(bytes.begin() + header, bytes.begin() + header + manifest_len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    if (u.manifest.at("format").get<std::string>() != expected_format) {
      throw FormatError("expected a " + std::string(expected_format) + " file");
    }
    if (u.manifest.at("format_version").get<std::uint32_t>() != kFormatVersion) {
      throw FormatError("manifest version mismatch");
    }
    const auto declared = u.manifest.at("blob_floats").get<std::uint64_t>();
    const auto blob_bytes = bytes.size() - header - manifest_len;
    if (blob_bytes != declared * 4) {
      throw FormatError("manifest declares " + std::to_string(declared) + " weight floats but blob has " +
                        std::to_string(blob_bytes) + " bytes");
    }
    u.blob.resize(declared);
    const std::uint8_t* p = bytes.data() + header + manifest_len;
    for (std::size_t i = 0; i < declared; ++i) {
      u.blob[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return u;
}

Tensor tensor_from_blob(const json& entry, const std::vector<float>& blob) {
  const Shape shape = shape_from_json(entry.at("shape"));
  const auto offset = entry.at("offset").get<std::uint64_t>();
  const auto length = entry.at("length").get<std::uint64_t>();
  if (offset > blob.size() || length > blob.size() - offset) {
    throw FormatError("weight range exceeds blob");
  }
  for (auto d : shape) {
    if (d < 1) throw FormatError("invalid weight shape");
  }
  if (static_cast<std::uint64_t>(shape_size(shape)) != length) {
    throw FormatError("weight length does not match its shape");
  }
  auto first = blob.begin() + static_cast<std::ptrdiff_t>(offset);
  return Tensor(shape, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(length)));
}

}  // namespace

std::vector<std::uint8_t> serialize_graph(const Graph& g) {
  if (g.time_len < 1) throw ShapeMismatch("graph shapes must be inferred before saving");
  json nodes = json::array();
  std::vector<float> blob;
  for (const auto& id : topo_order(g)) {
    const Node& node = g.node(id);
    json weights = json::array();
    for (const auto& [name, w] : node.weights) {
      weights.push_back({{"name", name},
                         {"shape", shape_to_json(w->shape())},
                         {"offset", blob.size()},
                         {"length", w->size()}});
      blob.insert(blob.end(), w->data().begin(), w->data().end());
    }
    nodes.push_back({{"id", node.id},
                     {"kind", kind_to_json(node.kind)},
                     {"inputs", node.inputs},
                     {"out_shape", shape_to_json(node.out_shape)},
                     {"weights", std::move(weights)}});
  }
  json states = json::array();
  for (const auto& s : g.state_io) {
    states.push_back({{"name", s.name},
                      {"shape", shape_to_json(s.shape)},
                      {"owner", s.owner},
                      {"kind", state_kind_name(s.kind)}});
  }
  json manifest = {{"format", "graph"},
                   {"format_version", kFormatVersion},
                   {"mode", mode_name(g.mode)},
                   {"time_len", g.time_len},
                   {"train_time_len", g.train_time_len},
                   {"input_ids", g.input_ids},
                   {"output_ids", g.output_ids},
                   {"state_io", std::move(states)},
                   {"nodes", std::move(nodes)},
                   {"blob_floats", blob.size()}};
  return pack(manifest, blob);
}

Graph deserialize_graph(const std::vector<std::uint8_t>& bytes) {
  const auto u = unpack(bytes, "graph");
  Graph g;
  try {
    const json& m = u.manifest;
    g.mode = mode_from(m.at("mode").get<std::string>());
    g.time_len = m.at("time_len").get<std::int64_t>();
    g.train_time_len = m.at("train_time_len").get<std::int64_t>();
    g.input_ids = m.at("input_ids").get<std::vector<std::string>>();
    g.output_ids = m.at("output_ids").get<std::vector<std::string>>();
    for (const auto& s : m.at("state_io")) {
      g.state_io.push_back(StateSpec{s.at("name").get<std::string>(), shape_from_json(s.at("shape")),
                                     s.at("owner").get<std::string>(),
                                     state_kind_from(s.at("kind").get<std::string>())});
    }
    for (const auto& n : m.at("nodes")) {
      Node node;
      node.id = n.at("id").get<std::string>();
      node.kind = kind_from_json(n.at("kind"));
      node.inputs = n.at("inputs").get<std::vector<std::string>>();
      node.out_shape = shape_from_json(n.at("out_shape"));
      for (const auto& w : n.at("weights")) {
        node.weights.emplace(w.at("name").get<std::string>(),
                             std::make_shared<const Tensor>(tensor_from_blob(w, u.blob)));
      }
      const auto id = node.id;
      if (!g.nodes.emplace(id, std::move(node)).second) throw FormatError("duplicate node '" + id + "'");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }

  // Structural check: the stored shapes must be what inference produces.
  try {
    if (g.time_len < 1) throw FormatError("time_len must be positive");
    for (const auto& id : g.input_ids) g.node(id);
    for (const auto& id : g.output_ids) g.node(id);
    const Graph checked = infer_shapes(g, g.time_len);
    for (const auto& [id, node] : checked.nodes) {
      if (node.out_shape != g.node(id).out_shape) {
        throw FormatError("stored shape of node '" + id + "' is inconsistent");
      }
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("invalid graph: ") + e.what());
  }
  return g;
}

void save(const Graph& g, const std::filesystem::path& path) { write_file(path, serialize_graph(g)); }

Graph load(const std::filesystem::path& path) { return deserialize_graph(read_file(path)); }

std::vector<std::uint8_t> serialize_tensor(const Tensor& t) {
  json manifest = {{"format", "tensor"},
                   {"format_version", kFormatVersion},
                   {"shape", shape_to_json(t.shape())},
                   {"blob_floats", t.size()}};
  return pack(manifest, t.data());
}

Tensor deserialize_tensor(const std::vector<std::uint8_t>& bytes) {
  auto u = unpack(bytes, "tensor");
  try {
    Shape shape = shape_from_json(u.manifest.at("shape"));
    for (auto d : shape) {
      if (d < 1) throw FormatError("invalid tensor shape");
    }
    if (static_cast<std::size_t>(shape_size(shape)) != u.blob.size()) {
      throw FormatError("tensor shape does not match blob length");
    }
    return Tensor(std::move(shape), std::move(u.blob));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file(path, serialize_tensor(t));
}

Tensor load_tensor(const std::filesystem::path& path) { return deserialize_tensor(read_file(path)); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace streamkws
