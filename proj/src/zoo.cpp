#include "streamkws/zoo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "streamkws/errors.hpp"

namespace streamkws {

namespace {

constexpr std::array<std::pair<ModelName, std::string_view>, 10> kNames{{
    {ModelName::DNN, "dnn"},
    {ModelName::CNN, "cnn"},
    {ModelName::CNN_STRIDED, "cnn_strided"},
    {ModelName::CRNN, "crnn"},
    {ModelName::GRU_NET, "gru_net"},
    {ModelName::DSCNN, "dscnn"},
    {ModelName::DSCNN_STRIDED, "dscnn_strided"},
    {ModelName::SVDF_NET, "svdf_net"},
    {ModelName::TC_RESNET, "tc_resnet"},
    {ModelName::MHATT_RNN, "mhatt_rnn"},
}};

std::int64_t trailing(const Shape& s) {
  std::int64_t n = 1;
  for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
  return n;
}

// Tracks shapes while adding nodes so weights can be sized from the actual inputs.
class ZooBuilder {
 public:
  ZooBuilder(std::uint64_t seed, std::int64_t frames) : rng_(seed), frames_(frames) {}

  std::string input(std::int64_t features) {
    gb_.input("input", {features});
    shapes_["input"] = {frames_, features};
    return "input";
  }

  std::string conv2d(const std::string& id, const std::string& in, std::int64_t kt,
                     std::int64_t kf, std::int64_t filters, std::int64_t stride_t = 1,
                     Padding padding = Padding::Causal) {
    const Shape& x = shapes_.at(in);
    const std::int64_t c = x.size() == 3 ? x[2] : 1;
    WeightMap w{{"kernel", glorot({kt, kf, c, filters}, kt * kf * c, kt * kf * filters)},
                {"bias", bias(filters)}};
    return add(id, layers::Conv2D{kt, kf, stride_t, 1, 1, filters, padding}, {in}, std::move(w));
  }

  std::string conv1d(const std::string& id, const std::string& in, std::int64_t kt,
                     std::int64_t filters) {
    const std::int64_t f = shapes_.at(in)[1];
    WeightMap w{{"kernel", glorot({kt, f, filters}, kt * f, kt * filters)},
                {"bias", bias(filters)}};
    return add(id, layers::Conv1D{kt, 1, 1, filters, Padding::Causal}, {in}, std::move(w));
  }

  std::string depthwise(const std::string& id, const std::string& in, std::int64_t kt) {
    const std::int64_t ch = trailing(shapes_.at(in));
    WeightMap w{{"kernel", glorot({kt, ch, 1}, kt, kt)}, {"bias", bias(ch)}};
    return add(id, layers::DepthwiseConv1D{kt, 1, Padding::Causal}, {in}, std::move(w));
  }

  std::string dense(const std::string& id, const std::string& in, std::int64_t units,
                    bool use_bias = true) {
    const std::int64_t f = shapes_.at(in).back();
    WeightMap w{{"kernel", glorot({f, units}, f, units)}};
    if (use_bias) w.emplace("bias", bias(units));
    return add(id, layers::Dense{units, use_bias}, {in}, std::move(w));
  }

  std::string batchnorm(const std::string& id, const std::string& in) {
    const std::int64_t f = shapes_.at(in).back();
    WeightMap w{{"scale", uniform({f}, 0.5, 1.5)}, {"offset", bias(f)}};
    return add(id, layers::BatchNormInference{}, {in}, std::move(w));
  }

  std::string act(const std::string& id, const std::string& in, ActivationFn fn) {
    return add(id, layers::Activation{fn}, {in});
  }

  std::string gru(const std::string& id, const std::string& in, std::int64_t units,
                  bool return_sequences) {
    WeightMap w;
    add_gru_weights(w, "", trailing(shapes_.at(in)), units);
    return add(id, layers::GRU{units, return_sequences}, {in}, std::move(w));
  }

  std::string bigru(const std::string& id, const std::string& in, std::int64_t units) {
    WeightMap w;
    add_gru_weights(w, "forward/", trailing(shapes_.at(in)), units);
    add_gru_weights(w, "backward/", trailing(shapes_.at(in)), units);
    return add(id, layers::BidirectionalGRU{units}, {in}, std::move(w));
  }

  std::string attention(const std::string& id, const std::string& query, const std::string& kv,
                        std::int64_t heads, std::int64_t key_dim) {
    const std::int64_t dq = shapes_.at(query)[1], dkv = shapes_.at(kv)[1];
    const std::int64_t d = heads * key_dim;
    WeightMap w{{"query", glorot({dq, d}, dq, d)},
                {"key", glorot({dkv, d}, dkv, d)},
                {"value", glorot({dkv, d}, dkv, d)},
                {"output", glorot({d, d}, d, d)}};
    return add(id, layers::MultiHeadAttention{heads, key_dim}, {query, kv}, std::move(w));
  }

  std::string add(const std::string& id, LayerKind kind, std::vector<std::string> inputs,
                  WeightMap weights = {}) {
    std::vector<Shape> in;
    for (const auto& i : inputs) in.push_back(shapes_.at(i));
    const Node probe{id, kind, inputs, weights, {}};
    shapes_[id] = infer_node_shape(probe, in);
    gb_.add(id, std::move(kind), std::move(inputs), std::move(weights));
    return id;
  }

  Graph finish(const std::string& output) && {
    gb_.output(output);
    return infer_shapes(std::move(gb_).build(), frames_);
  }

 private:
  // Uniform in [lo, hi) from the top 53 bits of each draw, identical across standard libraries.
  std::shared_ptr<const Tensor> uniform(Shape shape, double lo, double hi) {
    std::vector<float> v(static_cast<std::size_t>(shape_size(shape)));
    for (auto& x : v) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      x = static_cast<float>(lo + (hi - lo) * u);
    }
    return std::make_shared<const Tensor>(std::move(shape), std::move(v));
  }

  std::shared_ptr<const Tensor> glorot(Shape shape, std::int64_t fan_in, std::int64_t fan_out) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform(std::move(shape), -s, s);
  }

  std::shared_ptr<const Tensor> bias(std::int64_t n) { return uniform({n}, -0.1, 0.1); }

  void add_gru_weights(WeightMap& w, const std::string& prefix, std::int64_t features,
                       std::int64_t units) {
    for (const char* gate : {"z", "r", "h"}) {
      w.emplace(prefix + "w_" + gate, glorot({features, units}, features, units));
      w.emplace(prefix + "u_" + gate, glorot({units, units}, units, units));
      w.emplace(prefix + "b_" + gate, bias(units));
    }
  }

  std::mt19937_64 rng_;
  std::int64_t frames_;
  GraphBuilder gb_;
  std::map<std::string, Shape> shapes_;
};

std::string classifier(ZooBuilder& b, const std::string& in, std::int64_t classes) {
  return b.act("softmax", b.dense("logits", in, classes), ActivationFn::Softmax);
}

Graph build_dnn(ZooBuilder b, const ZooSpec& s) {
  auto x = b.input(s.input_features);
  x = b.act("relu_1", b.dense("dense_1", x, 64), ActivationFn::Relu);
  x = b.act("relu_2", b.dense("dense_2", x, 32), ActivationFn::Relu);
  x = b.add("stack", layers::Flatten{}, {x});
  x = b.act("relu_3", b.dense("dense_3", x, 64), ActivationFn::Relu);
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

Graph build_cnn(ZooBuilder b, const ZooSpec& s, std::int64_t stride_t) {
  auto x = b.input(s.input_features);
  x = b.act("relu_1", b.conv2d("conv_1", x, 3, 3, 24, stride_t), ActivationFn::Relu);
  x = b.act("relu_2", b.conv2d("conv_2", x, 3, 3, 36), ActivationFn::Relu);
  x = b.add("flatten", layers::Flatten{}, {x});
  x = b.act("relu_3", b.dense("dense_1", x, 32), ActivationFn::Relu);
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

Graph build_crnn(ZooBuilder b, const ZooSpec& s) {
  auto x = b.input(s.input_features);
  x = b.act("relu_1", b.conv2d("conv_1", x, 3, 3, 16), ActivationFn::Relu);
  x = b.gru("gru", x, 32, false);
  x = b.act("relu_2", b.dense("dense_1", x, 32), ActivationFn::Relu);
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

Graph build_gru_net(ZooBuilder b, const ZooSpec& s) {
  auto x = b.input(s.input_features);
  x = b.gru("gru_1", x, 48, true);
  x = b.gru("gru_2", x, 48, false);
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

Graph build_dscnn(ZooBuilder b, const ZooSpec& s, std::int64_t stride_t) {
  auto x = b.input(s.input_features);
  x = b.conv2d("conv_1", x, 3, 3, 32, stride_t);
  x = b.act("relu_1", b.batchnorm("bn_1", x), ActivationFn::Relu);
  for (int i = 1; i <= 2; ++i) {
    const auto n = std::to_string(i);
    x = b.depthwise("dw_" + n, x, 3);
    x = b.act("dw_relu_" + n, b.batchnorm("dw_bn_" + n, x), ActivationFn::Relu);
    x = b.conv2d("pw_" + n, x, 1, 1, 32);
    x = b.act("pw_relu_" + n, b.batchnorm("pw_bn_" + n, x), ActivationFn::Relu);
  }
  x = b.add("avg_pool", layers::GlobalAvgPoolTime{}, {x});
  x = b.add("flatten", layers::Flatten{}, {x});
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

Graph build_svdf(ZooBuilder b, const ZooSpec& s) {
  auto x = b.input(s.input_features);
  for (int i = 1; i <= 4; ++i) {
    const auto n = "svdf_" + std::to_string(i);
    x = b.dense(n + "_features", x, 64, false);
    x = b.act(n + "_relu", b.depthwise(n + "_time", x, 8), ActivationFn::Relu);
    x = b.dense(n + "_bottleneck", x, 32);
  }
  x = b.add("avg_pool", layers::GlobalAvgPoolTime{}, {x});
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

Graph build_tc_resnet(ZooBuilder b, const ZooSpec& s) {
  auto x = b.input(s.input_features);
  x = b.conv1d("conv_0", x, 3, 16);
  const std::array<std::int64_t, 3> widths{24, 32, 48};
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const auto n = "block_" + std::to_string(i + 1);
    auto y = b.conv1d(n + "_conv_a", x, 9, widths[i]);
    y = b.act(n + "_relu_a", b.batchnorm(n + "_bn_a", y), ActivationFn::Relu);
    y = b.batchnorm(n + "_bn_b", b.conv1d(n + "_conv_b", y, 9, widths[i]));
    auto shortcut = b.batchnorm(n + "_bn_skip", b.conv1d(n + "_skip", x, 1, widths[i]));
    x = b.act(n + "_relu", b.add(n + "_add", layers::Add{}, {y, shortcut}), ActivationFn::Relu);
  }
  x = b.add("avg_pool", layers::GlobalAvgPoolTime{}, {x});
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

Graph build_mhatt_rnn(ZooBuilder b, const ZooSpec& s) {
  auto x = b.input(s.input_features);
  x = b.act("relu_1", b.conv2d("conv_1", x, 3, 3, 8), ActivationFn::Relu);
  const auto seq = b.bigru("bigru", x, 32);
  const auto query = b.add("center", layers::CenterSelect{}, {seq});
  x = b.attention("attention", query, seq, 4, 16);
  x = b.act("relu_2", b.dense("dense_1", x, 32), ActivationFn::Relu);
  return std::move(b).finish(classifier(b, x, s.num_classes));
}

// Frames one node's output frame spans in its first input; whole-sequence layers span all of it.
// A sequence-returning GRU carries the past in its state and counts as one frame.
std::int64_t local_span(const Node& node, const Shape& in) {
  const LayerKind& k = unwrap(node.kind);
  if (const auto* p = std::get_if<layers::Conv2D>(&k.value)) return p->dilation_t * (p->kernel_t - 1) + 1;
  if (const auto* p = std::get_if<layers::Conv1D>(&k.value)) return p->dilation_t * (p->kernel_t - 1) + 1;
  if (const auto* p = std::get_if<layers::DepthwiseConv1D>(&k.value)) return p->kernel_t;
  if (const auto* p = std::get_if<layers::AvgPool2D>(&k.value)) return p->pool_t;
  if (const auto* p = std::get_if<layers::RingBuffer>(&k.value)) return p->length;
  if (const auto* p = std::get_if<layers::GRU>(&k.value)) return p->return_sequences ? 1 : in.at(0);
  if (std::holds_alternative<layers::Flatten>(k.value) ||
      std::holds_alternative<layers::GlobalAvgPoolTime>(k.value) ||
      std::holds_alternative<layers::BidirectionalGRU>(k.value) ||
      std::holds_alternative<layers::MultiHeadAttention>(k.value)) {
    return in.at(0);
  }
  return 1;
}

bool is_conv(const LayerKind& kind) {
  return kind_as<layers::Conv2D>(kind) || kind_as<layers::Conv1D>(kind) ||
         kind_as<layers::DepthwiseConv1D>(kind);
}

}  // namespace

std::string_view model_name(ModelName name) {
  for (const auto& [n, s] : kNames) {
    if (n == name) return s;
  }
  return "unknown";
}

std::optional<ModelName> parse_model_name(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& [n, s] : kNames) {
    if (s == lower) return n;
  }
  return std::nullopt;
}

const std::vector<ModelName>& all_models() {
  static const std::vector<ModelName> models = [] {
    std::vector<ModelName> v;
    for (const auto& [n, s] : kNames) v.push_back(n);
    return v;
  }();
  return models;
}

std::string valid_model_names() {
  std::string out;
  for (const auto& [n, s] : kNames) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

Graph build(const ZooSpec& spec) {
  if (spec.num_classes < 2) throw InvalidSpec("num_classes must be at least 2");
  if (spec.input_frames < 1) throw InvalidSpec("input_frames must be positive");
  if (spec.input_features < 3) throw InvalidSpec("input_features must be at least 3");
  ZooBuilder b(spec.seed, spec.input_frames);
  Graph g;
  try {
    switch (spec.name) {
      case ModelName::DNN: g = build_dnn(std::move(b), spec); break;
      case ModelName::CNN: g = build_cnn(std::move(b), spec, 1); break;
      case ModelName::CNN_STRIDED: g = build_cnn(std::move(b), spec, 2); break;
      case ModelName::CRNN: g = build_crnn(std::move(b), spec); break;
      case ModelName::GRU_NET: g = build_gru_net(std::move(b), spec); break;
      case ModelName::DSCNN: g = build_dscnn(std::move(b), spec, 1); break;
      case ModelName::DSCNN_STRIDED: g = build_dscnn(std::move(b), spec, 2); break;
      case ModelName::SVDF_NET: g = build_svdf(std::move(b), spec); break;
      case ModelName::TC_RESNET: g = build_tc_resnet(std::move(b), spec); break;
      case ModelName::MHATT_RNN: g = build_mhatt_rnn(std::move(b), spec); break;
    }
  } catch (const ShapeMismatch& e) {
    throw InvalidSpec(std::string(model_name(spec.name)) + ": " + e.what());
  }
  for (const auto& [id, node] : g.nodes) {
    if (!is_conv(node.kind)) continue;
    const auto span = local_span(node, {});
    if (span > spec.input_frames) {
      throw InvalidSpec(std::string(model_name(spec.name)) + ": input_frames " +
                        std::to_string(spec.input_frames) + " is shorter than the " +
                        std::to_string(span) + "-frame kernel of '" + id + "'");
    }
  }
  return g;
}

Graph build_conv_flatten_dense(std::uint64_t seed, std::int64_t units) {
  ZooBuilder b(seed, 6);
  auto x = b.input(3);
  x = b.conv2d("conv", x, 3, 3, 1, 1, Padding::Valid);
  x = b.add("flatten", layers::Flatten{}, {x});
  return std::move(b).finish(b.dense("dense", x, units));
}

std::int64_t count_params(const Graph& g) {
  std::int64_t n = 0;
  for (const auto& [id, node] : g.nodes) {
    for (const auto& [name, w] : node.weights) n += static_cast<std::int64_t>(w->size());
  }
  return n;
}

std::int64_t receptive_field(const Graph& g) {
  std::map<std::string, std::int64_t, std::less<>> rf;
  std::int64_t best = 1;
  for (const auto& id : topo_order(g)) {
    const Node& node = g.node(id);
    if (node.inputs.empty()) {
      rf[id] = 1;
      continue;
    }
    std::int64_t from_inputs = 1;
    for (const auto& in : node.inputs) from_inputs = std::max(from_inputs, rf.at(in));
    const Shape& in_shape = g.node(node.inputs.front()).out_shape;
    rf[id] = from_inputs + local_span(node, in_shape) - 1;
    best = std::max(best, rf[id]);
  }
  return best;
}

}  // namespace streamkws
