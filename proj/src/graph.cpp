#include "streamkws/graph.hpp"

#include <algorithm>
#include <set>

#include "streamkws/errors.hpp"

namespace streamkws {

namespace layers {

bool Stream::operator==(const Stream& other) const {
  if (!inner || !other.inner) return inner == other.inner;
  return *inner == *other.inner;
}

}  // namespace layers

LayerKind stream(LayerKind inner) {
  return layers::Stream{std::make_shared<const LayerKind>(std::move(inner))};
}

const LayerKind& unwrap(const LayerKind& kind) {
  const LayerKind* k = &kind;
  while (const auto* s = std::get_if<layers::Stream>(&k->value)) {
    if (!s->inner) throw InvalidShape("Stream annotation without an inner layer");
    k = s->inner.get();
  }
  return *k;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

std::string_view kind_name(const LayerKind& kind) {
  return std::visit(
      overloaded{
          [](const layers::Input&) { return std::string_view("Input"); },
          [](const layers::Conv2D&) { return std::string_view("Conv2D"); },
          [](const layers::Conv1D&) { return std::string_view("Conv1D"); },
          [](const layers::DepthwiseConv1D&) { return std::string_view("DepthwiseConv1D"); },
          [](const layers::Dense&) { return std::string_view("Dense"); },
          [](const layers::Flatten&) { return std::string_view("Flatten"); },
          [](const layers::GlobalAvgPoolTime&) { return std::string_view("GlobalAvgPoolTime"); },
          [](const layers::AvgPool2D&) { return std::string_view("AvgPool2D"); },
          [](const layers::Activation&) { return std::string_view("Activation"); },
          [](const layers::BatchNormInference&) {
            return std::string_view("BatchNormInference");
          },
          [](const layers::GRU&) { return std::string_view("GRU"); },
          [](const layers::BidirectionalGRU&) { return std::string_view("BidirectionalGRU"); },
          [](const layers::Add&) { return std::string_view("Add"); },
          [](const layers::Concat&) { return std::string_view("Concat"); },
          [](const layers::MultiHeadAttention&) {
            return std::string_view("MultiHeadAttention");
          },
          [](const layers::CenterSelect&) { return std::string_view("CenterSelect"); },
          [](const layers::RingBuffer&) { return std::string_view("RingBuffer"); },
          [](const layers::Stream&) { return std::string_view("Stream"); },
      },
      kind.value);
}

std::string_view padding_name(Padding p) { return p == Padding::Causal ? "causal" : "valid"; }

std::string_view activation_name(ActivationFn fn) {
  switch (fn) {
    case ActivationFn::Relu: return "relu";
    case ActivationFn::Sigmoid: return "sigmoid";
    case ActivationFn::Tanh: return "tanh";
    case ActivationFn::Softmax: return "softmax";
  }
  return "?";
}

std::string_view mode_name(GraphMode mode) {
  switch (mode) {
    case GraphMode::NonStreaming: return "non_streaming";
    case GraphMode::StreamingInternal: return "streaming_internal";
    case GraphMode::StreamingExternal: return "streaming_external";
  }
  return "?";
}

const Tensor& Node::weight(std::string_view name) const {
  auto it = weights.find(name);
  if (it == weights.end() || !it->second) {
    throw ShapeMismatch("node '" + id + "' has no weight '" + std::string(name) + "'");
  }
  return *it->second;
}

const Node& Graph::node(std::string_view id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw OutOfRange("no node '" + std::string(id) + "'");
  return it->second;
}

const std::string& GraphBuilder::input(std::string id, Shape frame_shape) {
  Shape out{kSymbolicTime};
  out.insert(out.end(), frame_shape.begin(), frame_shape.end());
  graph_.input_ids.push_back(id);
  const auto& node = add(std::move(id), layers::Input{std::move(frame_shape)}, {});
  graph_.nodes.at(node).out_shape = std::move(out);
  return node;
}

const std::string& GraphBuilder::add(std::string id, LayerKind kind,
                                     std::vector<std::string> inputs, WeightMap weights) {
  if (id.empty()) throw InvalidSpec("node id must not be empty");
  if (graph_.nodes.contains(id)) throw InvalidSpec("duplicate node id '" + id + "'");
  for (const auto& in : inputs) {
    if (!graph_.nodes.contains(in)) {
      throw InvalidSpec("node '" + id + "' references unknown input '" + in + "'");
    }
  }
  Node node{id, std::move(kind), std::move(inputs), std::move(weights), {}};
  auto [it, _] = graph_.nodes.emplace(id, std::move(node));
  return it->first;
}

void GraphBuilder::output(std::string id) {
  if (!graph_.nodes.contains(id)) throw InvalidSpec("unknown output node '" + id + "'");
  graph_.output_ids.push_back(std::move(id));
}

Graph GraphBuilder::build() && {
  topo_order(graph_);
  return std::move(graph_);
}

std::int64_t conv_output_length(std::int64_t in_len, std::int64_t kernel, std::int64_t stride,
                                std::int64_t dilation, Padding padding) {
  if (padding == Padding::Causal) return (in_len + stride - 1) / stride;
  const std::int64_t span = dilation * (kernel - 1) + 1;
  if (in_len < span) return 0;
  return (in_len - span) / stride + 1;
}

std::vector<std::string> topo_order(const Graph& g) {
  std::map<std::string_view, std::size_t> pending;
  std::map<std::string_view, std::vector<std::string_view>> consumers;
  for (const auto& [id, node] : g.nodes) {
    pending[id] = node.inputs.size();
    for (const auto& in : node.inputs) {
      if (!g.nodes.contains(in)) {
        throw InvalidSpec("node '" + id + "' references unknown input '" + in + "'");
      }
      consumers[in].push_back(id);
    }
  }
  std::set<std::string_view> ready;
  for (const auto& [id, n] : pending) {
    if (n == 0) ready.insert(id);
  }
  std::vector<std::string> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    const auto id = *ready.begin();
    ready.erase(ready.begin());
    order.emplace_back(id);
    for (const auto consumer : consumers[id]) {
      if (--pending[consumer] == 0) ready.insert(consumer);
    }
  }
  if (order.size() != g.nodes.size()) throw CycleDetected("graph contains a cycle");
  return order;
}

namespace {

[[noreturn]] void mismatch(const Node& node, const std::string& what) {
  throw ShapeMismatch("node '" + node.id + "' (" + std::string(kind_name(node.kind)) +
                      "): " + what);
}

void expect_inputs(const Node& node, std::span<const Shape> in, std::size_t lo,
                   std::size_t hi) {
  if (in.size() < lo || in.size() > hi) {
    mismatch(node, "unexpected number of inputs (" + std::to_string(in.size()) + ")");
  }
}

void expect_weight(const Node& node, std::string_view name, const Shape& shape) {
  const Tensor& w = node.weight(name);
  if (w.shape() != shape) {
    mismatch(node, "weight '" + std::string(name) + "' has shape " +
                       shape_to_string(w.shape()) + ", expected " + shape_to_string(shape));
  }
}

void expect_weight_names(const Node& node, std::initializer_list<std::string_view> names) {
  if (node.weights.size() != names.size()) {
    mismatch(node, "expected " + std::to_string(names.size()) + " weights, found " +
                       std::to_string(node.weights.size()));
  }
  for (auto n : names) node.weight(n);
}

void expect_gru_weights(const Node& node, std::string_view prefix, std::int64_t features,
                        std::int64_t units) {
  const std::string p(prefix);
  for (const char* gate : {"z", "r", "h"}) {
    expect_weight(node, p + "w_" + gate, {features, units});
    expect_weight(node, p + "u_" + gate, {units, units});
    expect_weight(node, p + "b_" + gate, {units});
  }
}

void check_positive(const Node& node, std::initializer_list<std::int64_t> values) {
  for (auto v : values) {
    if (v < 1) mismatch(node, "layer parameters must be >= 1");
  }
}

std::int64_t checked_length(const Node& node, std::int64_t len) {
  if (len < 1) mismatch(node, "input is shorter than the layer's time span");
  return len;
}

std::int64_t trailing_size(const Shape& s) {
  return shape_size(Shape(s.begin() + 1, s.end()));
}

}  // namespace

Shape infer_node_shape(const Node& node, std::span<const Shape> in) {
  const LayerKind& kind = unwrap(node.kind);
  return std::visit(
      overloaded{
          [&](const layers::Input&) -> Shape {
            expect_inputs(node, in, 0, 0);
            return node.out_shape;
          },
          [&](const layers::Conv2D& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.kernel_t, p.kernel_f, p.stride_t, p.stride_f,
                                  p.dilation_t, p.filters});
            const Shape& x = in[0];
            if (x.size() != 2 && x.size() != 3) mismatch(node, "expects [T,F] or [T,F,C] input");
            const std::int64_t channels = x.size() == 3 ? x[2] : 1;
            expect_weight_names(node, {"kernel", "bias"});
            expect_weight(node, "kernel", {p.kernel_t, p.kernel_f, channels, p.filters});
            expect_weight(node, "bias", {p.filters});
            const auto t = checked_length(
                node, conv_output_length(x[0], p.kernel_t, p.stride_t, p.dilation_t, p.padding));
            const auto f = checked_length(
                node, conv_output_length(x[1], p.kernel_f, p.stride_f, 1, Padding::Valid));
            return {t, f, p.filters};
          },
          [&](const layers::Conv1D& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.kernel_t, p.stride_t, p.dilation_t, p.filters});
            const Shape& x = in[0];
            if (x.size() != 2) mismatch(node, "expects [T,F] input");
            expect_weight_names(node, {"kernel", "bias"});
            expect_weight(node, "kernel", {p.kernel_t, x[1], p.filters});
            expect_weight(node, "bias", {p.filters});
            const auto t = checked_length(
                node, conv_output_length(x[0], p.kernel_t, p.stride_t, p.dilation_t, p.padding));
            return {t, p.filters};
          },
          [&](const layers::DepthwiseConv1D& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.kernel_t, p.multiplier});
            const Shape& x = in[0];
            if (x.size() < 2) mismatch(node, "expects [T,...] input with channels");
            const auto channels = trailing_size(x);
            expect_weight_names(node, {"kernel", "bias"});
            expect_weight(node, "kernel", {p.kernel_t, channels, p.multiplier});
            expect_weight(node, "bias", {channels * p.multiplier});
            Shape out = x;
            out[0] = checked_length(node, conv_output_length(x[0], p.kernel_t, 1, 1, p.padding));
            out.back() *= p.multiplier;
            return out;
          },
          [&](const layers::Dense& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.units});
            const Shape& x = in[0];
            if (x.size() < 2) mismatch(node, "expects [T,...,F] input");
            if (p.use_bias) {
              expect_weight_names(node, {"kernel", "bias"});
              expect_weight(node, "bias", {p.units});
            } else {
              expect_weight_names(node, {"kernel"});
            }
            expect_weight(node, "kernel", {x.back(), p.units});
            Shape out = x;
            out.back() = p.units;
            return out;
          },
          [&](const layers::Flatten&) -> Shape {
            expect_inputs(node, in, 1, 1);
            expect_weight_names(node, {});
            return {1, shape_size(in[0])};
          },
          [&](const layers::GlobalAvgPoolTime&) -> Shape {
            expect_inputs(node, in, 1, 1);
            expect_weight_names(node, {});
            Shape out = in[0];
            out[0] = 1;
            if (out.size() == 1) out.push_back(1);
            return out;
          },
          [&](const layers::AvgPool2D& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.pool_t, p.pool_f, p.stride_t, p.stride_f});
            expect_weight_names(node, {});
            const Shape& x = in[0];
            if (x.size() != 3) mismatch(node, "expects [T,F,C] input");
            const auto t = checked_length(
                node, conv_output_length(x[0], p.pool_t, p.stride_t, 1, Padding::Valid));
            const auto f = checked_length(
                node, conv_output_length(x[1], p.pool_f, p.stride_f, 1, Padding::Valid));
            return {t, f, x[2]};
          },
          [&](const layers::Activation&) -> Shape {
            expect_inputs(node, in, 1, 1);
            expect_weight_names(node, {});
            return in[0];
          },
          [&](const layers::BatchNormInference&) -> Shape {
            expect_inputs(node, in, 1, 1);
            expect_weight_names(node, {"scale", "offset"});
            expect_weight(node, "scale", {in[0].back()});
            expect_weight(node, "offset", {in[0].back()});
            return in[0];
          },
          [&](const layers::GRU& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.units});
            if (in[0].size() < 2) mismatch(node, "expects [T,...] input");
            if (node.weights.size() != 9) mismatch(node, "expects 9 GRU weights");
            expect_gru_weights(node, "", trailing_size(in[0]), p.units);
            return {p.return_sequences ? in[0][0] : 1, p.units};
          },
          [&](const layers::BidirectionalGRU& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.units});
            if (in[0].size() < 2) mismatch(node, "expects [T,...] input");
            if (node.weights.size() != 18) mismatch(node, "expects 18 GRU weights");
            expect_gru_weights(node, "forward/", trailing_size(in[0]), p.units);
            expect_gru_weights(node, "backward/", trailing_size(in[0]), p.units);
            return {in[0][0], 2 * p.units};
          },
          [&](const layers::Add&) -> Shape {
            if (in.size() < 2) mismatch(node, "expects at least two inputs");
            expect_weight_names(node, {});
            for (const auto& s : in) {
              if (s != in[0]) mismatch(node, "input shapes differ");
            }
            return in[0];
          },
          [&](const layers::Concat& p) -> Shape {
            if (in.empty()) mismatch(node, "expects at least one input");
            expect_weight_names(node, {});
            const auto rank = static_cast<std::int64_t>(in[0].size());
            if (p.axis < 0 || p.axis >= rank) mismatch(node, "concat axis out of range");
            Shape out = in[0];
            out[p.axis] = 0;
            for (const auto& s : in) {
              if (static_cast<std::int64_t>(s.size()) != rank) mismatch(node, "rank differs");
              for (std::int64_t a = 0; a < rank; ++a) {
                if (a != p.axis && s[a] != in[0][a]) mismatch(node, "input shapes differ");
              }
              out[p.axis] += s[p.axis];
            }
            return out;
          },
          [&](const layers::MultiHeadAttention& p) -> Shape {
            expect_inputs(node, in, 2, 2);
            check_positive(node, {p.heads, p.key_dim});
            const Shape& q = in[0];
            const Shape& kv = in[1];
            if (q.size() != 2 || kv.size() != 2) mismatch(node, "expects [T,D] inputs");
            const auto d = p.heads * p.key_dim;
            expect_weight_names(node, {"query", "key", "value", "output"});
            expect_weight(node, "query", {q[1], d});
            expect_weight(node, "key", {kv[1], d});
            expect_weight(node, "value", {kv[1], d});
            expect_weight(node, "output", {d, d});
            return {q[0], d};
          },
          [&](const layers::CenterSelect&) -> Shape {
            expect_inputs(node, in, 1, 1);
            expect_weight_names(node, {});
            Shape out = in[0];
            out[0] = 1;
            return out;
          },
          [&](const layers::RingBuffer& p) -> Shape {
            expect_inputs(node, in, 1, 1);
            check_positive(node, {p.length});
            expect_weight_names(node, {});
            if (in[0][0] != 1) mismatch(node, "ring buffer input must be a single frame");
            Shape out = in[0];
            out[0] = p.length;
            return out;
          },
          [&](const layers::Stream&) -> Shape { mismatch(node, "unresolved Stream"); },
      },
      kind.value);
}

Graph infer_shapes(const Graph& g, std::int64_t input_time_len) {
  if (input_time_len < 1) throw ShapeMismatch("input time length must be >= 1");
  if (g.is_streaming() && input_time_len != 1) {
    throw ShapeMismatch("streaming graphs take exactly one frame per step");
  }
  Graph out = g;
  for (const auto& id : topo_order(out)) {
    Node& node = out.nodes.at(id);
    if (const auto* input = kind_as<layers::Input>(node.kind)) {
      for (auto d : input->frame_shape) {
        if (d < 1) mismatch(node, "invalid frame shape");
      }
      Shape s{input_time_len};
      s.insert(s.end(), input->frame_shape.begin(), input->frame_shape.end());
      node.out_shape = std::move(s);
      continue;
    }
    std::vector<Shape> in_shapes;
    in_shapes.reserve(node.inputs.size());
    for (const auto& in : node.inputs) in_shapes.push_back(out.nodes.at(in).out_shape);
    node.out_shape = infer_node_shape(node, in_shapes);
  }
  out.time_len = input_time_len;
  if (out.train_time_len == 0 && !out.is_streaming()) out.train_time_len = input_time_len;
  return out;
}

}  // namespace streamkws
