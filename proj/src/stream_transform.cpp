#include "streamkws/stream_transform.hpp"

#include <algorithm>
#include <set>

#include "streamkws/errors.hpp"

namespace streamkws {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr const char* kStrideReason = "stride in time dimension";
constexpr const char* kPoolReason = "pooling in time dimension";

// Layers whose output no longer has a time axis to stream over.
bool reduces_time(const LayerKind& kind) {
  if (const auto* gru = kind_as<layers::GRU>(kind)) return !gru->return_sequences;
  return kind_as<layers::Flatten>(kind) || kind_as<layers::GlobalAvgPoolTime>(kind) ||
         kind_as<layers::CenterSelect>(kind) || kind_as<layers::MultiHeadAttention>(kind);
}

std::string unique_id(const Graph& g, const std::string& base) {
  std::string id = base;
  for (int n = 1; g.nodes.contains(id); ++n) id = base + "_" + std::to_string(n);
  return id;
}

LayerKind with_padding(const LayerKind& kind, Padding padding) {
  const LayerKind& k = unwrap(kind);
  if (auto* p = std::get_if<layers::Conv2D>(&k.value)) {
    auto c = *p;
    c.padding = padding;
    return c;
  }
  if (auto* p = std::get_if<layers::Conv1D>(&k.value)) {
    auto c = *p;
    c.padding = padding;
    return c;
  }
  if (auto* p = std::get_if<layers::DepthwiseConv1D>(&k.value)) {
    auto c = *p;
    c.padding = padding;
    return c;
  }
  return k;
}

}  // namespace

std::int64_t effective_time_filter_size(const LayerKind& kind, const Shape& in_shape) {
  return std::visit(
      overloaded{
          [](const layers::Conv2D& p) -> std::int64_t {
            if (p.stride_t > 1) throw NotStreamable("", kStrideReason);
            return p.dilation_t * (p.kernel_t - 1) + 1;
          },
          [](const layers::Conv1D& p) -> std::int64_t {
            if (p.stride_t > 1) throw NotStreamable("", kStrideReason);
            return p.dilation_t * (p.kernel_t - 1) + 1;
          },
          [](const layers::DepthwiseConv1D& p) -> std::int64_t { return p.kernel_t; },
          [](const layers::AvgPool2D& p) -> std::int64_t {
            if (p.pool_t > 1) throw NotStreamable("", kPoolReason);
            if (p.stride_t > 1) throw NotStreamable("", kStrideReason);
            return 1;
          },
          [&](const layers::Flatten&) -> std::int64_t { return in_shape.at(0); },
          [&](const layers::GlobalAvgPoolTime&) -> std::int64_t { return in_shape.at(0); },
          [](const layers::Concat& p) -> std::int64_t {
            if (p.axis == 0) throw NotStreamable("", "concatenation along the time dimension");
            return 1;
          },
          [](const layers::BidirectionalGRU&) -> std::int64_t {
            throw NotStreamable("", "bidirectional recurrence depends on future frames");
          },
          [](const layers::MultiHeadAttention&) -> std::int64_t {
            throw NotStreamable("", "attention over the whole sequence depends on future frames");
          },
          [](const layers::CenterSelect&) -> std::int64_t {
            throw NotStreamable("", "center frame selection depends on future frames");
          },
          [&](const layers::Stream& s) -> std::int64_t {
            return effective_time_filter_size(*s.inner, in_shape);
          },
          // Input, Dense, Activation, BatchNorm, Add, GRU, RingBuffer.
          [](const auto&) -> std::int64_t { return 1; },
      },
      kind.value);
}

Tensor ring_buffer_step(const Tensor& state, const Tensor& frame) {
  Shape expected = state.shape();
  expected[0] = 1;
  if (frame.shape() != expected) {
    throw ShapeMismatch("ring buffer frame " + shape_to_string(frame.shape()) +
                        " does not fit buffer " + shape_to_string(state.shape()));
  }
  Tensor out(state.shape());
  const auto fs = state.frame_size();
  auto src = state.data();
  auto dst = out.data();
  std::copy(src.begin() + fs, src.end(), dst.begin());
  std::copy(frame.data().begin(), frame.data().end(), dst.end() - fs);
  return out;
}

Graph to_streaming(const Graph& g, StateMode mode, std::int64_t train_time_len) {
  if (g.is_streaming()) throw WrongMode("graph is already a streaming graph");
  const Graph shaped = infer_shapes(g, train_time_len);
  const auto order = topo_order(shaped);

  Graph out;
  out.input_ids = shaped.input_ids;
  out.output_ids = shaped.output_ids;
  out.mode = mode == StateMode::Internal ? GraphMode::StreamingInternal
                                         : GraphMode::StreamingExternal;
  out.train_time_len = train_time_len;
  for (const auto& [id, node] : shaped.nodes) {
    Node copy = node;
    copy.kind = unwrap(node.kind);
    copy.out_shape.clear();
    out.nodes.emplace(id, std::move(copy));
  }

  std::set<std::string> time_reduced;  // nodes whose output has no time axis left
  std::map<std::string, StateSpec> states_by_node;
  for (const auto& id : order) {
    const Node& node = shaped.nodes.at(id);
    const bool after_reduction = std::any_of(node.inputs.begin(), node.inputs.end(),
                                             [&](const auto& in) { return time_reduced.contains(in); });
    if (after_reduction || reduces_time(node.kind)) time_reduced.insert(id);
    if (node.inputs.empty()) continue;

    const Shape& in_shape = shaped.nodes.at(node.inputs.front()).out_shape;
    std::int64_t span = 1;
    try {
      span = effective_time_filter_size(node.kind, in_shape);
    } catch (const NotStreamable& e) {
      throw NotStreamable(id, e.reason());
    }
    const bool recurrent = kind_as<layers::GRU>(node.kind) != nullptr;
    if (after_reduction && (span > 1 || recurrent)) {
      throw NotStreamable(id, "time-spanning layer after the time axis was reduced");
    }

    if (recurrent) {
      const auto units = kind_as<layers::GRU>(node.kind)->units;
      states_by_node.emplace(id, StateSpec{id + "/hidden", {units}, id, StateKind::Recurrent});
      continue;
    }
    if (span < 2) continue;

    // Insert a ring buffer between the node and its (single) input.
    if (node.inputs.size() != 1) {
      throw NotStreamable(id, "time-spanning layer with more than one input");
    }
    const std::string buffer_id = unique_id(out, id + "/buffer");
    Shape state_shape = in_shape;
    state_shape[0] = span;
    out.nodes.emplace(buffer_id, Node{buffer_id, layers::RingBuffer{span}, node.inputs, {}, {}});
    Node& owner = out.nodes.at(id);
    owner.inputs = {buffer_id};
    owner.kind = with_padding(owner.kind, Padding::Valid);
    states_by_node.emplace(buffer_id,
                           StateSpec{buffer_id, std::move(state_shape), id, StateKind::RingBuffer});
  }

  Graph result = infer_shapes(out, 1);
  for (const auto& id : topo_order(result)) {
    if (auto it = states_by_node.find(id); it != states_by_node.end()) {
      result.state_io.push_back(it->second);
    }
  }
  return result;
}

std::vector<RingBufferSpec> ring_buffer_specs(const Graph& streaming) {
  std::vector<RingBufferSpec> specs;
  for (const auto& s : streaming.state_io) {
    if (s.kind != StateKind::RingBuffer) continue;
    Shape frame = s.shape;
    frame[0] = 1;
    specs.push_back(RingBufferSpec{s.owner, s.shape[0], std::move(frame), s.name});
  }
  return specs;
}

Graph as_causal(const Graph& g) {
  Graph out = g;
  for (auto& [id, node] : out.nodes) {
    const LayerKind& k = unwrap(node.kind);
    if (kind_as<layers::Conv2D>(k) || kind_as<layers::Conv1D>(k) ||
        kind_as<layers::DepthwiseConv1D>(k)) {
      node.kind = with_padding(k, Padding::Causal);
    }
  }
  return out;
}

}  // namespace streamkws
