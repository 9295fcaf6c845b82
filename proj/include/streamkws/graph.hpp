#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "streamkws/tensor.hpp"

namespace streamkws {

/// Time-axis padding. Feature axes are always unpadded.
enum class Padding { Causal, Valid };

enum class ActivationFn { Relu, Sigmoid, Tanh, Softmax };

enum class GraphMode { NonStreaming, StreamingInternal, StreamingExternal };

/// Marks the time axis of a shape that has not been concretized yet.
inline constexpr std::int64_t kSymbolicTime = -1;

struct LayerKind;

namespace layers {

struct Input {
  Shape frame_shape;  // shape of one frame, without the time axis
  bool operator==(const Input&) const = default;
};

struct Conv2D {
  std::int64_t kernel_t = 1;
  std::int64_t kernel_f = 1;
  std::int64_t stride_t = 1;
  std::int64_t stride_f = 1;
  std::int64_t dilation_t = 1;
  std::int64_t filters = 1;
  Padding padding = Padding::Causal;
  bool operator==(const Conv2D&) const = default;
};

struct Conv1D {
  std::int64_t kernel_t = 1;
  std::int64_t stride_t = 1;
  std::int64_t dilation_t = 1;
  std::int64_t filters = 1;
  Padding padding = Padding::Causal;
  bool operator==(const Conv1D&) const = default;
};

/// Per-channel filter over time; every non-time element is a channel.
struct DepthwiseConv1D {
  std::int64_t kernel_t = 1;
  std::int64_t multiplier = 1;
  Padding padding = Padding::Causal;
  bool operator==(const DepthwiseConv1D&) const = default;
};

/// Applied to the last axis, independently per frame.
struct Dense {
  std::int64_t units = 1;
  bool use_bias = true;
  bool operator==(const Dense&) const = default;
};

/// Collapses the whole (time-complete) input into one frame.
struct Flatten {
  bool operator==(const Flatten&) const = default;
};

struct GlobalAvgPoolTime {
  bool operator==(const GlobalAvgPoolTime&) const = default;
};

struct AvgPool2D {
  std::int64_t pool_t = 1;
  std::int64_t pool_f = 1;
  std::int64_t stride_t = 1;
  std::int64_t stride_f = 1;
  bool operator==(const AvgPool2D&) const = default;
};

struct Activation {
  ActivationFn fn = ActivationFn::Relu;
  bool operator==(const Activation&) const = default;
};

/// Folded inference batch norm: y = x * scale + offset on the last axis.
struct BatchNormInference {
  bool operator==(const BatchNormInference&) const = default;
};

struct GRU {
  std::int64_t units = 1;
  bool return_sequences = true;
  bool operator==(const GRU&) const = default;
};

struct BidirectionalGRU {
  std::int64_t units = 1;
  bool operator==(const BidirectionalGRU&) const = default;
};

struct Add {
  bool operator==(const Add&) const = default;
};

struct Concat {
  std::int64_t axis = 1;
  bool operator==(const Concat&) const = default;
};

/// Inputs: (query, keys_values).
struct MultiHeadAttention {
  std::int64_t heads = 1;
  std::int64_t key_dim = 1;
  bool operator==(const MultiHeadAttention&) const = default;
};

/// Picks frame floor(T/2).
struct CenterSelect {
  bool operator==(const CenterSelect&) const = default;
};

/// Holds the most recent `length` frames of its input; only in streaming graphs.
struct RingBuffer {
  std::int64_t length = 1;
  bool operator==(const RingBuffer&) const = default;
};

/// Marks a layer that must be buffered when streamed. Executes as `inner`.
struct Stream {
  std::shared_ptr<const LayerKind> inner;
  bool operator==(const Stream& other) const;
};

}  // namespace layers

using LayerVariant =
    std::variant<layers::Input, layers::Conv2D, layers::Conv1D, layers::DepthwiseConv1D,
                 layers::Dense, layers::Flatten, layers::GlobalAvgPoolTime,
                 layers::AvgPool2D, layers::Activation, layers::BatchNormInference,
                 layers::GRU, layers::BidirectionalGRU, layers::Add, layers::Concat,
                 layers::MultiHeadAttention, layers::CenterSelect, layers::RingBuffer,
                 layers::Stream>;

struct LayerKind {
  LayerVariant value;

  LayerKind() = default;

  template <typename T>
    requires(!std::is_same_v<std::remove_cvref_t<T>, LayerKind> &&
             std::is_constructible_v<LayerVariant, T>)
  LayerKind(T&& v) : value(std::forward<T>(v)) {}  // NOLINT: implicit by design

  bool operator==(const LayerKind&) const = default;
};

/// Wraps `inner` in a Stream annotation.
LayerKind stream(LayerKind inner);

/// Strips any Stream annotations.
const LayerKind& unwrap(const LayerKind& kind);

/// The concrete layer behind `kind` if it is a T (after unwrapping), else nullptr.
template <typename T>
const T* kind_as(const LayerKind& kind) {
  return std::get_if<T>(&unwrap(kind).value);
}

std::string_view kind_name(const LayerKind& kind);
std::string_view padding_name(Padding p);
std::string_view activation_name(ActivationFn fn);
std::string_view mode_name(GraphMode mode);

using WeightMap = std::map<std::string, std::shared_ptr<const Tensor>, std::less<>>;

struct Node {
  std::string id;
  LayerKind kind;
  std::vector<std::string> inputs;
  WeightMap weights;  // shared between a graph and its streaming rewrite
  Shape out_shape;    // axis 0 may be kSymbolicTime until shapes are inferred

  /// Throws ShapeMismatch when the weight is absent.
  const Tensor& weight(std::string_view name) const;
};

enum class StateKind { RingBuffer, Recurrent };

/// One piece of streaming state: a ring buffer or a recurrent hidden vector.
struct StateSpec {
  std::string name;
  Shape shape;
  std::string owner;  // node that reads or writes the state
  StateKind kind = StateKind::RingBuffer;
  bool operator==(const StateSpec&) const = default;
};

struct Graph {
  std::map<std::string, Node, std::less<>> nodes;
  std::vector<std::string> input_ids;
  std::vector<std::string> output_ids;
  GraphMode mode = GraphMode::NonStreaming;
  /// Streaming state registry in topological order. For StreamingExternal
  /// graphs these are the extra inputs/outputs the caller threads through.
  std::vector<StateSpec> state_io;
  /// Input time length the node shapes were inferred at; 0 while unresolved.
  std::int64_t time_len = 0;
  /// Sequence length the graph was trained on (non-streaming time length for
  /// the original model; preserved by the streaming rewrite).
  std::int64_t train_time_len = 0;

  const Node& node(std::string_view id) const;
  bool is_streaming() const noexcept { return mode != GraphMode::NonStreaming; }
};

/// Incremental construction with id and edge validation.
class GraphBuilder {
 public:
  const std::string& input(std::string id, Shape frame_shape);
  const std::string& add(std::string id, LayerKind kind, std::vector<std::string> inputs,
                         WeightMap weights = {});
  void output(std::string id);

  /// Throws CycleDetected / ShapeMismatch on a malformed graph.
  Graph build() &&;

 private:
  Graph graph_;
};

/// Output time length of a time-sliding layer (convolution or pooling).
std::int64_t conv_output_length(std::int64_t in_len, std::int64_t kernel, std::int64_t stride,
                                std::int64_t dilation, Padding padding);

/// Deterministic topological order (ties broken by node id). Throws CycleDetected.
std::vector<std::string> topo_order(const Graph& g);

/// Returns a copy with every out_shape concretized for `input_time_len` frames.
/// Throws ShapeMismatch or CycleDetected.
Graph infer_shapes(const Graph& g, std::int64_t input_time_len);

/// Output shape of a single node given its input shapes; validates weights.
Shape infer_node_shape(const Node& node, std::span<const Shape> input_shapes);

}  // namespace streamkws
