#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "streamkws/graph.hpp"
#include "streamkws/tensor.hpp"

namespace streamkws {

enum class StateMode { Internal, External };

/// A ring buffer inserted in front of a time-spanning node.
struct RingBufferSpec {
  std::string owner_node;
  std::int64_t length = 0;
  Shape frame_shape;  // [1, ...]: one buffered frame
  std::string name;
  bool operator==(const RingBufferSpec&) const = default;
};

/// Number of consecutive input frames one output frame of the layer depends
/// on, given the layer's concrete (training-length) input shape.
///
/// Convolutions span dilation_t * (kernel_t - 1) + 1 frames, Flatten and
/// GlobalAvgPoolTime span their whole input, recurrent and frame-wise layers
/// span one frame. Throws NotStreamable (with an empty node id) for strides or
/// pooling in time and for layers that look at future frames.
std::int64_t effective_time_filter_size(const LayerKind& kind, const Shape& concrete_in_shape);

/// Rewrites a non-streaming graph into a one-frame-per-step graph.
///
/// The input takes a single frame; every node spanning k >= 2 frames reads a
/// RingBuffer of length k (conv layers then run as valid convolutions over the
/// buffer); GRU layers run one cell step and keep their hidden vector as state.
/// Flatten and pooling buffers hold the node's full time length at
/// `train_time_len`. Weights are shared with `g`, not copied.
///
/// In External mode the states become extra inputs/outputs listed in
/// `state_io`; in Internal mode the same list describes session-owned state.
/// Throws NotStreamable naming the first offending node in topological order.
Graph to_streaming(const Graph& g, StateMode mode, std::int64_t train_time_len);

/// Drops the oldest frame of `state` and appends `frame` ([1, ...]) at the end.
Tensor ring_buffer_step(const Tensor& state, const Tensor& frame);

/// Ring-buffer states of a streaming graph, in state_io order.
std::vector<RingBufferSpec> ring_buffer_specs(const Graph& streaming);

/// Copy of `g` with every valid time padding replaced by causal padding.
Graph as_causal(const Graph& g);

}  // namespace streamkws
