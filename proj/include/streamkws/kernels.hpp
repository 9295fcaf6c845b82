#pragma once

#include <memory>
#include <span>
#include <string_view>

#include "streamkws/graph.hpp"
#include "streamkws/tensor.hpp"

// Inference-only forward passes over whole sequences. Every kernel is a pure
// function of its inputs and the node's (immutable) weights.
namespace streamkws::kernels {

Tensor conv2d_forward(const Tensor& x, const Node& node);
Tensor conv1d_forward(const Tensor& x, const Node& node);
Tensor depthwise_conv1d_forward(const Tensor& x, const Node& node);
Tensor dense_forward(const Tensor& x, const Node& node);
Tensor avgpool_forward(const Tensor& x, const layers::AvgPool2D& pool);
Tensor batchnorm_forward(const Tensor& x, const Node& node);
Tensor activation_forward(const Tensor& x, ActivationFn fn);
Tensor add_forward(std::span<const Tensor* const> inputs);
Tensor concat_forward(std::span<const Tensor* const> inputs, std::int64_t axis);
Tensor flatten_forward(const Tensor& x);
Tensor global_avg_pool_time_forward(const Tensor& x);
Tensor center_select_forward(const Tensor& x);

/// Input-to-hidden [F,units], hidden-to-hidden [units,units] and bias [units]
/// matrices for the update (z), reset (r) and candidate (h) gates.
struct GruWeights {
  std::shared_ptr<const Tensor> w_z, w_r, w_h;
  std::shared_ptr<const Tensor> u_z, u_r, u_h;
  std::shared_ptr<const Tensor> b_z, b_r, b_h;

  /// Reads `<prefix>w_z` ... `<prefix>b_h` from the node's weights.
  static GruWeights from_node(const Node& node, std::string_view prefix = "");

  std::int64_t units() const { return b_z->dim(0); }
  std::int64_t input_size() const { return w_z->dim(0); }
  /// Throws ShapeMismatch unless all matrices agree with `input_size` features.
  void validate(std::int64_t features) const;
};

/// One recurrence step. `x` holds F features, `h` holds `units` values.
///   z = sigmoid(x W_z + h U_z + b_z)
///   r = sigmoid(x W_r + h U_r + b_r)
///   c = tanh(x W_h + (r * h) U_h + b_h)
///   h' = (1 - z) * c + z * h
Tensor gru_cell(std::span<const float> x, std::span<const float> h, const GruWeights& w);

struct GruOutput {
  Tensor sequence;     // [T, units]
  Tensor final_state;  // [units]
};

/// Full-sequence GRU. Input projections for all frames are computed up front,
/// then the recurrence runs frame by frame. Trailing input axes are flattened.
GruOutput gru_forward(const Tensor& x, const GruWeights& w, const Tensor& h0);

/// Forward and time-reversed GRU outputs concatenated per frame: [T, 2*units].
Tensor bidirectional_gru_forward(const Tensor& x, const GruWeights& forward,
                                 const GruWeights& backward);

struct AttentionWeights {
  std::shared_ptr<const Tensor> query;   // [Dq, D]
  std::shared_ptr<const Tensor> key;     // [Dkv, D]
  std::shared_ptr<const Tensor> value;   // [Dkv, D]
  std::shared_ptr<const Tensor> output;  // [D, D]

  static AttentionWeights from_node(const Node& node);
};

/// Per-head attention probabilities, shape [Tq, heads, T]. Each row sums to 1.
Tensor attention_probabilities(const Tensor& query, const Tensor& keys_values,
                               std::int64_t heads, const AttentionWeights& w);

/// Scaled dot-product attention split into `heads` equal slices of the
/// projected dimension, concatenated and output-projected. `query` is [Tq,Dq]
/// and `keys_values` is [T,Dkv]; returns [Tq, D].
Tensor multihead_attention_forward(const Tensor& query, const Tensor& keys_values,
                                   std::int64_t heads, const AttentionWeights& w);

/// Evaluates one node over whole-sequence inputs. RingBuffer nodes are not
/// handled here (they need state); GRU nodes start from a zero hidden state.
Tensor forward_node(const Node& node, std::span<const Tensor* const> inputs);

}  // namespace streamkws::kernels
