#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "streamkws/graph.hpp"
#include "streamkws/tensor.hpp"

namespace streamkws {

using StateMap = std::map<std::string, Tensor, std::less<>>;

namespace detail {
struct ExecutionPlan;
}

struct StepResult {
  Tensor output;
  StateMap new_states;  // External mode only
};

/// Whole-sequence forward pass of a non-streaming graph. `x` is [T, frame...].
Tensor run_non_streaming(const Graph& g, const Tensor& x);

/// The non-streaming model evaluated on the causal prefix `prefix` (frames
/// 0..t of a stream): valid time padding is read as causal, and Flatten /
/// GlobalAvgPoolTime see the last N frames of their input (zero-padded on the
/// left when fewer exist), N being their time length at `train_time_len`.
/// Returns the last output frame: what a streaming conversion of `g` must
/// output at step t.
Tensor run_causal_prefix(const Graph& g, const Tensor& prefix, std::int64_t train_time_len);

/// Zero tensors for every entry of the graph's state registry.
StateMap zero_states(const Graph& g);

/// Pure single step of a StreamingExternal graph: consumes one frame and the
/// previous states, returns the output and every updated state.
/// Throws MissingState, ShapeMismatch or WrongMode.
StepResult step_external(const Graph& g, const Tensor& frame, const StateMap& states_in);

/// Frame-by-frame execution of a streaming graph.
///
/// Internal-mode sessions own their ring buffers and recurrent states, which
/// start at zero. Sessions never share state; the graph itself is shared.
class StreamSession {
 public:
  explicit StreamSession(std::shared_ptr<const Graph> graph);

  /// Internal mode only. `frame` is [1, frame...].
  StepResult step(const Tensor& frame);

  const Graph& graph() const noexcept { return *graph_; }
  const StateMap& states() const noexcept { return states_; }
  std::int64_t step_count() const noexcept { return step_count_; }

 private:
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<const detail::ExecutionPlan> plan_;
  StateMap states_;
  std::int64_t step_count_ = 0;
};

/// Throws WrongMode for non-streaming graphs.
StreamSession new_session(std::shared_ptr<const Graph> graph);
StreamSession new_session(Graph graph);

}  // namespace streamkws
