#include "streamkws/runtime.hpp"

#include <algorithm>
#include <optional>

#include "streamkws/errors.hpp"
#include "streamkws/kernels.hpp"
#include "streamkws/stream_transform.hpp"

namespace streamkws {

namespace detail {

// Nodes in execution order with their inputs resolved to positions.
struct ExecutionPlan {
  struct Step {
    const Node* node = nullptr;
    std::vector<std::size_t> inputs;
    const StateSpec* state = nullptr;  // ring buffer or recurrent state owned by this node
    std::int64_t time_window = 0;      // Flatten/GlobalAvgPoolTime prefix window (0: none)
  };

  std::vector<Step> steps;
  std::size_t output = 0;
  std::size_t input = 0;
  const layers::Input* input_kind = nullptr;
  bool streaming = false;

  explicit ExecutionPlan(const Graph& g, const std::map<std::string, std::int64_t>* windows = nullptr) {
    if (g.input_ids.size() != 1) throw ShapeMismatch("graph must have exactly one input");
    if (g.output_ids.size() != 1) throw ShapeMismatch("graph must have exactly one output");
    streaming = g.is_streaming();
    std::map<std::string_view, std::size_t> position;
    std::map<std::string_view, const StateSpec*> state_of;
    for (const auto& s : g.state_io) {
      const std::string_view key =
          s.kind == StateKind::RingBuffer ? std::string_view(s.name) : std::string_view(s.owner);
      state_of[key] = &s;
    }
    for (const auto& id : topo_order(g)) {
      const Node& node = g.node(id);
      Step step{&node, {}, nullptr, 0};
      for (const auto& in : node.inputs) step.inputs.push_back(position.at(in));
      if (auto it = state_of.find(id); it != state_of.end()) step.state = it->second;
      if (windows) {
        if (auto it = windows->find(id); it != windows->end()) step.time_window = it->second;
      }
      const bool needs_state = kind_as<layers::RingBuffer>(node.kind) ||
                               (streaming && kind_as<layers::GRU>(node.kind));
      if (needs_state && !step.state) {
        throw ShapeMismatch("node '" + id + "' has no registered state");
      }
      position[node.id] = steps.size();
      steps.push_back(std::move(step));
    }
    input = position.at(g.input_ids.front());
    output = position.at(g.output_ids.front());
    input_kind = kind_as<layers::Input>(steps[input].node->kind);
    if (!input_kind) throw ShapeMismatch("graph input is not an Input node");
  }

  void check_input(const Tensor& x) const {
    const Shape& fs = input_kind->frame_shape;
    if (x.rank() != fs.size() + 1 || !std::equal(fs.begin(), fs.end(), x.shape().begin() + 1)) {
      throw ShapeMismatch("input " + shape_to_string(x.shape()) + " does not match frame shape " +
                          shape_to_string(fs));
    }
    if (streaming && x.frames() != 1) {
      throw ShapeMismatch("streaming graphs take exactly one frame per step");
    }
  }

  /// Runs every node. `states_in` / `states_out` are used by streaming graphs.
  Tensor run(const Tensor& x, const StateMap* states_in, StateMap* states_out) const {
    check_input(x);
    std::vector<std::optional<Tensor>> values(steps.size());
    std::vector<const Tensor*> args;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const Step& s = steps[i];
      args.clear();
      for (auto in : s.inputs) args.push_back(&*values[in]);
      if (i == input) {
        values[i] = x;
      } else if (s.state) {
        values[i] = run_stateful(s, args, *states_in, *states_out);
      } else if (s.time_window > 0) {
        const Tensor window = fit_time(*args.front(), s.time_window);
        const Tensor* w = &window;
        values[i] = kernels::forward_node(*s.node, std::span<const Tensor* const>(&w, 1));
      } else {
        values[i] = kernels::forward_node(*s.node, args);
      }
    }
    return std::move(*values[output]);
  }

 private:
  static Tensor run_stateful(const Step& s, const std::vector<const Tensor*>& args,
                             const StateMap& states_in, StateMap& states_out) {
    auto it = states_in.find(s.state->name);
    if (it == states_in.end()) throw MissingState(s.state->name);
    const Tensor& prev = it->second;
    const Tensor& x = *args.front();
    if (s.state->kind == StateKind::RingBuffer) {
      Tensor next = ring_buffer_step(prev, x);
      states_out.insert_or_assign(s.state->name, next);
      return next;
    }
    if (x.frames() != 1) throw ShapeMismatch("streaming GRU expects one frame per step");
    const auto w = kernels::GruWeights::from_node(*s.node);
    Tensor h = kernels::gru_cell(x.frame(0), prev.data(), w);
    Tensor out = h.reshaped({1, w.units()});
    states_out.insert_or_assign(s.state->name, std::move(h));
    return out;
  }
};

}  // namespace detail

namespace {

void check_states(const Graph& g, const StateMap& states) {
  for (const auto& spec : g.state_io) {
    auto it = states.find(spec.name);
    if (it == states.end()) throw MissingState(spec.name);
    if (it->second.shape() != spec.shape) {
      throw ShapeMismatch("state '" + spec.name + "' has shape " +
                          shape_to_string(it->second.shape()) + ", expected " +
                          shape_to_string(spec.shape));
    }
  }
  if (states.size() != g.state_io.size()) {
    for (const auto& [name, _] : states) {
      const bool known = std::any_of(g.state_io.begin(), g.state_io.end(),
                                     [&](const auto& s) { return s.name == name; });
      if (!known) throw ShapeMismatch("unexpected state '" + name + "'");
    }
  }
}

}  // namespace

Tensor run_non_streaming(const Graph& g, const Tensor& x) {
  if (g.is_streaming()) throw WrongMode("run_non_streaming needs a non-streaming graph");
  return detail::ExecutionPlan(g).run(x, nullptr, nullptr);
}

Tensor run_causal_prefix(const Graph& g, const Tensor& prefix, std::int64_t train_time_len) {
  if (g.is_streaming()) throw WrongMode("run_causal_prefix needs a non-streaming graph");
  const Graph shaped = infer_shapes(g, train_time_len);
  std::map<std::string, std::int64_t> windows;
  for (const auto& [id, node] : shaped.nodes) {
    if (kind_as<layers::Flatten>(node.kind) || kind_as<layers::GlobalAvgPoolTime>(node.kind)) {
      windows[id] = shaped.node(node.inputs.front()).out_shape.front();
    }
  }
  const Graph causal = as_causal(g);
  const Tensor out = detail::ExecutionPlan(causal, &windows).run(prefix, nullptr, nullptr);
  return slice_time(out, out.frames() - 1, 1);
}

StateMap zero_states(const Graph& g) {
  StateMap states;
  for (const auto& s : g.state_io) states.emplace(s.name, Tensor::zeros(s.shape));
  return states;
}

StepResult step_external(const Graph& g, const Tensor& frame, const StateMap& states_in) {
  if (g.mode != GraphMode::StreamingExternal) {
    throw WrongMode("step_external needs a streaming graph with external state");
  }
  check_states(g, states_in);
  StepResult result{Tensor::zeros({1}), {}};
  result.output = detail::ExecutionPlan(g).run(frame, &states_in, &result.new_states);
  return result;
}

StreamSession::StreamSession(std::shared_ptr<const Graph> graph) : graph_(std::move(graph)) {
  if (!graph_ || !graph_->is_streaming()) {
    throw WrongMode("stream sessions need a streaming graph");
  }
  plan_ = std::make_shared<const detail::ExecutionPlan>(*graph_);
  if (graph_->mode == GraphMode::StreamingInternal) states_ = zero_states(*graph_);
}

StepResult StreamSession::step(const Tensor& frame) {
  if (graph_->mode != GraphMode::StreamingInternal) {
    throw WrongMode("graph keeps external state; use step_external");
  }
  StateMap next;
  Tensor out = plan_->run(frame, &states_, &next);
  states_ = std::move(next);
  ++step_count_;
  return StepResult{std::move(out), {}};
}

StreamSession new_session(std::shared_ptr<const Graph> graph) {
  return StreamSession(std::move(graph));
}

StreamSession new_session(Graph graph) {
  return StreamSession(std::make_shared<const Graph>(std::move(graph)));
}

}  // namespace streamkws
