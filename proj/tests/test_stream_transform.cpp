#include <algorithm>
#include <cstring>
#include <deque>

#include "doctest.h"
#include "helpers.hpp"
#include "streamkws/errors.hpp"
#include "streamkws/serialize.hpp"
#include "streamkws/stream_transform.hpp"
#include "streamkws/zoo.hpp"

using namespace streamkws;
using testing::constant;

namespace {

std::string not_streamable_reason(const Graph& g) {
  try {
    to_streaming(g, StateMode::Internal, g.time_len);
  } catch (const NotStreamable& e) {
    return e.reason();
  }
  return "";
}

std::vector<std::vector<std::uint8_t>> weight_bits(const Graph& g) {
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& [id, node] : g.nodes) {
    for (const auto& [name, w] : node.weights) {
      std::vector<std::uint8_t> bytes(w->size() * sizeof(float));
      std::memcpy(bytes.data(), w->data().data(), bytes.size());
      out.push_back(std::move(bytes));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<ModelName> kStreamable{ModelName::DNN,   ModelName::CNN,      ModelName::CRNN,
                                         ModelName::GRU_NET, ModelName::DSCNN, ModelName::SVDF_NET,
                                         ModelName::TC_RESNET};

}  // namespace

TEST_CASE("effective time filter size") {
  CHECK(effective_time_filter_size(layers::Conv2D{3, 3, 1, 1, 1, 1, Padding::Valid}, {6, 3}) == 3);
  CHECK(effective_time_filter_size(layers::Dense{4, true}, {6, 3}) == 1);
  CHECK(effective_time_filter_size(layers::Conv1D{3, 1, 2, 4, Padding::Causal}, {9, 3}) == 5);
  CHECK(effective_time_filter_size(layers::DepthwiseConv1D{8, 1, Padding::Causal}, {49, 3}) == 8);
  CHECK(effective_time_filter_size(layers::Flatten{}, {4, 1, 1}) == 4);
  CHECK(effective_time_filter_size(layers::GlobalAvgPoolTime{}, {49, 32}) == 49);
  CHECK(effective_time_filter_size(layers::GRU{8, true}, {49, 3}) == 1);
  CHECK(effective_time_filter_size(layers::Activation{}, {49, 3}) == 1);
  CHECK(effective_time_filter_size(layers::Concat{1}, {49, 3}) == 1);
  CHECK(effective_time_filter_size(stream(layers::Conv1D{5, 1, 1, 1, Padding::Causal}), {9, 3}) == 5);
  CHECK(effective_time_filter_size(layers::AvgPool2D{1, 2, 1, 2}, {9, 4, 1}) == 1);

  CHECK_THROWS_AS(effective_time_filter_size(layers::BidirectionalGRU{4}, {9, 3}), NotStreamable);
  CHECK_THROWS_AS(effective_time_filter_size(layers::MultiHeadAttention{1, 4}, {9, 3}), NotStreamable);
  CHECK_THROWS_AS(effective_time_filter_size(layers::CenterSelect{}, {9, 3}), NotStreamable);
  CHECK_THROWS_AS(effective_time_filter_size(layers::Conv1D{3, 2, 1, 1, Padding::Causal}, {9, 3}), NotStreamable);
  CHECK_THROWS_AS(effective_time_filter_size(layers::AvgPool2D{2, 1, 1, 1}, {9, 3, 1}), NotStreamable);
  CHECK_THROWS_AS(effective_time_filter_size(layers::Concat{0}, {9, 3}), NotStreamable);
}

TEST_CASE("the conv-flatten-dense example gets two buffers of 3 and 4 frames") {
  const Graph g = build_conv_flatten_dense(21);
  const Graph s = to_streaming(g, StateMode::Internal, 6);
  CHECK(s.mode == GraphMode::StreamingInternal);
  CHECK(s.node("input").out_shape.front() == 1);
  CHECK(s.time_len == 1);
  CHECK(s.train_time_len == 6);

  const auto specs = ring_buffer_specs(s);
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].owner_node == "conv");
  CHECK(specs[0].length == 3);
  CHECK(specs[0].frame_shape == Shape{1, 3});
  CHECK(specs[1].owner_node == "flatten");
  // Oracle: the conv output length at the training length.
  CHECK(specs[1].length == g.node("conv").out_shape.front());
  CHECK(specs[1].length == 4);
  CHECK(specs[1].frame_shape == Shape{1, 1, 1});
  CHECK(s.state_io[0].shape == Shape{3, 3});

  std::size_t buffers = 0;
  for (const auto& [id, node] : s.nodes) buffers += kind_as<layers::RingBuffer>(node.kind) != nullptr;
  CHECK(buffers == 2);
  CHECK(s.node("conv").inputs == std::vector<std::string>{"conv/buffer"});
  CHECK(kind_as<layers::Conv2D>(s.node("conv").kind)->padding == Padding::Valid);
  CHECK(s.node("dense").out_shape == Shape{1, 4});
}

TEST_CASE("unsupported layers are rejected with a reason and node id") {
  CHECK(not_streamable_reason(build(ZooSpec{ModelName::CNN_STRIDED})) == "stride in time dimension");
  CHECK(not_streamable_reason(build(ZooSpec{ModelName::DSCNN_STRIDED})) == "stride in time dimension");
  CHECK(not_streamable_reason(build(ZooSpec{ModelName::MHATT_RNN})) ==
        "bidirectional recurrence depends on future frames");
  try {
    to_streaming(build(ZooSpec{ModelName::CNN_STRIDED}), StateMode::External, 49);
    FAIL("expected NotStreamable");
  } catch (const NotStreamable& e) {
    CHECK(e.node() == "conv_1");
  }

  GraphBuilder b;
  b.input("input", {4, 1});
  b.add("pool", layers::AvgPool2D{2, 1, 1, 1}, {"input"});
  b.output("pool");
  CHECK(not_streamable_reason(infer_shapes(std::move(b).build(), 8)) == "pooling in time dimension");

  GraphBuilder c;
  c.input("input", {2});
  c.add("flatten", layers::Flatten{}, {"input"});
  c.add("conv", layers::Conv1D{2, 1, 1, 1, Padding::Causal}, {"flatten"},
        {{"kernel", constant({2, 8, 1}, 1.0f)}, {"bias", constant({1}, 0.0f)}});
  c.output("conv");
  CHECK(not_streamable_reason(infer_shapes(std::move(c).build(), 4)) ==
        "time-spanning layer after the time axis was reduced");

  GraphBuilder d;
  d.input("input", {2});
  d.add("center", layers::CenterSelect{}, {"input"});
  d.output("center");
  CHECK(not_streamable_reason(infer_shapes(std::move(d).build(), 4)) ==
        "center frame selection depends on future frames");
}

TEST_CASE("converting a streaming graph is an error") {
  const Graph s = to_streaming(build_conv_flatten_dense(1), StateMode::Internal, 6);
  CHECK_THROWS_AS(to_streaming(s, StateMode::Internal, 6), WrongMode);
}

TEST_CASE("ring_buffer_step") {
  SUBCASE("shift by one") {
    const Tensor out = ring_buffer_step(Tensor({3, 1}, {1, 2, 3}), Tensor({1, 1}, {4}));
    CHECK(out == Tensor({3, 1}, {2, 3, 4}));
  }
  SUBCASE("zeros stay zero") {
    CHECK(ring_buffer_step(Tensor::zeros({4, 2}), Tensor::zeros({1, 2})) == Tensor::zeros({4, 2}));
  }
  SUBCASE("k frames fill a k-frame buffer in order") {
    for (std::int64_t k = 1; k <= 6; ++k) {
      Tensor state = Tensor::zeros({k, 2, 3});
      std::deque<Tensor> expected(static_cast<std::size_t>(k), Tensor::zeros({1, 2, 3}));
      for (std::int64_t i = 0; i < k + 3; ++i) {
        const Tensor frame = testing::random({1, 2, 3}, static_cast<std::uint64_t>(10 * k + i));
        state = ring_buffer_step(state, frame);
        expected.pop_front();
        expected.push_back(frame);
        const std::vector<Tensor> parts(expected.begin(), expected.end());
        CHECK(bit_equal(state, concat_time(parts)));
      }
    }
  }
  SUBCASE("mismatched frame") {
    CHECK_THROWS_AS(ring_buffer_step(Tensor::zeros({3, 2}), Tensor::zeros({1, 3})), ShapeMismatch);
    CHECK_THROWS_AS(ring_buffer_step(Tensor::zeros({3, 2}), Tensor::zeros({2, 2})), ShapeMismatch);
  }
}

TEST_CASE("zoo conversions: buffers, states and weights") {
  for (auto name : kStreamable) {
    CAPTURE(model_name(name));
    const Graph g = build(ZooSpec{name, 49, 20, 12, 5});
    for (auto mode : {StateMode::Internal, StateMode::External}) {
      const Graph s = to_streaming(g, mode, 49);
      CHECK(s.time_len == 1);
      for (const auto& [id, node] : s.nodes) {
        if (const auto* rb = kind_as<layers::RingBuffer>(node.kind)) CHECK(rb->length >= 2);
        CHECK_FALSE(std::holds_alternative<layers::Stream>(node.kind.value));
      }
      // Names are unique and every state is registered exactly once, in topological order.
      std::vector<std::string> names;
      for (const auto& st : s.state_io) names.push_back(st.name);
      auto sorted = names;
      std::sort(sorted.begin(), sorted.end());
      CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
      const auto order = topo_order(s);
      std::vector<std::string> in_order;
      for (const auto& id : order) {
        for (const auto& st : s.state_io) {
          const auto& key = st.kind == StateKind::RingBuffer ? st.name : st.owner;
          if (key == id) in_order.push_back(st.name);
        }
      }
      CHECK(in_order == names);

      CHECK(weight_bits(s) == weight_bits(g));
      for (const auto& [id, node] : g.nodes) {
        for (const auto& [wname, w] : node.weights) CHECK(s.node(id).weights.at(wname).get() == w.get());
      }
    }
  }
}

TEST_CASE("GRU conversion registers the hidden state") {
  const Graph s = to_streaming(build(ZooSpec{ModelName::GRU_NET}), StateMode::External, 49);
  REQUIRE(s.state_io.size() == 2);
  CHECK(s.state_io[0] == StateSpec{"gru_1/hidden", {48}, "gru_1", StateKind::Recurrent});
  CHECK(s.state_io[1] == StateSpec{"gru_2/hidden", {48}, "gru_2", StateKind::Recurrent});
  CHECK(ring_buffer_specs(s).empty());

  const Graph crnn = to_streaming(build(ZooSpec{ModelName::CRNN}), StateMode::External, 49);
  REQUIRE(crnn.state_io.size() == 2);
  CHECK(crnn.state_io[0].kind == StateKind::RingBuffer);
  CHECK(crnn.state_io[0].shape == Shape{3, 20});
  CHECK(crnn.state_io[1].name == "gru/hidden");
}

TEST_CASE("conversion is deterministic and leaves the source untouched") {
  const Graph g = build(ZooSpec{ModelName::TC_RESNET, 49, 20, 12, 8});
  const auto before = serialize_graph(g);
  const Graph a = to_streaming(g, StateMode::External, 49);
  const Graph b = to_streaming(g, StateMode::External, 49);
  CHECK(serialize_graph(a) == serialize_graph(b));
  CHECK(serialize_graph(g) == before);
}

TEST_CASE("as_causal rewrites valid time padding only") {
  const Graph c = as_causal(build_conv_flatten_dense(2));
  CHECK(kind_as<layers::Conv2D>(c.node("conv").kind)->padding == Padding::Causal);
}
