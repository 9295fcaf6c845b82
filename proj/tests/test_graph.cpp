#include "doctest.h"
#include "helpers.hpp"
#include "streamkws/errors.hpp"
#include "streamkws/runtime.hpp"
#include "streamkws/zoo.hpp"

using namespace streamkws;
using testing::constant;

namespace {

Graph chain() {
  GraphBuilder b;
  b.input("input", {3});
  b.add("conv", layers::Conv1D{3, 1, 1, 2, Padding::Causal}, {"input"},
        {{"kernel", constant({3, 3, 2}, 0.1f)}, {"bias", constant({2}, 0.0f)}});
  b.add("flatten", layers::Flatten{}, {"conv"});
  b.add("dense", layers::Dense{4, true}, {"flatten"},
        {{"kernel", constant({10, 4}, 0.1f)}, {"bias", constant({4}, 0.0f)}});
  b.output("dense");
  return std::move(b).build();
}

Graph diamond() {
  GraphBuilder b;
  b.input("a_in", {2});
  b.add("z_left", layers::Activation{ActivationFn::Relu}, {"a_in"});
  b.add("b_right", layers::Activation{ActivationFn::Tanh}, {"a_in"});
  b.add("add", layers::Add{}, {"z_left", "b_right"});
  b.output("add");
  return std::move(b).build();
}

std::size_t position(const std::vector<std::string>& order, const std::string& id) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), id) - order.begin());
}

}  // namespace

TEST_CASE("valid conv over the 6x3 example leaves 4 frames") {
  // Oracle: count the 3-frame windows that fit in 6 frames.
  std::int64_t windows = 0;
  for (std::int64_t start = 0; start + 3 <= 6; ++start) ++windows;
  const Graph g = build_conv_flatten_dense(1);
  CHECK(g.node("conv").out_shape == Shape{windows, 1, 1});
  CHECK(g.node("flatten").out_shape == Shape{1, windows});
  CHECK(g.node("dense").out_shape == Shape{1, 4});
}

TEST_CASE("conv output length formulas") {
  CHECK(conv_output_length(49, 3, 1, 1, Padding::Causal) == 49);
  CHECK(conv_output_length(49, 3, 2, 1, Padding::Causal) == 25);
  CHECK(conv_output_length(6, 3, 1, 1, Padding::Valid) == 4);
  CHECK(conv_output_length(10, 3, 2, 2, Padding::Valid) == 3);
  CHECK(conv_output_length(2, 3, 1, 1, Padding::Valid) == 0);
}

TEST_CASE("infer_shapes per kind") {
  GraphBuilder b;
  b.input("input", {64});
  b.add("dense", layers::Dense{10, false}, {"input"}, {{"kernel", constant({64, 10}, 0.0f)}});
  b.add("conv", layers::Conv1D{3, 1, 1, 5, Padding::Causal}, {"dense"},
        {{"kernel", constant({3, 10, 5}, 0.0f)}, {"bias", constant({5}, 0.0f)}});
  b.output("conv");
  const Graph g = infer_shapes(std::move(b).build(), 49);
  CHECK(g.node("dense").out_shape == Shape{49, 10});
  CHECK(g.node("conv").out_shape == Shape{49, 5});
  CHECK(g.time_len == 49);
  CHECK(g.train_time_len == 49);
}

TEST_CASE("infer_shapes is idempotent and rejects bad edges") {
  const Graph once = infer_shapes(chain(), 5);
  const Graph twice = infer_shapes(once, 5);
  for (const auto& [id, node] : once.nodes) CHECK(twice.node(id).out_shape == node.out_shape);

  GraphBuilder b;
  b.input("input", {3});
  b.add("dense", layers::Dense{4, true}, {"input"},
        {{"kernel", constant({5, 4}, 0.0f)}, {"bias", constant({4}, 0.0f)}});
  b.output("dense");
  CHECK_THROWS_AS(infer_shapes(std::move(b).build(), 4), ShapeMismatch);
  CHECK_THROWS_AS(infer_shapes(chain(), 0), ShapeMismatch);
}

TEST_CASE("weights must match the layer kind") {
  GraphBuilder b;
  b.input("input", {3});
  b.add("relu", layers::Activation{}, {"input"}, {{"kernel", constant({1}, 0.0f)}});
  b.output("relu");
  CHECK_THROWS_AS(infer_shapes(std::move(b).build(), 4), ShapeMismatch);

  GraphBuilder c;
  c.input("input", {3});
  c.add("dense", layers::Dense{4, true}, {"input"}, {{"kernel", constant({3, 4}, 0.0f)}});
  c.output("dense");
  CHECK_THROWS_AS(infer_shapes(std::move(c).build(), 4), ShapeMismatch);
}

TEST_CASE("topo_order") {
  SUBCASE("linear chain") {
    CHECK(topo_order(chain()) == std::vector<std::string>{"input", "conv", "flatten", "dense"});
  }
  SUBCASE("diamond: branches precede the join") {
    const auto order = topo_order(diamond());
    CHECK(order.size() == 4);
    CHECK(position(order, "a_in") < position(order, "z_left"));
    CHECK(position(order, "a_in") < position(order, "b_right"));
    CHECK(position(order, "z_left") < position(order, "add"));
    CHECK(position(order, "b_right") < position(order, "add"));
    CHECK(order == topo_order(diamond()));
    // Ties are broken by id.
    CHECK(position(order, "b_right") < position(order, "z_left"));
  }
  SUBCASE("back edge") {
    Graph g = chain();
    g.nodes.at("conv").inputs = {"dense"};
    CHECK_THROWS_AS(topo_order(g), CycleDetected);
  }
}

TEST_CASE("builder validates ids and edges") {
  GraphBuilder b;
  b.input("input", {3});
  CHECK_THROWS_AS(b.add("input", layers::Activation{}, {"input"}), InvalidSpec);
  CHECK_THROWS_AS(b.add("relu", layers::Activation{}, {"missing"}), InvalidSpec);
  CHECK_THROWS_AS(b.add("", layers::Activation{}, {"input"}), InvalidSpec);
  CHECK_THROWS_AS(b.output("missing"), InvalidSpec);
}

TEST_CASE("stream annotations unwrap to their layer") {
  const LayerKind k = stream(layers::Conv1D{3, 1, 1, 2, Padding::Causal});
  CHECK(kind_as<layers::Conv1D>(k) != nullptr);
  CHECK(kind_name(k) == "Stream");
  CHECK(kind_name(unwrap(k)) == "Conv1D");
  CHECK(k == stream(layers::Conv1D{3, 1, 1, 2, Padding::Causal}));
  CHECK_FALSE(k == LayerKind(layers::Conv1D{3, 1, 1, 2, Padding::Causal}));
}

TEST_CASE("running a graph twice is bit-identical") {
  const Graph g = infer_shapes(chain(), 5);
  const Tensor x = testing::random({5, 3}, 4);
  CHECK(bit_equal(run_non_streaming(g, x), run_non_streaming(g, x)));
}
