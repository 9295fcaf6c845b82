#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "streamkws/errors.hpp"
#include "streamkws/runtime.hpp"
#include "streamkws/serialize.hpp"
#include "streamkws/stream_transform.hpp"
#include "streamkws/zoo.hpp"

using namespace streamkws;
using testing::constant;

TEST_CASE("names round trip and parse case-insensitively") {
  CHECK(all_models().size() == 10);
  for (auto name : all_models()) {
    CHECK(parse_model_name(model_name(name)) == name);
    CHECK(valid_model_names().find(model_name(name)) != std::string::npos);
  }
  CHECK(parse_model_name("DSCNN") == ModelName::DSCNN);
  CHECK(parse_model_name("Gru_Net") == ModelName::GRU_NET);
  CHECK_FALSE(parse_model_name("resnet").has_value());
  CHECK_FALSE(parse_model_name("").has_value());
}

TEST_CASE("parameter counting") {
  GraphBuilder b;
  b.input("input", {10});
  b.add("dense", layers::Dense{5, true}, {"input"},
        {{"kernel", constant({10, 5}, 0.0f)}, {"bias", constant({5}, 0.0f)}});
  b.output("dense");
  CHECK(count_params(std::move(b).build()) == 10 * 5 + 5);

  GraphBuilder c;
  c.input("input", {8});
  c.add("conv", layers::Conv2D{3, 3, 1, 1, 1, 4, Padding::Causal}, {"input"},
        {{"kernel", constant({3, 3, 1, 4}, 0.0f)}, {"bias", constant({4}, 0.0f)}});
  c.output("conv");
  CHECK(count_params(std::move(c).build()) == 3 * 3 * 1 * 4 + 4);

  // dense 20->64, 64->32, flatten 49*32 -> 64, 64 -> 12, all with bias.
  const std::int64_t dnn = (20 * 64 + 64) + (64 * 32 + 32) + (49 * 32 * 64 + 64) + (64 * 12 + 12);
  CHECK(count_params(build(ZooSpec{ModelName::DNN})) == dnn);
}

TEST_CASE("receptive field") {
  CHECK(receptive_field(build(ZooSpec{ModelName::DNN})) == 49);
  // Two 3-frame convs widen a 49-frame flatten by 2 + 2.
  CHECK(receptive_field(build(ZooSpec{ModelName::CNN})) == 53);
  CHECK(receptive_field(build_conv_flatten_dense(1)) == 6);
  CHECK(receptive_field(build(ZooSpec{ModelName::DNN, 10, 20, 12, 0})) == 10);
}

TEST_CASE("builds are deterministic in the seed") {
  for (auto name : all_models()) {
    CAPTURE(model_name(name));
    const auto a = serialize_graph(build(ZooSpec{name, 49, 20, 12, 7}));
    CHECK(a == serialize_graph(build(ZooSpec{name, 49, 20, 12, 7})));
    CHECK(a != serialize_graph(build(ZooSpec{name, 49, 20, 12, 8})));
  }
}

TEST_CASE("every model runs and ends in a softmax over the classes") {
  for (auto name : all_models()) {
    CAPTURE(model_name(name));
    const Graph g = build(ZooSpec{name, 49, 20, 7, 3});
    CHECK(g.node(g.output_ids.front()).out_shape == Shape{1, 7});
    const Tensor y = run_non_streaming(g, testing::random({49, 20}, 4));
    double sum = 0.0;
    for (float v : y.data()) {
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("initial weights stay in their ranges") {
  for (auto name : all_models()) {
    CAPTURE(model_name(name));
    const Graph g = build(ZooSpec{name});
    for (const auto& [id, node] : g.nodes) {
      for (const auto& [wname, w] : node.weights) {
        CAPTURE(id);
        CAPTURE(wname);
        float lo = -1.0f, hi = 1.0f;
        if (wname == "bias" || wname == "offset" || wname.rfind("b_", 0) == 0) lo = -0.1f, hi = 0.1f;
        if (wname == "scale") lo = 0.5f, hi = 1.5f;
        const auto [mn, mx] = std::minmax_element(w->data().begin(), w->data().end());
        CHECK(*mn >= lo);
        CHECK(*mx <= hi);
      }
    }
  }
}

TEST_CASE("streamability of the zoo") {
  for (auto name : all_models()) {
    CAPTURE(model_name(name));
    const Graph g = build(ZooSpec{name});
    const bool expect_ok = name != ModelName::CNN_STRIDED && name != ModelName::DSCNN_STRIDED &&
                           name != ModelName::MHATT_RNN;
    if (expect_ok) {
      CHECK_NOTHROW(to_streaming(g, StateMode::Internal, 49));
    } else {
      CHECK_THROWS_AS(to_streaming(g, StateMode::Internal, 49), NotStreamable);
    }
  }
}

TEST_CASE("invalid specs") {
  CHECK_THROWS_AS(build(ZooSpec{ModelName::CNN, 49, 20, 1, 0}), InvalidSpec);
  CHECK_THROWS_AS(build(ZooSpec{ModelName::CNN, 0, 20, 12, 0}), InvalidSpec);
  CHECK_THROWS_AS(build(ZooSpec{ModelName::CNN, 49, 2, 12, 0}), InvalidSpec);
  CHECK_THROWS_AS(build(ZooSpec{ModelName::TC_RESNET, 5, 20, 12, 0}), InvalidSpec);
  CHECK_NOTHROW(build(ZooSpec{ModelName::CNN, 25, 10, 2, 0}));
}
