#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "streamkws/graph.hpp"
#include "streamkws/tensor.hpp"

namespace testing {

using namespace streamkws;

inline std::vector<float> random_values(std::size_t n, std::uint64_t seed, float scale = 1.0f) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::uniform_real_distribution<float> dist(-scale, scale);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Tensor random(Shape shape, std::uint64_t seed, float scale = 1.0f) {
  const auto n = static_cast<std::size_t>(shape_size(shape));
  return Tensor(std::move(shape), random_values(n, seed, scale));
}

inline std::shared_ptr<const Tensor> shared(Tensor t) {
  return std::make_shared<const Tensor>(std::move(t));
}

inline std::shared_ptr<const Tensor> constant(Shape shape, float value) {
  const auto n = static_cast<std::size_t>(shape_size(shape));
  return shared(Tensor(std::move(shape), std::vector<float>(n, value)));
}

inline Node make_node(LayerKind kind, WeightMap weights = {}, std::vector<std::string> inputs = {"x"}) {
  return Node{"n", std::move(kind), std::move(inputs), std::move(weights), {}};
}

inline WeightMap gru_weights(std::int64_t features, std::int64_t units, std::uint64_t seed,
                             const std::string& prefix = "") {
  WeightMap w;
  std::uint64_t s = seed;
  for (const char* gate : {"z", "r", "h"}) {
    w.emplace(prefix + "w_" + gate, shared(random({features, units}, s++, 0.5f)));
    w.emplace(prefix + "u_" + gate, shared(random({units, units}, s++, 0.5f)));
    w.emplace(prefix + "b_" + gate, shared(random({units}, s++, 0.2f)));
  }
  return w;
}

}  // namespace testing
