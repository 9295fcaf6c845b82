#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "streamkws/graph.hpp"
#include "streamkws/tensor.hpp"

namespace streamkws {

struct LatencyStats {
  double median_ms = 0.0;
  double p90_ms = 0.0;
  std::int64_t trials = 0;
  std::int64_t warmup = 0;
};

/// Median and 90th percentile (nearest rank) of `sorted_ms`, which must be sorted.
LatencyStats summarize(const std::vector<double>& sorted_ms);

/// Runs `fn` warmup + trials times on a monotonic clock; only the timed trials count.
LatencyStats measure(const std::function<void()>& fn, std::int64_t trials, std::int64_t warmup);

struct BenchReport {
  std::string mode;
  std::int64_t params = 0;
  std::int64_t frames = 0;  // frames consumed per timed call
  bool end_to_end = false;
  LatencyStats stats;
};

/// Non-streaming graphs time one pass over `g.time_len` frames; streaming
/// graphs time one step. With `end_to_end` the timed call also includes MFCC
/// extraction (a whole clip, or one 20 ms hop), which needs a rank-1 input
/// frame no wider than the frontend's mel bank.
BenchReport bench_graph(const Graph& g, std::int64_t trials, std::int64_t warmup,
                        bool end_to_end = false, std::uint64_t seed = 0);

struct VerifyReport {
  float max_abs_diff = 0.0f;
  bool bit_equal = false;
  bool pass = false;
  std::int64_t steps = 0;
  std::string reference;  // "causal_prefix" or "streaming"
};

inline constexpr float kVerifyTolerance = 1e-5f;

/// Streams `frames` seeded random frames through `stream` and compares every
/// step against `reference`: a non-streaming graph is evaluated on each causal
/// prefix, a streaming graph is stepped alongside. pass = max_abs_diff < 1e-5.
VerifyReport verify_pair(const Graph& reference, const Graph& stream, std::int64_t frames,
                         std::uint64_t seed);

/// Uniform [-1, 1) tensor from a 64-bit Mersenne Twister.
Tensor random_tensor(Shape shape, std::uint64_t seed);

/// Outputs of every step of a streaming graph (Internal or External) over `x`.
std::vector<Tensor> stream_outputs(const Graph& g, const Tensor& x);

}  // namespace streamkws
