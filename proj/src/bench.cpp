#include "streamkws/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <random>

#include "streamkws/errors.hpp"
#include "streamkws/frontend.hpp"
#include "streamkws/runtime.hpp"
#include "streamkws/zoo.hpp"

namespace streamkws {

namespace {

Shape input_frame_shape(const Graph& g) {
  if (g.input_ids.size() != 1) throw ShapeMismatch("expected exactly one graph input");
  return kind_as<layers::Input>(g.node(g.input_ids.front()).kind)->frame_shape;
}

Shape with_time(std::int64_t t, const Shape& frame) {
  Shape s{t};
  s.insert(s.end(), frame.begin(), frame.end());
  return s;
}

FeatureConfig frontend_for(const Shape& frame) {
  FeatureConfig cfg;
  if (frame.size() != 1 || frame[0] > cfg.mel_bins) {
    throw ShapeMismatch("end-to-end timing needs a rank-1 input frame of at most " +
                        std::to_string(cfg.mel_bins) + " features");
  }
  cfg.dct_coeffs = static_cast<int>(frame[0]);
  return cfg;
}

// Keeps results observable so the timed calls cannot be optimized away.
volatile float g_sink = 0.0f;

}  // namespace

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<float> v(static_cast<std::size_t>(shape_size(shape)));
  for (auto& x : v) x = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0);
  return Tensor(std::move(shape), std::move(v));
}

LatencyStats summarize(const std::vector<double>& sorted_ms) {
  LatencyStats s;
  s.trials = static_cast<std::int64_t>(sorted_ms.size());
  if (sorted_ms.empty()) return s;
  const auto n = sorted_ms.size();
  s.median_ms = n % 2 ? sorted_ms[n / 2] : 0.5 * (sorted_ms[n / 2 - 1] + sorted_ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
  s.p90_ms = sorted_ms[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

LatencyStats measure(const std::function<void()>& fn, std::int64_t trials, std::int64_t warmup) {
  if (trials < 1 || warmup < 0) throw InvalidConfig("need trials >= 1 and warmup >= 0");
  for (std::int64_t i = 0; i < warmup; ++i) fn();
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(trials));
  for (std::int64_t i = 0; i < trials; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  LatencyStats s = summarize(ms);
  s.warmup = warmup;
  return s;
}

BenchReport bench_graph(const Graph& g, std::int64_t trials, std::int64_t warmup,
                        bool end_to_end, std::uint64_t seed) {
  BenchReport report;
  report.mode = std::string(mode_name(g.mode));
  report.params = count_params(g);
  report.end_to_end = end_to_end;
  const Shape frame = input_frame_shape(g);

  if (!g.is_streaming()) {
    const std::int64_t t = g.time_len > 0 ? g.time_len : g.train_time_len;
    if (t < 1) throw ShapeMismatch("graph has no inferred time length");
    report.frames = t;
    if (end_to_end) {
      const FeatureConfig cfg = frontend_for(frame);
      const MfccExtractor extractor(cfg);
      const auto samples = (t - 1) * cfg.hop_samples() + cfg.window_samples();
      const Tensor audio = random_tensor({samples}, seed);
      report.stats = measure([&] {
        const Tensor x = extractor.extract_clip(audio.data());
        g_sink = g_sink + run_non_streaming(g, x)[0];
      }, trials, warmup);
    } else {
      const Tensor x = random_tensor(with_time(t, frame), seed);
      report.stats = measure([&] { g_sink = g_sink + run_non_streaming(g, x)[0]; }, trials, warmup);
    }
    return report;
  }

  report.frames = 1;
  const Tensor x = random_tensor(with_time(1, frame), seed);
  std::optional<StreamSession> session;
  StateMap states;
  if (g.mode == GraphMode::StreamingInternal) {
    session.emplace(std::make_shared<const Graph>(g));
  } else {
    states = zero_states(g);
  }
  auto step = [&](const Tensor& in) {
    if (session) {
      g_sink = g_sink + session->step(in).output[0];
    } else {
      StepResult r = step_external(g, in, states);
      states = std::move(r.new_states);
      g_sink = g_sink + r.output[0];
    }
  };
  if (end_to_end) {
    const FeatureConfig cfg = frontend_for(frame);
    StreamingFrontend frontend(cfg);
    const Tensor hop = random_tensor({cfg.hop_samples()}, seed + 1);
    while (!frontend.push(hop.data())) {
    }
    report.stats = measure([&] { step(*frontend.push(hop.data())); }, trials, warmup);
  } else {
    report.stats = measure([&] { step(x); }, trials, warmup);
  }
  return report;
}

std::vector<Tensor> stream_outputs(const Graph& g, const Tensor& x) {
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(x.frames()));
  if (g.mode == GraphMode::StreamingInternal) {
    StreamSession session(std::make_shared<const Graph>(g));
    for (std::int64_t t = 0; t < x.frames(); ++t) out.push_back(session.step(slice_time(x, t, 1)).output);
  } else if (g.mode == GraphMode::StreamingExternal) {
    StateMap states = zero_states(g);
    for (std::int64_t t = 0; t < x.frames(); ++t) {
      StepResult r = step_external(g, slice_time(x, t, 1), states);
      states = std::move(r.new_states);
      out.push_back(std::move(r.output));
    }
  } else {
    throw WrongMode("expected a streaming graph");
  }
  return out;
}

VerifyReport verify_pair(const Graph& reference, const Graph& stream, std::int64_t frames,
                         std::uint64_t seed) {
  if (!stream.is_streaming()) throw WrongMode("--stream must be a streaming graph");
  if (frames < 1) throw InvalidConfig("frames must be positive");
  const Shape frame = input_frame_shape(stream);
  if (input_frame_shape(reference) != frame) throw ShapeMismatch("input frame shapes differ");

  const Tensor x = random_tensor(with_time(frames, frame), seed);
  const auto streamed = stream_outputs(stream, x);
  std::vector<Tensor> expected;
  VerifyReport report;
  if (reference.is_streaming()) {
    report.reference = "streaming";
    expected = stream_outputs(reference, x);
  } else {
    report.reference = "causal_prefix";
    const std::int64_t train = stream.train_time_len > 0 ? stream.train_time_len : frames;
    for (std::int64_t t = 0; t < frames; ++t) {
      expected.push_back(run_causal_prefix(reference, slice_time(x, 0, t + 1), train));
    }
  }
  report.steps = frames;
  report.bit_equal = true;
  for (std::int64_t t = 0; t < frames; ++t) {
    const auto i = static_cast<std::size_t>(t);
    report.max_abs_diff = std::max(report.max_abs_diff, max_abs_diff(expected[i], streamed[i]));
    report.bit_equal = report.bit_equal && bit_equal(expected[i], streamed[i]);
  }
  report.pass = report.max_abs_diff < kVerifyTolerance;
  return report;
}

}  // namespace streamkws
