#include "streamkws/frontend.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "streamkws/errors.hpp"
#include "streamkws/stream_transform.hpp"

namespace streamkws {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT; twiddles advance by complex recurrence.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const auto step = std::polar(1.0, -kTwoPi / static_cast<double>(len));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= step;
      }
    }
  }
}

}  // namespace

std::int64_t FeatureConfig::window_samples() const {
  return std::llround(sample_rate_hz * window_ms / 1000.0);
}

std::int64_t FeatureConfig::hop_samples() const {
  return std::llround(sample_rate_hz * hop_ms / 1000.0);
}

void FeatureConfig::validate() const {
  if (sample_rate_hz <= 0) throw InvalidConfig("sample rate must be positive");
  if (!(hop_ms > 0.0) || !(window_ms > hop_ms)) {
    throw InvalidConfig("need window_ms > hop_ms > 0");
  }
  if (hop_samples() < 1) throw InvalidConfig("hop is shorter than one sample");
  if (fft_size < window_samples()) throw InvalidConfig("fft_size is smaller than the window");
  if (transform == Transform::Fft && !is_power_of_two(fft_size)) {
    throw InvalidConfig("fft_size must be a power of two for the FFT path");
  }
  if (mel_bins < 1) throw InvalidConfig("mel_bins must be positive");
  if (dct_coeffs < 1 || dct_coeffs > mel_bins) {
    throw InvalidConfig("need 0 < dct_coeffs <= mel_bins");
  }
  if (!(mel_low_hz >= 0.0) || !(mel_low_hz < mel_high_hz) ||
      mel_high_hz > sample_rate_hz / 2.0) {
    throw InvalidConfig("need 0 <= mel_low < mel_high <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw InvalidConfig("log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::int64_t frame_count(std::int64_t n_samples, const FeatureConfig& cfg) {
  const auto win = cfg.window_samples();
  if (n_samples < win) {
    throw TooShort(std::to_string(n_samples) + " samples is shorter than one " +
                   std::to_string(win) + "-sample window");
  }
  return (n_samples - win) / cfg.hop_samples() + 1;
}

MfccExtractor::MfccExtractor(FeatureConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto win = static_cast<std::size_t>(cfg_.window_samples());
  const auto bins = static_cast<std::size_t>(spectrum_bins());
  const auto n_fft = static_cast<double>(cfg_.fft_size);

  window_.resize(win);
  for (std::size_t n = 0; n < win; ++n) {
    window_[n] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(n) / static_cast<double>(win));
  }

  // Triangles spaced uniformly on the mel scale; adjacent triangles cross at
  // half height so the weights on any bin sum to at most 1.
  const auto mels = static_cast<std::size_t>(cfg_.mel_bins);
  const double lo = hz_to_mel(cfg_.mel_low_hz), hi = hz_to_mel(cfg_.mel_high_hz);
  std::vector<double> edges(mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(mels + 1);
  }
  filterbank_.assign(mels * bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    const double m = hz_to_mel(static_cast<double>(k) * cfg_.sample_rate_hz / n_fft);
    for (std::size_t j = 0; j < mels; ++j) {
      const double left = edges[j], center = edges[j + 1], right = edges[j + 2];
      double w = 0.0;
      if (m > left && m <= center) {
        w = (m - left) / (center - left);
      } else if (m > center && m < right) {
        w = (right - m) / (right - center);
      }
      filterbank_[j * bins + k] = w;
    }
  }

  const auto coeffs = static_cast<std::size_t>(cfg_.dct_coeffs);
  dct_.resize(coeffs * mels);
  for (std::size_t i = 0; i < coeffs; ++i) {
    const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / static_cast<double>(mels));
    for (std::size_t j = 0; j < mels; ++j) {
      dct_[i * mels + j] = scale * std::cos(std::numbers::pi * static_cast<double>(i) *
                                            (static_cast<double>(j) + 0.5) /
                                            static_cast<double>(mels));
    }
  }

  if (cfg_.transform == Transform::Dft) {
    dft_cos_.resize(bins * win);
    dft_sin_.resize(bins * win);
    for (std::size_t k = 0; k < bins; ++k) {
      for (std::size_t n = 0; n < win; ++n) {
        // Reduce k*n mod N first so the angle stays small and exact.
        const auto phase = static_cast<double>((k * n) % static_cast<std::size_t>(cfg_.fft_size));
        dft_cos_[k * win + n] = std::cos(kTwoPi * phase / n_fft);
        dft_sin_[k * win + n] = -std::sin(kTwoPi * phase / n_fft);
      }
    }
  }
}

std::vector<double> MfccExtractor::magnitude_spectrum(std::span<const float> frame) const {
  const auto win = static_cast<std::size_t>(cfg_.window_samples());
  if (frame.size() != win) {
    throw ShapeMismatch("frame has " + std::to_string(frame.size()) + " samples, expected " +
                        std::to_string(win));
  }
  const auto bins = static_cast<std::size_t>(spectrum_bins());
  std::vector<double> mag(bins);
  if (cfg_.transform == Transform::Dft) {
    std::vector<double> x(win);
    for (std::size_t n = 0; n < win; ++n) x[n] = frame[n] * window_[n];
    for (std::size_t k = 0; k < bins; ++k) {
      const double* c = dft_cos_.data() + k * win;
      const double* s = dft_sin_.data() + k * win;
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < win; ++n) {
        re += x[n] * c[n];
        im += x[n] * s[n];
      }
      mag[k] = std::hypot(re, im);
    }
    return mag;
  }
  std::vector<std::complex<double>> a(static_cast<std::size_t>(cfg_.fft_size));
  for (std::size_t n = 0; n < win; ++n) a[n] = frame[n] * window_[n];
  fft(a);
  for (std::size_t k = 0; k < bins; ++k) mag[k] = std::abs(a[k]);
  return mag;
}

std::vector<double> MfccExtractor::mel_energies(std::span<const float> frame) const {
  const auto spectrum = magnitude_spectrum(frame);
  const auto bins = spectrum.size();
  const auto mels = static_cast<std::size_t>(cfg_.mel_bins);
  std::vector<double> energies(mels, 0.0);
  for (std::size_t j = 0; j < mels; ++j) {
    const double* w = filterbank_.data() + j * bins;
    for (std::size_t k = 0; k < bins; ++k) energies[j] += w[k] * spectrum[k];
  }
  return energies;
}

Tensor MfccExtractor::extract_frame(std::span<const float> frame) const {
  const auto energies = mel_energies(frame);
  const auto mels = energies.size();
  std::vector<double> logs(mels);
  for (std::size_t j = 0; j < mels; ++j) logs[j] = std::log(energies[j] + cfg_.log_floor);
  const auto coeffs = static_cast<std::size_t>(cfg_.dct_coeffs);
  std::vector<float> out(coeffs);
  for (std::size_t i = 0; i < coeffs; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < mels; ++j) acc += dct_[i * mels + j] * logs[j];
    out[i] = static_cast<float>(acc);
  }
  return Tensor({static_cast<std::int64_t>(coeffs)}, std::move(out));
}

Tensor MfccExtractor::extract_clip(std::span<const float> samples) const {
  const auto frames = frame_count(static_cast<std::int64_t>(samples.size()), cfg_);
  const auto win = static_cast<std::size_t>(cfg_.window_samples());
  const auto hop = static_cast<std::size_t>(cfg_.hop_samples());
  Tensor out({frames, cfg_.dct_coeffs});
  for (std::int64_t t = 0; t < frames; ++t) {
    const Tensor row = extract_frame(samples.subspan(static_cast<std::size_t>(t) * hop, win));
    std::copy(row.data().begin(), row.data().end(), out.frame(t).begin());
  }
  return out;
}

Tensor extract_frame(const Tensor& samples, const FeatureConfig& cfg) {
  return MfccExtractor(cfg).extract_frame(samples.data());
}

Tensor extract_clip(const Tensor& samples, const FeatureConfig& cfg) {
  return MfccExtractor(cfg).extract_clip(samples.data());
}

namespace {

Tensor empty_audio_buffer(const FeatureConfig& cfg) {
  cfg.validate();
  const auto win = cfg.window_samples(), hop = cfg.hop_samples();
  if (win % hop != 0) {
    throw InvalidConfig("streaming frontend needs the window to be a whole number of hops");
  }
  return Tensor({win / hop, hop});
}

}  // namespace

StreamingFrontend::StreamingFrontend(FeatureConfig cfg)
    : extractor_(cfg), buffer_(empty_audio_buffer(cfg)) {}

std::optional<Tensor> StreamingFrontend::push(std::span<const float> hop) {
  const auto hop_len = buffer_.dim(1);
  if (static_cast<std::int64_t>(hop.size()) != hop_len) {
    throw ShapeMismatch("expected a hop of " + std::to_string(hop_len) + " samples");
  }
  buffer_ = ring_buffer_step(buffer_, Tensor({1, hop_len}, std::vector<float>(hop.begin(), hop.end())));
  ++hops_;
  if (hops_ < buffer_.frames()) return std::nullopt;
  return extractor_.extract_frame(buffer_.data()).reshaped({1, extractor_.config().dct_coeffs});
}

}  // namespace streamkws
