#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "streamkws/tensor.hpp"

namespace streamkws {

enum class Transform { Fft, Dft };

/// MFCC frontend parameters. Defaults: 16 kHz audio, 40 ms Hann windows every
/// 20 ms, 1024-point spectrum, 40 mel bands over 20-7600 Hz, 20 cepstra.
struct FeatureConfig {
  int sample_rate_hz = 16000;
  double window_ms = 40.0;
  double hop_ms = 20.0;
  Transform transform = Transform::Fft;
  int fft_size = 1024;  // power of two on the FFT path
  int mel_bins = 40;
  double mel_low_hz = 20.0;
  double mel_high_hz = 7600.0;
  int dct_coeffs = 20;
  double log_floor = 1e-12;

  std::int64_t window_samples() const;
  std::int64_t hop_samples() const;
  /// Throws InvalidConfig.
  void validate() const;
};

/// HTK mel scale: 2595 * log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// floor((n_samples - window) / hop) + 1. Throws TooShort.
std::int64_t frame_count(std::int64_t n_samples, const FeatureConfig& cfg);

/// Window -> magnitude spectrum -> mel filterbank -> log(x + floor) -> DCT-II.
///
/// On the DFT path the transform is an explicit cosine/sine matrix over the
/// window samples (bins 0..fft_size/2); the FFT path keeps no coefficient
/// tables. Computation is in double precision; features are returned as float.
class MfccExtractor {
 public:
  explicit MfccExtractor(FeatureConfig cfg);

  const FeatureConfig& config() const noexcept { return cfg_; }
  std::int64_t spectrum_bins() const noexcept { return cfg_.fft_size / 2 + 1; }

  /// |X_k| for k = 0..fft_size/2 of the windowed, zero-padded frame.
  std::vector<double> magnitude_spectrum(std::span<const float> frame) const;
  std::vector<double> mel_energies(std::span<const float> frame) const;

  /// Exactly window_samples() samples in, dct_coeffs features out. Throws ShapeMismatch.
  Tensor extract_frame(std::span<const float> frame) const;
  /// Row t is extract_frame(samples[t*hop, t*hop + window)). Throws TooShort.
  Tensor extract_clip(std::span<const float> samples) const;

  /// Mel weights, row-major [mel_bins, spectrum_bins].
  const std::vector<double>& filterbank() const noexcept { return filterbank_; }
  /// Number of materialized DFT coefficients (0 on the FFT path).
  std::size_t dft_coefficient_count() const noexcept { return dft_cos_.size() + dft_sin_.size(); }

 private:
  FeatureConfig cfg_;
  std::vector<double> window_;
  std::vector<double> filterbank_;
  std::vector<double> dct_;
  std::vector<double> dft_cos_;
  std::vector<double> dft_sin_;
};

Tensor extract_frame(const Tensor& samples, const FeatureConfig& cfg);
Tensor extract_clip(const Tensor& samples, const FeatureConfig& cfg);

/// Featurizes audio as it arrives, one hop at a time. Keeps the last
/// window/hop hops in a ring buffer and emits a [1, dct_coeffs] frame per hop
/// once the buffer has filled. Requires the window to be a whole number of hops.
class StreamingFrontend {
 public:
  explicit StreamingFrontend(FeatureConfig cfg);

  std::optional<Tensor> push(std::span<const float> hop);
  std::int64_t hops_seen() const noexcept { return hops_; }

 private:
  MfccExtractor extractor_;
  Tensor buffer_;  // [window / hop, hop]
  std::int64_t hops_ = 0;
};

}  // namespace streamkws
