#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace streamkws {

struct WavData {
  int sample_rate_hz = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::vector<float> samples;  // interleaved, scaled by 1/32768
};

/// Parses a RIFF/WAVE file holding 16-bit PCM. Throws UnsupportedWav.
WavData parse_wav(const std::vector<std::uint8_t>& bytes);

/// Mono 16-bit PCM samples normalized to [-1, 1). Throws UnsupportedWav when
/// the file is not mono 16-bit PCM at `sample_rate_hz`, IoError when unreadable.
std::vector<float> load_wav_mono(const std::filesystem::path& path, int sample_rate_hz = 16000);

/// RIFF/WAVE bytes for mono 16-bit PCM.
std::vector<std::uint8_t> encode_wav(const std::vector<std::int16_t>& pcm, int sample_rate_hz);
void save_wav(const std::filesystem::path& path, const std::vector<std::int16_t>& pcm,
              int sample_rate_hz);

/// Rounds sample * 32768 to the nearest integer, clamped to the int16 range.
std::int16_t to_pcm16(double sample);

}  // namespace streamkws
