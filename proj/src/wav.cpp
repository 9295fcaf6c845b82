#include "streamkws/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "streamkws/errors.hpp"
#include "streamkws/serialize.hpp"

namespace streamkws {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

WavData parse_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw UnsupportedWav("not a RIFF/WAVE file");
  }
  WavData wav;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (len > bytes.size() - body) throw UnsupportedWav("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw UnsupportedWav("fmt chunk too short");
      const std::uint8_t* f = bytes.data() + body;
      if (read_u16(f) != 1) throw UnsupportedWav("only PCM encoding is supported");
      wav.channels = read_u16(f + 2);
      wav.sample_rate_hz = static_cast<int>(read_u32(f + 4));
      wav.bits_per_sample = read_u16(f + 14);
      if (wav.bits_per_sample != 16) throw UnsupportedWav("only 16-bit samples are supported");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw UnsupportedWav("data chunk before fmt chunk");
      const std::size_t n = len / 2;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        wav.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      have_data = true;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt || !have_data) throw UnsupportedWav("missing fmt or data chunk");
  return wav;
}

std::vector<float> load_wav_mono(const std::filesystem::path& path, int sample_rate_hz) {
  WavData wav = parse_wav(read_file(path));
  if (wav.channels != 1) {
    throw UnsupportedWav(path.string() + ": expected mono, got " + std::to_string(wav.channels) +
                         " channels");
  }
  if (wav.sample_rate_hz != sample_rate_hz) {
    throw UnsupportedWav(path.string() + ": expected " + std::to_string(sample_rate_hz) +
                         " Hz, got " + std::to_string(wav.sample_rate_hz) + " Hz");
  }
  return std::move(wav.samples);
}

std::int16_t to_pcm16(double sample) {
  const double scaled = std::nearbyint(sample * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

std::vector<std::uint8_t> encode_wav(const std::vector<std::int16_t>& pcm, int sample_rate_hz) {
  const auto data_len = static_cast<std::uint32_t>(pcm.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_len);
  for (auto s : pcm) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

void save_wav(const std::filesystem::path& path, const std::vector<std::int16_t>& pcm,
              int sample_rate_hz) {
  write_file(path, encode_wav(pcm, sample_rate_hz));
}

}  // namespace streamkws
