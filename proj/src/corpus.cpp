#include "streamkws/corpus.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "streamkws/errors.hpp"
#include "streamkws/serialize.hpp"
#include "streamkws/wav.hpp"

namespace streamkws {

namespace {

constexpr int kRate = 16000;
constexpr std::uint64_t kNoiseSeed = 20201015;

}  // namespace

const std::vector<std::string>& corpus_clip_names() {
  static const std::vector<std::string> names{"silence", "tone", "noise"};
  return names;
}

std::vector<std::int16_t> corpus_clip(const std::string& name) {
  std::vector<std::int16_t> pcm(kRate, 0);
  if (name == "silence") return pcm;
  if (name == "tone") {
    for (std::size_t n = 0; n < pcm.size(); ++n) {
      pcm[n] = to_pcm16(0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(n) / kRate));
    }
    return pcm;
  }
  if (name == "noise") {
    std::mt19937_64 rng(kNoiseSeed);
    for (auto& s : pcm) s = to_pcm16(static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
    return pcm;
  }
  throw InvalidSpec("unknown corpus clip '" + name + "'");
}

FeatureConfig golden_feature_config() {
  FeatureConfig cfg;
  cfg.transform = Transform::Dft;
  return cfg;
}

std::vector<std::filesystem::path> generate_corpus(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const MfccExtractor extractor(golden_feature_config());
  std::vector<std::filesystem::path> written;
  for (const auto& name : corpus_clip_names()) {
    const auto pcm = corpus_clip(name);
    const auto wav_path = dir / (name + ".wav");
    save_wav(wav_path, pcm, kRate);
    written.push_back(wav_path);

    std::vector<float> samples(pcm.size());
    for (std::size_t i = 0; i < pcm.size(); ++i) samples[i] = static_cast<float>(pcm[i]) / 32768.0f;
    const auto features_path = dir / (name + ".features.skgf");
    save_tensor(extractor.extract_clip(samples), features_path);
    written.push_back(features_path);
  }
  return written;
}

}  // namespace streamkws
