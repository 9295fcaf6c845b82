#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "streamkws/frontend.hpp"

namespace streamkws {

/// Corpus clip names, each 1 s of 16 kHz mono audio:
/// "silence" (all zeros), "tone" (1 kHz sine, amplitude 0.5),
/// "noise" (uniform white noise in [-0.5, 0.5), fixed seed).
const std::vector<std::string>& corpus_clip_names();

/// 16-bit PCM samples of a corpus clip. Throws InvalidSpec for unknown names.
std::vector<std::int16_t> corpus_clip(const std::string& name);

/// Writes <name>.wav and <name>.features.skgf (DFT-path MFCC golden, default
/// FeatureConfig) for every clip. Returns the paths written. Throws IoError.
std::vector<std::filesystem::path> generate_corpus(const std::filesystem::path& dir);

/// Golden feature configuration: defaults with the DFT transform.
FeatureConfig golden_feature_config();

}  // namespace streamkws
