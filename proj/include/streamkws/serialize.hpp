#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "streamkws/graph.hpp"
#include "streamkws/tensor.hpp"

// Container layout shared by model and tensor files (all integers little-endian):
//
//   "SKGF"            4-byte magic
//   version           u32 (kFormatVersion)
//   manifest_length   u64
//   manifest          UTF-8 JSON, manifest_length bytes
//   blob              IEEE-754 binary32 values, little-endian
//
// The manifest's "blob_floats" gives the blob length in floats; every weight
// records its float offset and length inside the blob.
namespace streamkws {

inline constexpr char kMagic[4] = {'S', 'K', 'G', 'F'};
inline constexpr std::uint32_t kFormatVersion = 1;

std::vector<std::uint8_t> serialize_graph(const Graph& g);
Graph deserialize_graph(const std::vector<std::uint8_t>& bytes);

/// Writes a shape-inferred graph. Throws IoError, or ShapeMismatch when the
/// graph's shapes have not been inferred.
void save(const Graph& g, const std::filesystem::path& path);
/// Throws IoError or FormatError.
Graph load(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_tensor(const Tensor& t);
Tensor deserialize_tensor(const std::vector<std::uint8_t>& bytes);
void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace streamkws
