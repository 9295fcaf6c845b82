#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streamkws/graph.hpp"

namespace streamkws {

enum class ModelName {
  DNN,
  CNN,
  CNN_STRIDED,
  CRNN,
  GRU_NET,
  DSCNN,
  DSCNN_STRIDED,
  SVDF_NET,
  TC_RESNET,
  MHATT_RNN,
};

/// Lower-case CLI names: "dnn", "cnn", "cnn_strided", ...
std::string_view model_name(ModelName name);
std::optional<ModelName> parse_model_name(std::string_view text);
const std::vector<ModelName>& all_models();
/// Comma-separated list of every CLI name.
std::string valid_model_names();

struct ZooSpec {
  ModelName name = ModelName::DNN;
  std::int64_t input_frames = 49;
  std::int64_t input_features = 20;
  std::int64_t num_classes = 12;
  std::uint64_t seed = 0;
};

/// Non-streaming keyword-spotting graph with seeded random weights, shapes
/// inferred at spec.input_frames. Kernels are Glorot-uniform, U(-s, s) with
/// s = sqrt(6 / (fan_in + fan_out)); biases and batch-norm offsets are
/// U(-0.1, 0.1) and batch-norm scales U(0.5, 1.5). Throws InvalidSpec.
Graph build(const ZooSpec& spec);

/// The 6x3-input example: Conv2D 3x3 (valid, 1 filter) -> Flatten -> Dense.
Graph build_conv_flatten_dense(std::uint64_t seed, std::int64_t units = 4);

/// Total number of scalar weights.
std::int64_t count_params(const Graph& g);

/// Number of input frames the last output frame depends on, composed along
/// the longest path. Flatten / GlobalAvgPoolTime count their whole input.
/// Requires inferred shapes.
std::int64_t receptive_field(const Graph& g);

}  // namespace streamkws
