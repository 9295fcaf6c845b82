#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace streamkws {

/// Tensor dimensions. Axis 0 is time for sequence data.
using Shape = std::vector<std::int64_t>;

/// Product of all entries; 1 for an empty shape.
std::int64_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of 32-bit reals.
///
/// Every shape entry is at least 1 and the data length always equals the
/// product of the shape. Frames (slices along axis 0) are contiguous, so
/// appending or dropping whole frames is a block copy.
class Tensor {
 public:
  /// Zero-filled tensor. Throws InvalidShape on an empty shape or any entry < 1.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::int64_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  /// Length of axis 0.
  std::int64_t frames() const noexcept { return shape_.front(); }
  /// Number of elements in one slice along axis 0.
  std::int64_t frame_size() const noexcept {
    return static_cast<std::int64_t>(data_.size()) / shape_.front();
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::span<const float> frame(std::int64_t t) const;
  std::span<float> frame(std::int64_t t);

  float operator[](std::size_t i) const noexcept { return data_[i]; }
  float& operator[](std::size_t i) noexcept { return data_[i]; }

  /// Element (i, j) of a rank-2 tensor.
  float at(std::int64_t i, std::int64_t j) const;

  /// Same data under a new shape of equal size.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Frames [start, start + len) along axis 0. Throws OutOfRange.
Tensor slice_time(const Tensor& t, std::int64_t start, std::int64_t len);

/// The last `len` frames of `t`, left-padded with zero frames when `t` is shorter.
Tensor fit_time(const Tensor& t, std::int64_t len);

/// Concatenates tensors along axis 0; all other axes must agree.
Tensor concat_time(std::span<const Tensor> parts);

/// True when shapes match and every element has the same bit pattern.
bool bit_equal(const Tensor& a, const Tensor& b);

/// Largest |a - b| over all elements. Throws ShapeMismatch.
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace streamkws
