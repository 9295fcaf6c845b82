#include "streamkws/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "streamkws/errors.hpp"

namespace streamkws {

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw InvalidShape("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d < 1) throw InvalidShape("invalid tensor shape " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_)) {
    throw InvalidShape("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
  }
}

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw OutOfRange("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape_));
  }
  return shape_[axis];
}

std::span<const float> Tensor::frame(std::int64_t t) const {
  if (t < 0 || t >= frames()) throw OutOfRange("frame index out of range");
  const auto fs = static_cast<std::size_t>(frame_size());
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(t) * fs, fs);
}

std::span<float> Tensor::frame(std::int64_t t) {
  if (t < 0 || t >= frames()) throw OutOfRange("frame index out of range");
  const auto fs = static_cast<std::size_t>(frame_size());
  return std::span<float>(data_).subspan(static_cast<std::size_t>(t) * fs, fs);
}

float Tensor::at(std::int64_t i, std::int64_t j) const {
  if (rank() != 2) throw ShapeMismatch("at(i, j) requires a rank-2 tensor");
  if (i < 0 || i >= shape_[0] || j < 0 || j >= shape_[1]) {
    throw OutOfRange("index out of range");
  }
  return data_[static_cast<std::size_t>(i * shape_[1] + j)];
}

Tensor Tensor::reshaped(Shape shape) const {
  check_shape(shape);
  if (shape_size(shape) != static_cast<std::int64_t>(data_.size())) {
    throw ShapeMismatch("cannot reshape " + shape_to_string(shape_) + " to " +
                        shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor slice_time(const Tensor& t, std::int64_t start, std::int64_t len) {
  if (start < 0 || len < 1 || start + len > t.frames()) {
    throw OutOfRange("slice [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") outside " +
                     std::to_string(t.frames()) + " frames");
  }
  Shape shape = t.shape();
  shape[0] = len;
  const auto fs = t.frame_size();
  auto first = t.data().begin() + start * fs;
  return Tensor(std::move(shape), std::vector<float>(first, first + len * fs));
}

Tensor fit_time(const Tensor& t, std::int64_t len) {
  if (len < 1) throw OutOfRange("fit_time length must be positive");
  if (t.frames() >= len) return slice_time(t, t.frames() - len, len);
  Shape shape = t.shape();
  shape[0] = len;
  Tensor out(std::move(shape));
  const auto offset = (len - t.frames()) * t.frame_size();
  std::copy(t.data().begin(), t.data().end(), out.data().begin() + offset);
  return out;
}

Tensor concat_time(std::span<const Tensor> parts) {
  if (parts.empty()) throw InvalidShape("concat_time of zero tensors");
  Shape shape = parts.front().shape();
  std::int64_t frames = 0;
  std::vector<float> data;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw ShapeMismatch("concat_time: frame shapes differ");
    }
    frames += p.frames();
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  shape[0] = frames;
  return Tensor(std::move(shape), std::move(data));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch("max_abs_diff: " + shape_to_string(a.shape()) + " vs " +
                        shape_to_string(b.shape()));
  }
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float d = std::abs(a[i] - b[i]);
    if (std::isnan(d)) return std::numeric_limits<float>::infinity();
    m = std::max(m, d);
  }
  return m;
}

}  // namespace streamkws
