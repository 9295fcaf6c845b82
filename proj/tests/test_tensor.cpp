#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "streamkws/errors.hpp"

using namespace streamkws;

TEST_CASE("zeros fills with exact zeros") {
  const Tensor t = Tensor::zeros({3, 3});
  CHECK(t.shape() == Shape{3, 3});
  CHECK(t.size() == 9);
  for (float v : t.data()) CHECK(v == 0.0f);
  const Tensor one = Tensor::zeros({1});
  CHECK(one.size() == 1);
  CHECK(one[0] == 0.0f);
}

TEST_CASE("degenerate shapes are rejected") {
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), InvalidShape);
  CHECK_THROWS_AS(Tensor::zeros({-1}), InvalidShape);
  CHECK_THROWS_AS(Tensor::zeros({}), InvalidShape);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), InvalidShape);
}

TEST_CASE("row-major indexing matches a nested-loop reader") {
  const Tensor t = testing::random({4, 5}, 1);
  const auto data = t.data();
  std::size_t flat = 0;
  for (std::int64_t i = 0; i < 4; ++i) {
    for (std::int64_t j = 0; j < 5; ++j) {
      CHECK(t.at(i, j) == data[flat]);
      CHECK(t.frame(i)[static_cast<std::size_t>(j)] == data[flat]);
      ++flat;
    }
  }
  CHECK(t.frames() == 4);
  CHECK(t.frame_size() == 5);
}

TEST_CASE("slice_time") {
  const Tensor t = testing::random({6, 3}, 2);
  SUBCASE("full slice is the identity") { CHECK(bit_equal(slice_time(t, 0, 6), t)); }
  SUBCASE("last three frames") {
    const Tensor s = slice_time(t, 3, 3);
    CHECK(s.shape() == Shape{3, 3});
    for (std::int64_t i = 0; i < 3; ++i) {
      for (std::int64_t j = 0; j < 3; ++j) CHECK(s.at(i, j) == t.at(i + 3, j));
    }
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(slice_time(t, 5, 2), OutOfRange);
    CHECK_THROWS_AS(slice_time(t, -1, 2), OutOfRange);
    CHECK_THROWS_AS(slice_time(t, 0, 0), OutOfRange);
  }
}

TEST_CASE("fit_time keeps the newest frames and zero-pads the past") {
  const Tensor t({3, 1}, {1, 2, 3});
  CHECK(fit_time(t, 2) == Tensor({2, 1}, {2, 3}));
  CHECK(fit_time(t, 5) == Tensor({5, 1}, {0, 0, 1, 2, 3}));
  CHECK(fit_time(t, 3) == t);
}

TEST_CASE("concat_time joins frames") {
  const std::vector<Tensor> parts{Tensor({1, 2}, {1, 2}), Tensor({2, 2}, {3, 4, 5, 6})};
  CHECK(concat_time(parts) == Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
  const std::vector<Tensor> bad{Tensor({1, 2}), Tensor({1, 3})};
  CHECK_THROWS_AS(concat_time(bad), ShapeMismatch);
}

TEST_CASE("comparison helpers") {
  const Tensor a({2}, {1.0f, 2.0f});
  const Tensor b({2}, {1.0f, 2.5f});
  CHECK(max_abs_diff(a, b) == doctest::Approx(0.5f));
  CHECK(bit_equal(a, a));
  CHECK_FALSE(bit_equal(a, b));
  CHECK_FALSE(bit_equal(Tensor({1}, {0.0f}), Tensor({1}, {-0.0f})));
  CHECK_THROWS_AS(max_abs_diff(a, Tensor({3})), ShapeMismatch);
  const Tensor nan({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK(std::isinf(max_abs_diff(a, nan)));
}

TEST_CASE("reshape preserves data") {
  const Tensor t = testing::random({2, 3}, 3);
  const Tensor r = t.reshaped({3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK(std::equal(r.data().begin(), r.data().end(), t.data().begin()));
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeMismatch);
}
