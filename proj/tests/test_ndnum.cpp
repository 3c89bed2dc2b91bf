#include <cmath>
#include <limits>

#include "doctest.h"
#include "sbmeter/ndnum.hpp"
#include "test_support.hpp"

using namespace sbmeter::ndnum;

TEST_CASE("Grid and ImageTensor construction checks") {
  CHECK_THROWS_AS(Grid(2, 3, std::vector<double>(5)), std::invalid_argument);
  CHECK_THROWS_AS(ImageTensor(1, 2, 2, std::vector<double>(3)), std::invalid_argument);
  CHECK_THROWS_AS(ImageTensor(1, 1, 2, {0.0, std::numeric_limits<double>::quiet_NaN()}), std::domain_error);
  CHECK_THROWS_AS(ImageTensor(1, 1, 2, {std::numeric_limits<double>::infinity(), 0.0}), std::domain_error);

  ImageTensor x(2, 3, 4);
  CHECK(x.size() == 24);
  x(1, 2, 3) = 5.0;
  CHECK(x.data()[23] == 5.0);
  CHECK(x.channel(1)(2, 3) == 5.0);
}

TEST_CASE("channel round trip") {
  auto x = testing::random_image(1, 3, 4, 5);
  ImageTensor y(3, 4, 5);
  for (std::size_t c = 0; c < 3; ++c) y.set_channel(c, x.channel(c));
  CHECK(max_abs_diff(x, y) == 0.0);
  CHECK_THROWS(y.set_channel(0, Grid(5, 4)));
}

TEST_CASE("arithmetic and norms") {
  ImageTensor a(1, 1, 2, {3.0, 0.0});
  ImageTensor b(1, 1, 2, {0.0, 4.0});
  CHECK(l2_norm(a - b) == doctest::Approx(5.0));
  CHECK(l2_distance(a, b) == doctest::Approx(5.0));
  CHECK(dot(a, b) == 0.0);
  CHECK(dot(a, a) == 9.0);
  const auto c = a + 2.0 * b;
  CHECK(c(0, 0, 1) == 8.0);
  CHECK(max_abs_diff(a, c) == 8.0);
  ImageTensor wrong(1, 2, 1);
  CHECK_THROWS_AS(require_same_shape(a, wrong), std::invalid_argument);
  CHECK_THROWS_AS(a += wrong, std::invalid_argument);
  CHECK_THROWS_AS(dot(a, wrong), std::invalid_argument);
}

TEST_CASE("dft2 puts the sum at the center bin") {
  const auto g = testing::random_grid(3, 6, 7);
  const auto s = dft2(g);
  double sum = 0.0;
  for (double v : g.values) sum += v;
  CHECK(s(3, 3).real() == doctest::Approx(sum).epsilon(1e-12));
  CHECK(std::abs(s(3, 3).imag()) < 1e-12);
}

TEST_CASE("dft2 matches a direct transform") {
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{4, 4}, {5, 6}, {7, 3}, {8, 8}, {2, 9}}) {
    CAPTURE(h);
    CAPTURE(w);
    const auto g = testing::random_grid(h * 31 + w, h, w);
    const auto fast = dft2(g);
    const auto slow = testing::naive_centered_dft(g);
    double err = 0.0;
    for (std::size_t k = 0; k < slow.size(); ++k) err = std::max(err, std::abs(fast.coeffs[k] - slow[k]));
    CHECK(err < 1e-10);
  }
}

TEST_CASE("idft2 inverts dft2 and Parseval holds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t h = 2 + seed % 7, w = 3 + (seed * 5) % 9;
    const auto g = testing::random_grid(seed, h, w);
    const auto s = dft2(g);
    double residue = -1.0;
    const auto back = idft2(s, &residue);
    double err = 0.0;
    for (std::size_t k = 0; k < g.values.size(); ++k) err = std::max(err, std::abs(back.values[k] - g.values[k]));
    CHECK(err < 1e-12);
    CHECK(residue >= 0.0);
    CHECK(residue < 1e-12);

    double e_space = 0.0, e_freq = 0.0;
    for (double v : g.values) e_space += v * v;
    for (auto c : s.coeffs) e_freq += std::norm(c);
    CHECK(e_freq == doctest::Approx(e_space * static_cast<double>(h * w)).epsilon(1e-12));
  }
}

TEST_CASE("dft2 input checks") {
  CHECK_THROWS_AS(dft2(Grid(1, 4)), std::domain_error);
  CHECK_THROWS_AS(dft2(Grid(4, 1)), std::domain_error);
  Grid g(2, 2);
  g(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(dft2(g), std::domain_error);
}

TEST_CASE("a pure cosine lands on two symmetric bins") {
  const std::size_t H = 8, W = 8;
  Grid g(H, W);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) g(i, j) = std::cos(2.0 * std::numbers::pi * 2.0 * static_cast<double>(j) / W);
  }
  const auto s = dft2(g);
  CHECK(std::abs(s(4, 6)) == doctest::Approx(32.0));
  CHECK(std::abs(s(4, 2)) == doctest::Approx(32.0));
  double rest = 0.0;
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      if (i == 4 && (j == 2 || j == 6)) continue;
      rest = std::max(rest, std::abs(s(i, j)));
    }
  }
  CHECK(rest < 1e-12);
}

TEST_CASE("radial distance spans exactly [0, 1]") {
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {5, 7}, {16, 10}, {2, 2}}) {
    double lo = 2.0, hi = -1.0;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double r = radial_distance(i, j, h, w);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    }
    CHECK(lo == 0.0);
    CHECK(hi == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(hi <= 1.0);
  }
  CHECK(radial_distance(4, 4, 8, 8) == 0.0);
  CHECK(radial_distance(0, 0, 8, 8) == 1.0);
  CHECK(radial_distance(4, 0, 8, 8) == doctest::Approx(std::sqrt(0.5)));
}
