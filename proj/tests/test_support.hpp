#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "sbmeter/ndnum.hpp"
#include "sbmeter/rng.hpp"
#include "sbmeter/spectral.hpp"

namespace testing {

inline sbmeter::ndnum::ImageTensor random_image(std::uint64_t seed, std::size_t c, std::size_t h, std::size_t w,
                                                double lo = 0.0, double hi = 1.0) {
  sbmeter::SplitMix64 rng(seed);
  std::vector<double> v(c * h * w);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return sbmeter::ndnum::ImageTensor(c, h, w, std::move(v));
}

inline sbmeter::ndnum::Grid random_grid(std::uint64_t seed, std::size_t h, std::size_t w) {
  sbmeter::SplitMix64 rng(seed);
  std::vector<double> v(h * w);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return sbmeter::ndnum::Grid(h, w, std::move(v));
}

/// Textbook O(N^4) DFT, centered the same way as dft2.
inline std::vector<std::complex<double>> naive_centered_dft(const sbmeter::ndnum::Grid& g) {
  const std::size_t H = g.height, W = g.width;
  std::vector<std::complex<double>> out(H * W);
  for (std::size_t ku = 0; ku < H; ++ku) {
    for (std::size_t kv = 0; kv < W; ++kv) {
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
          const double a = -2.0 * std::numbers::pi *
                           (static_cast<double>(ku * i) / static_cast<double>(H) +
                            static_cast<double>(kv * j) / static_cast<double>(W));
          acc += g(i, j) * std::complex<double>(std::cos(a), std::sin(a));
        }
      }
      out[((ku + H / 2) % H) * W + (kv + W / 2) % W] = acc;
    }
  }
  return out;
}

/// Band component computed with the naive transform: mask the centered
/// spectrum and invert it directly.
inline sbmeter::ndnum::ImageTensor naive_band_component(const sbmeter::ndnum::ImageTensor& x,
                                                        const sbmeter::spectral::Band& band) {
  const std::size_t H = x.height(), W = x.width();
  sbmeter::ndnum::ImageTensor out(x.channels(), H, W);
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const auto spec = naive_centered_dft(x.channel(c));
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        std::complex<double> acc = 0.0;
        for (std::size_t ci = 0; ci < H; ++ci) {
          for (std::size_t cj = 0; cj < W; ++cj) {
            if (!band.contains(sbmeter::ndnum::radial_distance(ci, cj, H, W))) continue;
            const std::size_t ku = (ci + H - H / 2) % H;
            const std::size_t kv = (cj + W - W / 2) % W;
            const double a = 2.0 * std::numbers::pi *
                             (static_cast<double>(ku * i) / static_cast<double>(H) +
                              static_cast<double>(kv * j) / static_cast<double>(W));
            acc += spec[ci * W + cj] * std::complex<double>(std::cos(a), std::sin(a));
          }
        }
        out(c, i, j) = acc.real() / static_cast<double>(H * W);
      }
    }
  }
  return out;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sbmeter_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
