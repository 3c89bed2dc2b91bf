#include "sbmeter/ndnum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>

namespace sbmeter::ndnum {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::domain_error(std::string(what) + ": non-finite value");
    }
  }
}

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer make_buffer(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer(p);
}

// Plans are created once per (H, W, direction) and shared. fftw_execute_dft on
// distinct, equally aligned buffers is reentrant; only planning needs the lock.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t h, std::size_t w, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto in = make_buffer(h * w);
    auto out = make_buffer(h * w);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in.get(), out.get(),
                                      sign, FFTW_ESTIMATE);
    if (plan == nullptr) throw std::runtime_error("fftw planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

Grid::Grid(std::size_t h, std::size_t w, std::vector<double> v)
    : height(h), width(w), values(std::move(v)) {
  if (values.size() != h * w) throw std::invalid_argument("Grid: data length != height*width");
}

ImageTensor::ImageTensor(std::size_t channels, std::size_t height, std::size_t width)
    : channels_(channels), height_(height), width_(width), data_(channels * height * width, 0.0) {}

ImageTensor::ImageTensor(std::size_t channels, std::size_t height, std::size_t width,
                         std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != channels * height * width) {
    throw std::invalid_argument("ImageTensor: data length != channels*height*width");
  }
  require_finite(data_, "ImageTensor");
}

Grid ImageTensor::channel(std::size_t c) const {
  if (c >= channels_) throw std::out_of_range("ImageTensor::channel");
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(c * height_ * width_);
  return Grid(height_, width_,
              std::vector<double>(first, first + static_cast<std::ptrdiff_t>(height_ * width_)));
}

void ImageTensor::set_channel(std::size_t c, const Grid& grid) {
  if (c >= channels_) throw std::out_of_range("ImageTensor::set_channel");
  if (grid.height != height_ || grid.width != width_) {
    throw std::invalid_argument("ImageTensor::set_channel: grid shape mismatch");
  }
  std::copy(grid.values.begin(), grid.values.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(c * height_ * width_));
}

ImageTensor& ImageTensor::operator+=(const ImageTensor& rhs) {
  require_same_shape(*this, rhs);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
  return *this;
}

ImageTensor& ImageTensor::operator-=(const ImageTensor& rhs) {
  require_same_shape(*this, rhs);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
  return *this;
}

ImageTensor& ImageTensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

ImageTensor operator+(ImageTensor lhs, const ImageTensor& rhs) { return lhs += rhs; }
ImageTensor operator-(ImageTensor lhs, const ImageTensor& rhs) { return lhs -= rhs; }
ImageTensor operator*(double s, ImageTensor x) { return x *= s; }

void require_same_shape(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("image shape mismatch: " + std::to_string(a.channels()) + "x" +
                                std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                " vs " + std::to_string(b.channels()) + "x" +
                                std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}

double dot(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.data()[k] * b.data()[k];
  return s;
}

double l2_norm(const ImageTensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return std::sqrt(s);
}

double l2_distance(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b);
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

SpectrumGrid dft2(const Grid& grid) {
  const std::size_t h = grid.height;
  const std::size_t w = grid.width;
  if (h < 2 || w < 2) throw std::domain_error("dft2: grid must be at least 2x2");
  if (grid.values.size() != h * w) throw std::invalid_argument("dft2: data length != H*W");
  require_finite(grid.values, "dft2");

  auto in = make_buffer(h * w);
  auto out = make_buffer(h * w);
  for (std::size_t k = 0; k < h * w; ++k) {
    in[k][0] = grid.values[k];
    in[k][1] = 0.0;
  }
  fftw_execute_dft(plan_cache().get(h, w, FFTW_FORWARD), in.get(), out.get());

  SpectrumGrid spec{h, w, std::vector<std::complex<double>>(h * w)};
  for (std::size_t u = 0; u < h; ++u) {
    const std::size_t i = (u + h / 2) % h;
    for (std::size_t v = 0; v < w; ++v) {
      const std::size_t j = (v + w / 2) % w;
      spec(i, j) = {out[u * w + v][0], out[u * w + v][1]};
    }
  }
  return spec;
}

Grid idft2(const SpectrumGrid& spectrum, double* imag_residue) {
  const std::size_t h = spectrum.height;
  const std::size_t w = spectrum.width;
  if (h < 2 || w < 2 || spectrum.coeffs.size() != h * w) {
    throw std::invalid_argument("idft2: malformed spectrum");
  }
  auto in = make_buffer(h * w);
  auto out = make_buffer(h * w);
  for (std::size_t u = 0; u < h; ++u) {
    const std::size_t i = (u + h / 2) % h;
    for (std::size_t v = 0; v < w; ++v) {
      const std::size_t j = (v + w / 2) % w;
      in[u * w + v][0] = spectrum(i, j).real();
      in[u * w + v][1] = spectrum(i, j).imag();
    }
  }
  fftw_execute_dft(plan_cache().get(h, w, FFTW_BACKWARD), in.get(), out.get());

  const double scale = 1.0 / static_cast<double>(h * w);
  Grid grid(h, w);
  double residue = 0.0;
  for (std::size_t k = 0; k < h * w; ++k) {
    grid.values[k] = out[k][0] * scale;
    residue = std::max(residue, std::abs(out[k][1] * scale));
  }
  if (imag_residue != nullptr) *imag_residue = residue;
  return grid;
}

double radial_distance(std::size_t i, std::size_t j, std::size_t height, std::size_t width) {
  const double ci = static_cast<double>(height / 2);
  const double cj = static_cast<double>(width / 2);
  const double corner = std::sqrt(ci * ci + cj * cj);
  if (corner == 0.0) return 0.0;
  const double di = static_cast<double>(i) - ci;
  const double dj = static_cast<double>(j) - cj;
  return std::sqrt(di * di + dj * dj) / corner;
}

}  // namespace sbmeter::ndnum
