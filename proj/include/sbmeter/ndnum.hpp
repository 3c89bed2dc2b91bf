#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sbmeter::ndnum {

/// Real H×W grid, row-major.
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::size_t h, std::size_t w) : height(h), width(w), values(h * w, 0.0) {}
  Grid(std::size_t h, std::size_t w, std::vector<double> v);

  double& operator()(std::size_t i, std::size_t j) { return values[i * width + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * width + j]; }
};

/// C×H×W image, channel-major then row-major. Values are held in double
/// precision; the on-disk containers store 32-bit floats.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t channels, std::size_t height, std::size_t width);
  /// Throws std::invalid_argument on a length mismatch and std::domain_error
  /// on non-finite values.
  ImageTensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * height_ + i) * width_ + j];
  }
  double operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * height_ + i) * width_ + j];
  }

  Grid channel(std::size_t c) const;
  void set_channel(std::size_t c, const Grid& grid);

  bool same_shape(const ImageTensor& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  ImageTensor& operator+=(const ImageTensor& rhs);
  ImageTensor& operator-=(const ImageTensor& rhs);
  ImageTensor& operator*=(double s);

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

ImageTensor operator+(ImageTensor lhs, const ImageTensor& rhs);
ImageTensor operator-(ImageTensor lhs, const ImageTensor& rhs);
ImageTensor operator*(double s, ImageTensor x);

/// Throws std::invalid_argument when the shapes differ.
void require_same_shape(const ImageTensor& a, const ImageTensor& b);

double dot(const ImageTensor& a, const ImageTensor& b);
double l2_norm(const ImageTensor& x);
double l2_distance(const ImageTensor& a, const ImageTensor& b);
double max_abs_diff(const ImageTensor& a, const ImageTensor& b);

/// Complex spectrum with the DC term at (height/2, width/2).
struct SpectrumGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::complex<double>> coeffs;

  std::complex<double>& operator()(std::size_t i, std::size_t j) { return coeffs[i * width + j]; }
  std::complex<double> operator()(std::size_t i, std::size_t j) const {
    return coeffs[i * width + j];
  }
};

/// Unnormalized forward transform (DC bin holds the sum of the grid), shifted
/// so the zero frequency sits at the grid center. Requires H, W >= 2 and finite
/// values; throws std::domain_error otherwise.
SpectrumGrid dft2(const Grid& grid);

/// Inverse of dft2 (carries the 1/(H·W) factor). Returns the real part; when
/// `imag_residue` is given it receives the largest discarded imaginary magnitude.
Grid idft2(const SpectrumGrid& spectrum, double* imag_residue = nullptr);

/// Distance from bin (i, j) to the spectrum center, divided by the corner
/// distance so the result spans [0, 1].
double radial_distance(std::size_t i, std::size_t j, std::size_t height, std::size_t width);

}  // namespace sbmeter::ndnum
