#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbmeter/ndnum.hpp"

namespace sbmeter::spectral {

using ndnum::ImageTensor;
using ndnum::SpectrumGrid;

/// Annulus [r_min, r_max) in normalized radius. A band whose upper edge is 1
/// is closed so the corner bins (radius exactly 1) belong to it.
struct Band {
  std::string name;
  double r_min = 0.0;
  double r_max = 1.0;

  bool contains(double rho) const {
    return (rho >= r_min && rho < r_max) || (r_max >= 1.0 && rho >= r_min && rho <= r_max);
  }
};

/// Throws std::invalid_argument unless 0 <= r_min < r_max <= 1.
void validate_band(const Band& band);

/// Ordered, contiguous partition of [0, 1].
class BandSpec {
 public:
  explicit BandSpec(std::vector<Band> bands);

  /// low/mid/high = [0, 0.25) / [0.25, 0.8) / [0.8, 1].
  static BandSpec defaults();
  /// Three bands named l, m, h split at `lo` and `hi`.
  static BandSpec from_thresholds(double lo, double hi);

  const std::vector<Band>& bands() const { return bands_; }
  std::size_t size() const { return bands_.size(); }
  const Band& operator[](std::size_t k) const { return bands_[k]; }
  const Band& front() const { return bands_.front(); }
  const Band& back() const { return bands_.back(); }

  /// Throws std::out_of_range for an unknown name.
  std::size_t index_of(const std::string& name) const;
  const Band& at(const std::string& name) const { return bands_[index_of(name)]; }

 private:
  std::vector<Band> bands_;
};

/// Zeroes every coefficient whose radial distance falls outside `band`.
SpectrumGrid band_mask(const SpectrumGrid& spectrum, const Band& band);

/// Per-channel inverse transform of the masked spectrum.
ImageTensor band_component(const ImageTensor& x, const Band& band);

/// All components of `x` for `spec`, in band order. Shares one forward
/// transform per channel.
std::vector<ImageTensor> band_components(const ImageTensor& x, const BandSpec& spec);

/// Sum of the components for a leading run of bands. `prefix` must name
/// bands[0], bands[1], ... in order; anything else is rejected.
ImageTensor cumulative_composition(const ImageTensor& x, const BandSpec& spec,
                                   std::span<const std::string> prefix);

enum class PathForm {
  /// x1 + λ·(x2^k − x1^k): x1's other bands stay intact, band k moves from
  /// x1^k to x2^k.
  anchored,
  /// x1 + (1−λ)·x1^k + λ·x2^k, which counts x1^k twice at λ = 0.
  literal,
};

struct PairId {
  std::string x1;
  std::string x2;
};

struct PathStep {
  double lambda = 0.0;
  ImageTensor image;
};

struct InterpolationPath {
  std::vector<PathStep> steps;
  PairId pair;
  std::optional<std::string> band;
  /// ‖x1 − x2‖ for the full path, ‖x1^k − x2^k‖ for a band path.
  double endpoint_distance = 0.0;
};

/// 0, 1/(n−1), ..., 1. Throws for n < 2.
std::vector<double> lambda_grid(std::size_t n);

InterpolationPath linear_path(const ImageTensor& x1, const ImageTensor& x2, std::size_t n,
                              PairId pair = {});

InterpolationPath band_path(const ImageTensor& x1, const ImageTensor& x2, const Band& band,
                            std::size_t n, PathForm form = PathForm::anchored, PairId pair = {});

/// band_path when the band components are already known.
InterpolationPath band_path_from_components(const ImageTensor& x1, const ImageTensor& x1_band,
                                            const ImageTensor& x2_band, const std::string& band_name,
                                            std::size_t n, PathForm form, PairId pair = {});

}  // namespace sbmeter::spectral
