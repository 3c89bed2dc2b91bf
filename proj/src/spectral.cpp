#include "sbmeter/spectral.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace sbmeter::spectral {

using ndnum::Grid;

void validate_band(const Band& band) {
  if (!(band.r_min >= 0.0 && band.r_max <= 1.0 && band.r_min < band.r_max)) {
    throw std::invalid_argument("band '" + band.name + "': need 0 <= r_min < r_max <= 1, got [" +
                                std::to_string(band.r_min) + ", " + std::to_string(band.r_max) +
                                ")");
  }
}

BandSpec::BandSpec(std::vector<Band> bands) : bands_(std::move(bands)) {
  if (bands_.empty()) throw std::invalid_argument("BandSpec: no bands");
  for (std::size_t k = 0; k < bands_.size(); ++k) {
    validate_band(bands_[k]);
    if (bands_[k].name.empty()) throw std::invalid_argument("BandSpec: empty band name");
    for (std::size_t j = 0; j < k; ++j) {
      if (bands_[j].name == bands_[k].name) {
        throw std::invalid_argument("BandSpec: duplicate band name '" + bands_[k].name + "'");
      }
    }
    if (k > 0 && bands_[k].r_min != bands_[k - 1].r_max) {
      throw std::invalid_argument("BandSpec: band '" + bands_[k].name +
                                  "' does not start where the previous band ends");
    }
  }
  if (bands_.front().r_min != 0.0 || bands_.back().r_max != 1.0) {
    throw std::invalid_argument("BandSpec: bands must cover [0, 1]");
  }
}

BandSpec BandSpec::defaults() { return from_thresholds(0.25, 0.8); }

BandSpec BandSpec::from_thresholds(double lo, double hi) {
  return BandSpec({{"l", 0.0, lo}, {"m", lo, hi}, {"h", hi, 1.0}});
}

std::size_t BandSpec::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < bands_.size(); ++k) {
    if (bands_[k].name == name) return k;
  }
  throw std::out_of_range("unknown band '" + name + "'");
}

SpectrumGrid band_mask(const SpectrumGrid& spectrum, const Band& band) {
  validate_band(band);
  SpectrumGrid out = spectrum;
  for (std::size_t i = 0; i < out.height; ++i) {
    for (std::size_t j = 0; j < out.width; ++j) {
      if (!band.contains(ndnum::radial_distance(i, j, out.height, out.width))) out(i, j) = 0.0;
    }
  }
  return out;
}

ImageTensor band_component(const ImageTensor& x, const Band& band) {
  validate_band(band);
  ImageTensor out(x.channels(), x.height(), x.width());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    out.set_channel(c, ndnum::idft2(band_mask(ndnum::dft2(x.channel(c)), band)));
  }
  return out;
}

std::vector<ImageTensor> band_components(const ImageTensor& x, const BandSpec& spec) {
  std::vector<ImageTensor> out(spec.size(), ImageTensor(x.channels(), x.height(), x.width()));
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const SpectrumGrid full = ndnum::dft2(x.channel(c));
    for (std::size_t k = 0; k < spec.size(); ++k) {
      out[k].set_channel(c, ndnum::idft2(band_mask(full, spec[k])));
    }
  }
  return out;
}

ImageTensor cumulative_composition(const ImageTensor& x, const BandSpec& spec,
                                   std::span<const std::string> prefix) {
  if (prefix.size() > spec.size()) {
    throw std::invalid_argument("cumulative_composition: more bands than the band set defines");
  }
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    if (prefix[k] != spec[k].name) {
      throw std::invalid_argument("cumulative_composition: '" + prefix[k] +
                                  "' breaks the band prefix (expected '" + spec[k].name + "')");
    }
  }
  ImageTensor sum(x.channels(), x.height(), x.width());
  if (prefix.empty()) return sum;
  const auto components = band_components(x, spec);
  for (std::size_t k = 0; k < prefix.size(); ++k) sum += components[k];
  return sum;
}

std::vector<double> lambda_grid(std::size_t n) {
  if (n < 2) throw std::invalid_argument("interpolation path needs n >= 2 steps");
  std::vector<double> grid(n);
  for (std::size_t q = 0; q < n; ++q) {
    grid[q] = static_cast<double>(q) / static_cast<double>(n - 1);
  }
  return grid;
}

InterpolationPath linear_path(const ImageTensor& x1, const ImageTensor& x2, std::size_t n,
                              PairId pair) {
  ndnum::require_same_shape(x1, x2);
  InterpolationPath path;
  path.pair = std::move(pair);
  path.endpoint_distance = ndnum::l2_distance(x1, x2);
  for (double lambda : lambda_grid(n)) {
    ImageTensor step(x1.channels(), x1.height(), x1.width());
    auto out = step.data();
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = (1.0 - lambda) * x1.data()[k] + lambda * x2.data()[k];
    }
    path.steps.push_back({lambda, std::move(step)});
  }
  return path;
}

InterpolationPath band_path_from_components(const ImageTensor& x1, const ImageTensor& x1_band,
                                            const ImageTensor& x2_band, const std::string& band_name,
                                            std::size_t n, PathForm form, PairId pair) {
  ndnum::require_same_shape(x1, x1_band);
  ndnum::require_same_shape(x1, x2_band);
  InterpolationPath path;
  path.pair = std::move(pair);
  path.band = band_name;
  path.endpoint_distance = ndnum::l2_distance(x1_band, x2_band);
  for (double lambda : lambda_grid(n)) {
    ImageTensor step(x1.channels(), x1.height(), x1.width());
    auto out = step.data();
    const auto base = x1.data();
    const auto a = x1_band.data();
    const auto b = x2_band.data();
    if (form == PathForm::anchored) {
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = base[k] + lambda * (b[k] - a[k]);
    } else {
      for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = base[k] + ((1.0 - lambda) * a[k] + lambda * b[k]);
      }
    }
    path.steps.push_back({lambda, std::move(step)});
  }
  return path;
}

InterpolationPath band_path(const ImageTensor& x1, const ImageTensor& x2, const Band& band,
                            std::size_t n, PathForm form, PairId pair) {
  ndnum::require_same_shape(x1, x2);
  return band_path_from_components(x1, band_component(x1, band), band_component(x2, band),
                                   band.name, n, form, std::move(pair));
}

}  // namespace sbmeter::spectral
