#include "sbmeter/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace sbmeter::metrics {

void validate(const PathLogits& path) {
  const std::size_t n = path.lambdas.size();
  if (n < 2) throw std::invalid_argument("path has " + std::to_string(n) + " steps, need >= 2");
  if (path.num_classes == 0) throw std::invalid_argument("path has no classes");
  if (path.logits.size() != n * path.num_classes) {
    throw std::invalid_argument("logit matrix is not n×K");
  }
  if (path.target_class >= path.num_classes) {
    throw std::invalid_argument("target class " + std::to_string(path.target_class) +
                                " out of range for K=" + std::to_string(path.num_classes));
  }
  if (!std::isfinite(path.norm_distance) || path.norm_distance < 0.0) {
    throw std::invalid_argument("norm distance must be finite and non-negative");
  }
  for (std::size_t q = 0; q < n; ++q) {
    if (!std::isfinite(path.lambdas[q])) throw std::invalid_argument("non-finite lambda");
    if (q > 0 && !(path.lambdas[q] > path.lambdas[q - 1])) {
      throw std::invalid_argument("lambda grid is not strictly increasing at step " +
                                  std::to_string(q));
    }
  }
  for (double z : path.logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("non-finite logit");
  }
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

UndefinedRatioError::UndefinedRatioError(double numerator, double denominator)
    : std::domain_error("ratio undefined: denominator " + fmt_double(denominator) +
                        " is at or below tolerance (numerator " + fmt_double(numerator) + ")"),
      numerator_(numerator),
      denominator_(denominator) {}

double total_variation(const PathLogits& path, std::size_t cls) {
  if (cls >= path.num_classes) throw std::invalid_argument("total_variation: class out of range");
  double tv = 0.0;
  for (std::size_t q = 0; q + 1 < path.steps(); ++q) {
    tv += std::abs(path.logit(q + 1, cls) - path.logit(q, cls));
  }
  return tv;
}

Sensitivity tv_sensitivity(std::span<const PathLogits> paths, double distance_tol) {
  Sensitivity s;
  double sum = 0.0;
  for (const auto& p : paths) {
    validate(p);
    if (p.norm_distance < distance_tol) {
      ++s.skipped;
      continue;
    }
    sum += total_variation(p, p.target_class) / p.norm_distance;
    ++s.retained;
  }
  if (s.retained == 0) throw NoValidPairsError(s.skipped);
  s.value = sum / static_cast<double>(s.retained);
  return s;
}

Sensitivity band_sensitivity(std::span<const PathLogits> paths, const std::string& band,
                             double distance_tol) {
  for (const auto& p : paths) {
    if (p.band != band) {
      throw std::invalid_argument("band_sensitivity('" + band + "'): got a path for band '" +
                                  p.band + "'");
    }
  }
  return tv_sensitivity(paths, distance_tol);
}

double sb_ratio(double s_low, double s_high, double tol) {
  if (!(s_high > tol)) throw UndefinedRatioError(s_low, s_high);
  return s_low / s_high;
}

double decay_ratio(double s_setting, double s_reference, double tol) {
  if (!(s_reference > tol)) throw UndefinedRatioError(s_setting, s_reference);
  return s_setting / s_reference;
}

// ---------------------------------------------------------------------------

std::vector<double> contributions_from_cumulative(std::span<const double> cumulative) {
  std::vector<double> out(cumulative.size());
  double previous = 0.0;
  for (std::size_t k = 0; k < cumulative.size(); ++k) {
    out[k] = cumulative[k] - previous;
    previous = cumulative[k];
  }
  return out;
}

AccuracyContributions acc_contribution(const models::EncoderModel& encoder,
                                       const models::TextAnchors& anchors,
                                       const harness::LabeledDataset& dataset,
                                       const spectral::BandSpec& bands) {
  if (dataset.size() == 0) throw std::invalid_argument("acc_contribution: empty dataset");
  const std::size_t nb = bands.size();
  std::vector<std::size_t> correct(nb, 0);
  for (const auto& item : dataset.items()) {
    const auto components = spectral::band_components(item.image, bands);
    ndnum::ImageTensor prefix(item.image.channels(), item.image.height(), item.image.width());
    for (std::size_t k = 0; k < nb; ++k) {
      std::size_t predicted = 0;
      if (k + 1 == nb) {
        predicted = models::predict(encoder, anchors, item.image);
      } else {
        prefix += components[k];
        predicted = models::predict(encoder, anchors, prefix);
      }
      if (predicted == item.label) ++correct[k];
    }
  }
  AccuracyContributions out;
  out.total = dataset.size();
  out.correct = correct.back();
  const double scale = 100.0 / static_cast<double>(out.total);
  out.full_accuracy = scale * static_cast<double>(out.correct);
  std::size_t previous = 0;
  for (std::size_t k = 0; k < nb; ++k) {
    const auto delta = static_cast<std::int64_t>(correct[k]) - static_cast<std::int64_t>(previous);
    out.bands.push_back({bands[k].name, scale * static_cast<double>(delta), delta});
    previous = correct[k];
  }
  return out;
}

double delta_acc(const AccuracyContributions& modulated, const AccuracyContributions& reference,
                 const std::string& band) {
  if (modulated.bands.size() != reference.bands.size()) {
    throw std::invalid_argument("delta_acc: contribution sets use different band lists");
  }
  for (std::size_t k = 0; k < modulated.bands.size(); ++k) {
    if (modulated.bands[k].band != reference.bands[k].band) {
      throw std::invalid_argument("delta_acc: band '" + modulated.bands[k].band + "' vs '" +
                                  reference.bands[k].band + "'");
    }
  }
  for (std::size_t k = 0; k < modulated.bands.size(); ++k) {
    if (modulated.bands[k].band == band) {
      return modulated.bands[k].percent - reference.bands[k].percent;
    }
  }
  throw std::invalid_argument("delta_acc: unknown band '" + band + "'");
}

// ---------------------------------------------------------------------------

std::vector<double> linspace(Interval domain, std::size_t n) {
  if (n < 2) throw std::invalid_argument("linspace: need at least 2 points");
  std::vector<double> xs(n);
  const double span = domain.hi - domain.lo;
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = domain.lo + span * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  xs.back() = domain.hi;
  return xs;
}

Function1D polynomial(std::vector<double> coeffs) {
  while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
  if (coeffs.empty()) coeffs.push_back(0.0);
  auto horner = [](std::vector<double> c) {
    return [c = std::move(c)](double x) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
      return acc;
    };
  };
  Function1D f;
  f.value = horner(coeffs);
  f.exhaustive = true;
  std::vector<double> c = coeffs;
  while (c.size() > 1) {
    std::vector<double> d(c.size() - 1);
    for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = c[i] * static_cast<double>(i);
    f.derivatives.push_back(horner(d));
    c = std::move(d);
  }
  return f;
}

Function1D sine(double frequency, double amplitude, double phase) {
  Function1D f;
  f.value = [=](double x) { return amplitude * std::sin(frequency * x + phase); };
  double scale = amplitude;
  for (int k = 1; k <= 32; ++k) {
    scale *= frequency;
    const double shift = phase + 0.5 * std::numbers::pi * k;
    f.derivatives.push_back([=](double x) { return scale * std::sin(frequency * x + shift); });
  }
  return f;
}

DerivativeProfile make_profile(std::vector<double> magnitudes, Interval domain) {
  if (magnitudes.empty()) throw std::invalid_argument("derivative profile needs M_0");
  for (double m : magnitudes) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw std::invalid_argument("derivative magnitudes must be finite and >= 0");
    }
  }
  return DerivativeProfile{domain, std::move(magnitudes), {}};
}

namespace {

// Fornberg (1988) weights for the m-th derivative at x0 from the given nodes.
std::vector<double> fornberg_weights(double x0, std::span<const double> nodes, std::size_t m) {
  const std::size_t n = nodes.size();
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = c[i][m];
  return w;
}

struct FdEstimate {
  double value = 0.0;
  double noise = 0.0;
};

// max over the grid of |f^(order)| using a (order + 4)-point stencil of step h
// slid inside the domain.
FdEstimate fd_max(const Function1D& f, Interval dom, std::span<const double> grid, std::size_t order,
                  double h, double f_scale) {
  const std::size_t p = order + 4;
  const double width = h * static_cast<double>(p - 1);
  std::vector<double> unit(p);
  for (std::size_t s = 0; s < p; ++s) unit[s] = static_cast<double>(s);
  const double central = 0.5 * static_cast<double>(p - 1);
  const auto central_w = fornberg_weights(central, unit, order);
  const double hk = std::pow(h, static_cast<double>(order));

  FdEstimate est;
  double weight_sum = 0.0;
  for (double x : grid) {
    const double start = std::clamp(x - central * h, dom.lo, dom.hi - width);
    const double t = (x - start) / h;
    const auto w = std::abs(t - central) < 1e-12 ? central_w : fornberg_weights(t, unit, order);
    double acc = 0.0;
    double wabs = 0.0;
    for (std::size_t s = 0; s < p; ++s) {
      acc += w[s] * f.value(start + static_cast<double>(s) * h);
      wabs += std::abs(w[s]);
    }
    est.value = std::max(est.value, std::abs(acc) / hk);
    weight_sum = std::max(weight_sum, wabs);
  }
  est.noise = 64.0 * std::numeric_limits<double>::epsilon() * f_scale * weight_sum / hk;
  return est;
}

struct OrderResult {
  double value = 0.0;
  std::optional<std::string> notice;
};

OrderResult fd_order(const Function1D& f, Interval dom, std::span<const double> grid,
                     std::size_t order, double f_scale) {
  const double length = dom.hi - dom.lo;
  constexpr int kLevels = 7;
  std::vector<double> values;
  for (int j = 0; j < kLevels; ++j) {
    const double h = length / (25.0 * std::pow(2.0, j));
    const auto est = fd_max(f, dom, grid, order, h, f_scale);
    values.push_back(est.value <= est.noise ? 0.0 : est.value);
  }
  double best_rel = std::numeric_limits<double>::infinity();
  double best_value = 0.0;
  for (int j = 0; j + 1 < kLevels; ++j) {
    const double a = values[j];
    const double b = values[j + 1];
    const double scale = std::max(a, b);
    const double rel = scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
    if (rel <= 1e-3) return {b, std::nullopt};
    if (rel < best_rel) {
      best_rel = rel;
      best_value = b;
    }
  }
  if (best_rel <= 1e-2) {
    return {best_value, "order " + std::to_string(order) +
                            ": finite differences only agree to " + fmt_double(best_rel) +
                            " relative"};
  }
  throw std::runtime_error("derivative_profile: finite-difference estimate of order " +
                           std::to_string(order) + " is unstable (best relative disagreement " +
                           fmt_double(best_rel) + ")");
}

}  // namespace

DerivativeProfile derivative_profile(const Function1D& f, Interval domain,
                                     const ProfileOptions& options) {
  if (!f.value) throw std::invalid_argument("derivative_profile: no function");
  if (!(domain.hi > domain.lo)) throw std::invalid_argument("derivative_profile: empty domain");
  const auto grid = linspace(domain, std::max<std::size_t>(options.grid_points, 2));

  DerivativeProfile profile;
  profile.domain = domain;
  double m0 = 0.0;
  for (double x : grid) m0 = std::max(m0, std::abs(f.value(x)));
  if (!std::isfinite(m0)) throw std::runtime_error("derivative_profile: function is not finite");

  auto magnitude = [&](std::size_t k, bool probe) -> std::optional<double> {
    if (k <= f.derivatives.size()) {
      double m = 0.0;
      for (double x : grid) m = std::max(m, std::abs(f.derivatives[k - 1](x)));
      return m;
    }
    if (f.exhaustive) return 0.0;
    try {
      auto r = fd_order(f, domain, grid, k, std::max(m0, 1.0));
      if (r.notice) profile.notices.push_back(*r.notice);
      return r.value;
    } catch (const std::runtime_error&) {
      if (!probe) throw;
      return std::nullopt;
    }
  };

  std::vector<double> m{m0};
  for (std::size_t k = 1; k <= options.max_order; ++k) m.push_back(*magnitude(k, false));

  std::size_t d = 0;
  for (std::size_t k = options.max_order; k >= 1; --k) {
    if (m[k] > options.tol) {
      d = k;
      break;
    }
  }
  m.resize(d + 1);
  profile.magnitudes = std::move(m);

  if (d == options.max_order) {
    const auto next = magnitude(options.max_order + 1, true);
    if (!next) {
      profile.notices.push_back("could not establish whether derivatives beyond order " +
                                std::to_string(options.max_order) + " vanish");
    } else if (*next > options.tol) {
      profile.notices.push_back("derivative of order " + std::to_string(options.max_order + 1) +
                                " is non-zero; d truncated to " +
                                std::to_string(options.max_order));
    }
  }
  return profile;
}

double complexity_1d(const DerivativeProfile& profile) {
  if (profile.magnitudes.empty()) throw std::invalid_argument("complexity_1d: empty profile");
  const std::size_t d = profile.order();
  if (d == 0) return 0.0;
  const double top = profile.magnitudes[d];
  if (!(top > 0.0)) {
    throw std::invalid_argument("complexity_1d: M_d must be positive when d > 0");
  }
  double sum = 0.0;
  for (double m : profile.magnitudes) sum += m / top;
  return static_cast<double>(d) / sum;
}

TaylorBound taylor_bound(const DerivativeProfile& profile, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("taylor_bound: epsilon must be finite and >= 0");
  }
  const std::size_t d = profile.order();
  if (d == 0) return {0.0, "d = 0: the function is constant, no first-order term"};
  double bound = profile.magnitudes[1] * epsilon;
  double power = epsilon;
  double factorial = 1.0;
  for (std::size_t k = 2; k <= d; ++k) {
    power *= epsilon;
    factorial *= static_cast<double>(k);
    bound += profile.magnitudes[k] / factorial * power;
  }
  return {bound, std::nullopt};
}

Perturbation make_perturbation(std::function<double(double)> shape, double epsilon, Interval domain,
                               std::size_t grid_points) {
  if (!shape) throw std::invalid_argument("make_perturbation: no shape function");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("make_perturbation: epsilon must be > 0");
  }
  double sup = 0.0;
  for (double x : linspace(domain, std::max<std::size_t>(grid_points, 2))) {
    sup = std::max(sup, std::abs(shape(x)));
  }
  if (!(sup <= 1.0 + 1e-9)) {
    throw std::invalid_argument("make_perturbation: sup|phi| = " + fmt_double(sup) + " exceeds 1");
  }
  return Perturbation(std::move(shape), epsilon);
}

}  // namespace sbmeter::metrics
