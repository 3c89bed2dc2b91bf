#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbmeter/dataset.hpp"
#include "sbmeter/models.hpp"
#include "sbmeter/path_logits.hpp"
#include "sbmeter/spectral.hpp"

namespace sbmeter::metrics {

/// Pairs whose normalization distance is below this are skipped.
inline constexpr double kDistanceTolerance = 1e-6;
/// Denominators at or below this make a ratio undefined.
inline constexpr double kRatioTolerance = 1e-8;

class NoValidPairsError : public std::runtime_error {
 public:
  NoValidPairsError(std::size_t skipped)
      : std::runtime_error("no valid pairs: all " + std::to_string(skipped) +
                           " paths have a normalization distance below tolerance"),
        skipped_(skipped) {}
  std::size_t skipped() const { return skipped_; }

 private:
  std::size_t skipped_;
};

class UndefinedRatioError : public std::domain_error {
 public:
  UndefinedRatioError(double numerator, double denominator);
  double numerator() const { return numerator_; }
  double denominator() const { return denominator_; }

 private:
  double numerator_;
  double denominator_;
};

// ---------------------------------------------------------------------------
// Path sensitivities
// ---------------------------------------------------------------------------

/// Σ_q |z_{q+1} − z_q| for the logit of class `cls`.
double total_variation(const PathLogits& path, std::size_t cls);

struct Sensitivity {
  double value = 0.0;
  std::size_t retained = 0;
  std::size_t skipped = 0;
};

/// Mean over retained paths of total_variation(target) / norm_distance, in
/// path order. Paths with norm_distance < `distance_tol` are skipped; throws
/// NoValidPairsError when nothing is left.
Sensitivity tv_sensitivity(std::span<const PathLogits> paths,
                           double distance_tol = kDistanceTolerance);

/// tv_sensitivity over paths that must all carry band name `band`.
Sensitivity band_sensitivity(std::span<const PathLogits> paths, const std::string& band,
                             double distance_tol = kDistanceTolerance);

/// S_low / S_high. Larger means a stronger lean toward low frequencies.
double sb_ratio(double s_low, double s_high, double tol = kRatioTolerance);

/// Sensitivity at a modulation setting relative to the unmodulated reference.
double decay_ratio(double s_setting, double s_reference, double tol = kRatioTolerance);

// ---------------------------------------------------------------------------
// Frequency-wise accuracy contributions
// ---------------------------------------------------------------------------

struct BandContribution {
  std::string band;
  /// Accuracy gained, in percent, by adding this band to the preceding ones.
  double percent = 0.0;
  /// Same gain as a change in the number of correct predictions.
  std::int64_t correct_delta = 0;
};

struct AccuracyContributions {
  std::vector<BandContribution> bands;
  /// Accuracy on the unfiltered inputs, in percent.
  double full_accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// Turns cumulative accuracies (percent, one per band prefix) into
/// per-band gains; the first band is measured from zero.
std::vector<double> contributions_from_cumulative(std::span<const double> cumulative);

/// Accuracy on x^{bands[0]}, x^{bands[0..1]}, ..., with the full prefix taken
/// as x itself, reported as per-band differences. The gains telescope to the
/// full-input accuracy.
AccuracyContributions acc_contribution(const models::EncoderModel& encoder,
                                       const models::TextAnchors& anchors,
                                       const harness::LabeledDataset& dataset,
                                       const spectral::BandSpec& bands);

/// Contribution of `band` in `modulated` minus that in `reference`. Throws
/// std::invalid_argument when the two do not share the same band list.
double delta_acc(const AccuracyContributions& modulated, const AccuracyContributions& reference,
                 const std::string& band);

// ---------------------------------------------------------------------------
// 1-D complexity and the Taylor perturbation bound
// ---------------------------------------------------------------------------

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

/// A scalar function with optional closed-form derivatives. derivatives[k-1]
/// is the k-th derivative. When `exhaustive` is set, every derivative past
/// the listed ones is identically zero (polynomials).
struct Function1D {
  std::function<double(double)> value;
  std::vector<std::function<double(double)>> derivatives;
  bool exhaustive = false;
};

/// Σ coeffs[i]·x^i with exact derivatives.
Function1D polynomial(std::vector<double> coeffs);
/// amplitude·sin(frequency·x + phase) with derivatives up to order 32.
Function1D sine(double frequency, double amplitude = 1.0, double phase = 0.0);

/// M_0..M_d: sup-magnitudes of the derivatives over a domain. `d` is the
/// highest order whose magnitude clears the tolerance.
struct DerivativeProfile {
  Interval domain;
  std::vector<double> magnitudes;
  std::vector<std::string> notices;

  std::size_t order() const { return magnitudes.empty() ? 0 : magnitudes.size() - 1; }
};

/// Builds a profile from given magnitudes (M_0 first). Throws
/// std::invalid_argument on an empty or negative list.
DerivativeProfile make_profile(std::vector<double> magnitudes, Interval domain = {});

struct ProfileOptions {
  /// Highest order considered.
  std::size_t max_order = 4;
  /// M_k at or below this counts as zero when choosing d.
  double tol = 1e-6;
  /// Evaluation grid over the domain, endpoints included.
  std::size_t grid_points = 10001;
};

/// Analytic derivatives are used where the function supplies them; other
/// orders fall back to finite differences (Fornberg weights on a sliding
/// stencil kept inside the domain) refined until two step sizes agree to
/// 1e-3. Throws std::runtime_error when the best two resolutions still
/// disagree by more than 1e-2.
DerivativeProfile derivative_profile(const Function1D& f, Interval domain,
                                     const ProfileOptions& options = {});

/// (M_d / Σ_k M_k) · d; 0 for a constant (d = 0). Computed as
/// d / Σ_k (M_k / M_d), which keeps it invariant under f → c·f.
double complexity_1d(const DerivativeProfile& profile);

struct TaylorBound {
  double value = 0.0;
  std::optional<std::string> notice;
};

/// M_1·ε + Σ_{k=2..d} M_k/k!·ε^k. For d = 0 the bound is 0 with a notice.
TaylorBound taylor_bound(const DerivativeProfile& profile, double epsilon);

/// δ(x) = ε·φ(x) with sup|φ| <= 1 checked on a dense grid over `domain`.
class Perturbation {
 public:
  Perturbation(std::function<double(double)> shape, double amplitude)
      : shape_(std::move(shape)), amplitude_(amplitude) {}

  double operator()(double x) const { return amplitude_ * shape_(x); }
  double amplitude() const { return amplitude_; }

 private:
  std::function<double(double)> shape_;
  double amplitude_;
};

/// Throws std::invalid_argument when ε <= 0 or sup|φ| > 1 + 1e-9 on the grid.
Perturbation make_perturbation(std::function<double(double)> shape, double epsilon,
                               Interval domain = {}, std::size_t grid_points = 10001);

/// `n` evenly spaced points from lo to hi inclusive.
std::vector<double> linspace(Interval domain, std::size_t n);

}  // namespace sbmeter::metrics
