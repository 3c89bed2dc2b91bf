#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sbmeter/dataset.hpp"
#include "sbmeter/metrics.hpp"
#include "sbmeter/models.hpp"
#include "sbmeter/spectral.hpp"

namespace sbmeter::harness {

/// Which class logit a path is scored on.
enum class TargetPolicy {
  x1,    // label of the start image
  x2,    // label of the end image
  mean,  // both; each pair contributes one record per class
};

enum class SweepParam { beta, gamma_s, cutoff };

std::string to_string(TargetPolicy p);
std::string to_string(SweepParam p);
TargetPolicy parse_target_policy(const std::string& s);
SweepParam parse_sweep_param(const std::string& s);

struct Sweep {
  SweepParam param = SweepParam::beta;
  std::vector<double> values;
};

struct ExperimentConfig {
  std::string dataset;
  spectral::BandSpec bands = spectral::BandSpec::defaults();
  std::size_t steps = 16;
  std::size_t pairs = 2000;
  std::size_t runs = 3;
  std::uint64_t seed = 0;
  std::optional<Sweep> sweep;
  TargetPolicy target = TargetPolicy::x1;
  spectral::PathForm path_form = spectral::PathForm::anchored;
  std::string output;
  /// Parallelism only; never changes results.
  std::size_t workers = 1;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Pair sampling
// ---------------------------------------------------------------------------

struct ImagePair {
  std::size_t first = 0;
  std::size_t second = 0;
};

struct PairSample {
  std::vector<ImagePair> pairs;
  /// Number of ordered cross-class pairs the dataset offers.
  std::uint64_t distinct = 0;
  /// Set when `count` exceeded `distinct` and pairs repeat.
  bool with_replacement = false;
};

/// Uniform ordered pairs (x1, x2) with different labels, reproducible from
/// `seed`. Without replacement unless more pairs are requested than exist.
PairSample sample_pairs(const LabeledDataset& dataset, std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

struct BandValue {
  std::string band;  // "full" for the whole-image path
  double sensitivity = 0.0;
  std::size_t skipped_pairs = 0;
};

struct RunResult {
  std::uint64_t seed = 0;
  /// "full" first, then one entry per band in BandSpec order.
  std::vector<BandValue> values;
  std::optional<double> ratio;

  double at(const std::string& band) const;
};

struct MeanBandValue {
  std::string band;
  double sensitivity = 0.0;
  double skipped_pairs = 0.0;
};

/// Arithmetic means of the per-run fields. The ratio averages the runs in
/// which it was defined and is absent when none were.
struct MeanResult {
  std::vector<MeanBandValue> values;
  std::optional<double> ratio;
  std::size_t ratio_runs = 0;

  double at(const std::string& band) const;
};

struct Modulation {
  SweepParam param = SweepParam::beta;
  double value = 1.0;
};

struct SensitivityReport {
  std::vector<RunResult> runs;
  MeanResult mean;
  std::size_t pairs_per_run = 0;
  std::optional<Modulation> modulation;
  std::vector<std::string> warnings;
};

/// What a measurement reads: encoder, class anchors and a labeled corpus.
struct Subject {
  const models::EncoderModel& encoder;
  const models::TextAnchors& anchors;
  const LabeledDataset& dataset;
};

/// For each run r (seed = config.seed + r): sample pairs, build the full path
/// and one band path per band, score them, and reduce in pair order. The
/// report is identical for any worker count. When `exported` is given, every
/// scored path is appended to it (run-major, then band, then pair).
SensitivityReport run_measurement(const ExperimentConfig& config, const Subject& subject,
                                  std::vector<metrics::PathLogits>* exported = nullptr);

struct DecayRow {
  double value = 0.0;
  /// Same order as MeanResult::values; empty when the reference is ~0.
  std::vector<std::optional<double>> ratios;
};

struct SweepSetting {
  double value = 0.0;
  SensitivityReport report;
};

struct SweepReport {
  SweepParam param = SweepParam::beta;
  double reference = 1.0;
  std::vector<std::string> bands;  // "full" then BandSpec names
  std::vector<SweepSetting> settings;
  std::vector<DecayRow> decay;
  std::vector<std::string> warnings;
};

/// One measurement per sweep value (the reference 1.0 is measured first and
/// added when missing), plus decay ratios against the reference. Throws
/// std::invalid_argument when the model has no site for the parameter.
SweepReport run_sweep(const ExperimentConfig& config, const Subject& subject);

/// Applies one modulation value to a model.
models::SurgeryResult modulate(const models::EncoderModel& model, SweepParam param, double value);

// ---------------------------------------------------------------------------
// External logits
// ---------------------------------------------------------------------------

/// Reads and validates an SBP1 file.
std::vector<metrics::PathLogits> ingest_path_logits(const std::filesystem::path& file);

struct PathSetMetrics {
  /// Keyed by band name in first-seen order.
  std::vector<std::pair<std::string, metrics::Sensitivity>> bands;
  std::optional<double> ratio;
  std::vector<std::string> warnings;
};

/// Groups records by band (file order kept) and computes the sensitivity of
/// each group; the ratio uses the first and last band of `spec` when present.
PathSetMetrics metrics_from_paths(std::span<const metrics::PathLogits> paths,
                                  const spectral::BandSpec& spec);

// ---------------------------------------------------------------------------
// Configuration files
// ---------------------------------------------------------------------------

/// Everything a CLI invocation needs beyond ExperimentConfig.
struct Setup {
  ExperimentConfig config;
  nlohmann::json model = nlohmann::json::object();
  nlohmann::json anchors = nlohmann::json::object();
  nlohmann::json dataset = nullptr;
  std::optional<Modulation> modulation;
  std::string export_logits;
};

/// Parses a config document. Unknown keys are rejected. `base_dir` resolves
/// relative paths. The seed falls back to $SBMETER_SEED when absent.
Setup parse_setup(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

LabeledDataset build_dataset(const nlohmann::json& spec, const std::filesystem::path& base_dir = {});
models::EncoderModel build_model(const nlohmann::json& spec, models::InputShape shape,
                                 const std::filesystem::path& base_dir = {});
models::TextAnchors build_anchors(const nlohmann::json& spec, std::size_t num_classes,
                                  std::size_t dim, const std::filesystem::path& base_dir = {});

}  // namespace sbmeter::harness
