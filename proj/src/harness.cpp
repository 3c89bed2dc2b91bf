#include "sbmeter/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cerrno>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "sbmeter/containers.hpp"
#include "sbmeter/rng.hpp"

namespace sbmeter::harness {

using nlohmann::json;

std::string to_string(TargetPolicy p) {
  switch (p) {
    case TargetPolicy::x1: return "x1";
    case TargetPolicy::x2: return "x2";
    case TargetPolicy::mean: return "mean";
  }
  return "?";
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::beta: return "beta";
    case SweepParam::gamma_s: return "gamma_s";
    case SweepParam::cutoff: return "cutoff";
  }
  return "?";
}

TargetPolicy parse_target_policy(const std::string& s) {
  if (s == "x1") return TargetPolicy::x1;
  if (s == "x2") return TargetPolicy::x2;
  if (s == "mean") return TargetPolicy::mean;
  throw std::invalid_argument("unknown target policy '" + s + "' (expected x1, x2 or mean)");
}

SweepParam parse_sweep_param(const std::string& s) {
  if (s == "beta") return SweepParam::beta;
  if (s == "gamma_s" || s == "gamma-s") return SweepParam::gamma_s;
  if (s == "cutoff") return SweepParam::cutoff;
  throw std::invalid_argument("unknown sweep parameter '" + s + "' (expected beta, gamma_s or cutoff)");
}

namespace {

void check_param_value(SweepParam param, double v) {
  const bool ok = std::isfinite(v) && (param == SweepParam::gamma_s ? v > 0.0 : (v > 0.0 && v <= 1.0));
  if (!ok) {
    throw std::invalid_argument(to_string(param) + " value " + std::to_string(v) +
                                (param == SweepParam::gamma_s ? " must be > 0" : " must be in (0, 1]"));
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (steps < 2) throw std::invalid_argument("config: steps must be >= 2");
  if (pairs < 1) throw std::invalid_argument("config: pairs must be >= 1");
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (sweep) {
    if (sweep->values.empty()) throw std::invalid_argument("config: sweep has no values");
    for (double v : sweep->values) check_param_value(sweep->param, v);
  }
}

// ---------------------------------------------------------------------------

PairSample sample_pairs(const LabeledDataset& dataset, std::size_t count, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  std::vector<std::uint64_t> per_class(dataset.num_classes(), 0);
  for (const auto& item : dataset.items()) ++per_class[item.label];
  std::uint64_t same = 0;
  for (auto c : per_class) same += c * c;
  PairSample out;
  out.distinct = static_cast<std::uint64_t>(n) * n - same;
  if (out.distinct == 0) {
    throw std::invalid_argument("sample_pairs: dataset has a single class; no cross-class pairs exist");
  }
  SplitMix64 rng(seed);
  out.pairs.reserve(count);
  auto label = [&](std::size_t i) { return dataset[i].label; };

  if (count > out.distinct) {
    out.with_replacement = true;
    while (out.pairs.size() < count) {
      const auto i = static_cast<std::size_t>(rng.below(n));
      const auto j = static_cast<std::size_t>(rng.below(n));
      if (label(i) != label(j)) out.pairs.push_back({i, j});
    }
    return out;
  }

  // Small pools: enumerate and take a partial Fisher–Yates prefix.
  if (out.distinct <= 4 * static_cast<std::uint64_t>(count) + 1024) {
    std::vector<ImagePair> all;
    all.reserve(out.distinct);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (label(i) != label(j)) all.push_back({i, j});
      }
    }
    for (std::size_t t = 0; t < count; ++t) {
      const auto r = t + static_cast<std::size_t>(rng.below(all.size() - t));
      std::swap(all[t], all[r]);
      out.pairs.push_back(all[t]);
    }
    return out;
  }

  std::unordered_set<std::uint64_t> seen;
  while (out.pairs.size() < count) {
    const auto i = static_cast<std::size_t>(rng.below(n));
    const auto j = static_cast<std::size_t>(rng.below(n));
    if (label(i) == label(j)) continue;
    if (seen.insert(static_cast<std::uint64_t>(i) * n + j).second) out.pairs.push_back({i, j});
  }
  return out;
}

// ---------------------------------------------------------------------------

double RunResult::at(const std::string& band) const {
  for (const auto& v : values) {
    if (v.band == band) return v.sensitivity;
  }
  throw std::out_of_range("no sensitivity for band '" + band + "'");
}

double MeanResult::at(const std::string& band) const {
  for (const auto& v : values) {
    if (v.band == band) return v.sensitivity;
  }
  throw std::out_of_range("no sensitivity for band '" + band + "'");
}

namespace {

using metrics::PathLogits;

// slots[0] is the full path, slots[1 + k] band k; each holds one record per target.
using PairOutcome = std::vector<std::vector<PathLogits>>;

std::vector<std::size_t> targets_for(TargetPolicy policy, const LabeledItem& a, const LabeledItem& b) {
  switch (policy) {
    case TargetPolicy::x1: return {a.label};
    case TargetPolicy::x2: return {b.label};
    case TargetPolicy::mean: return {a.label, b.label};
  }
  return {a.label};
}

void score(std::vector<PathLogits>& slot, const Subject& subject, const spectral::InterpolationPath& path,
           const std::vector<std::size_t>& targets) {
  auto record = models::clip_logits(subject.encoder, path, subject.anchors, targets.front());
  for (std::size_t t = 1; t < targets.size(); ++t) {
    slot.push_back(record);
    slot.back().target_class = targets[t];
  }
  slot.insert(slot.begin(), std::move(record));
}

PairOutcome measure_pair(const ExperimentConfig& config, const Subject& subject, const ImagePair& pair) {
  const auto& a = subject.dataset[pair.first];
  const auto& b = subject.dataset[pair.second];
  const spectral::PairId id{a.id, b.id};
  const auto targets = targets_for(config.target, a, b);
  const auto& spec = config.bands;

  PairOutcome out(spec.size() + 1);
  score(out[0], subject, spectral::linear_path(a.image, b.image, config.steps, id), targets);
  const auto ca = spectral::band_components(a.image, spec);
  const auto cb = spectral::band_components(b.image, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const auto path = spectral::band_path_from_components(a.image, ca[k], cb[k], spec[k].name, config.steps,
                                                          config.path_form, id);
    score(out[k + 1], subject, path, targets);
  }
  return out;
}

std::vector<PairOutcome> measure_pairs(const ExperimentConfig& config, const Subject& subject,
                                       const std::vector<ImagePair>& pairs, std::size_t run) {
  std::vector<PairOutcome> outcomes(pairs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::optional<std::size_t> bad_pair;
  std::string bad_what;

  auto work = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t p = next.fetch_add(1);
      if (p >= pairs.size()) return;
      try {
        outcomes[p] = measure_pair(config, subject, pairs[p]);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!bad_pair || p < *bad_pair) {
          bad_pair = p;
          bad_what = e.what();
        }
        failed.store(true);
      }
    }
  };

  const std::size_t threads = std::min(config.workers, pairs.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (bad_pair) {
    const auto& pr = pairs[*bad_pair];
    throw std::runtime_error("run " + std::to_string(run) + ", pair " + std::to_string(*bad_pair) + " (" +
                             subject.dataset[pr.first].id + " -> " + subject.dataset[pr.second].id +
                             "): " + bad_what);
  }
  return outcomes;
}

void check_subject(const ExperimentConfig& config, const Subject& subject) {
  const auto& img = subject.dataset[0].image;
  const models::InputShape shape{img.channels(), img.height(), img.width()};
  if (!(shape == subject.encoder.input_shape())) {
    throw std::invalid_argument("dataset images do not match the encoder input shape");
  }
  if (subject.anchors.dim() != subject.encoder.output_dim()) {
    throw std::invalid_argument("anchor dimension " + std::to_string(subject.anchors.dim()) +
                                " does not match encoder output " +
                                std::to_string(subject.encoder.output_dim()));
  }
  if (subject.anchors.num_classes() < subject.dataset.num_classes()) {
    throw std::invalid_argument("dataset has " + std::to_string(subject.dataset.num_classes()) +
                                " classes but only " + std::to_string(subject.anchors.num_classes()) +
                                " anchors");
  }
  config.validate();
}

}  // namespace

SensitivityReport run_measurement(const ExperimentConfig& config, const Subject& subject,
                                  std::vector<PathLogits>* exported) {
  check_subject(config, subject);
  const auto& spec = config.bands;
  const std::size_t per_pair = config.target == TargetPolicy::mean ? 2 : 1;

  SensitivityReport report;
  report.pairs_per_run = config.pairs;
  for (std::size_t r = 0; r < config.runs; ++r) {
    RunResult run;
    run.seed = config.seed + r;
    const auto sample = sample_pairs(subject.dataset, config.pairs, run.seed);
    if (sample.with_replacement) {
      report.warnings.push_back("run " + std::to_string(r) + ": requested " + std::to_string(config.pairs) +
                                " pairs but only " + std::to_string(sample.distinct) +
                                " distinct cross-class pairs exist; sampled with replacement");
    }
    auto outcomes = measure_pairs(config, subject, sample.pairs, r);

    for (std::size_t s = 0; s <= spec.size(); ++s) {
      std::vector<PathLogits> slot;
      slot.reserve(outcomes.size() * per_pair);
      for (auto& o : outcomes) {
        for (auto& rec : o[s]) slot.push_back(std::move(rec));
      }
      const std::string name = s == 0 ? "full" : spec[s - 1].name;
      metrics::Sensitivity sens;
      try {
        sens = metrics::tv_sensitivity(slot);
      } catch (const metrics::NoValidPairsError& e) {
        throw std::runtime_error("run " + std::to_string(r) + ", band '" + name + "': " + e.what());
      }
      run.values.push_back({name, sens.value, sens.skipped / per_pair});
      if (exported) {
        for (auto& rec : slot) exported->push_back(std::move(rec));
      }
    }

    try {
      run.ratio = metrics::sb_ratio(run.values[1].sensitivity, run.values.back().sensitivity);
    } catch (const metrics::UndefinedRatioError& e) {
      report.warnings.push_back("run " + std::to_string(r) + ": ratio undefined: " + e.what());
    }
    report.runs.push_back(std::move(run));
  }

  // Sequential reduction in run order.
  const double runs = static_cast<double>(report.runs.size());
  for (std::size_t s = 0; s <= spec.size(); ++s) {
    MeanBandValue mv;
    mv.band = report.runs.front().values[s].band;
    for (const auto& run : report.runs) {
      mv.sensitivity += run.values[s].sensitivity;
      mv.skipped_pairs += static_cast<double>(run.values[s].skipped_pairs);
    }
    mv.sensitivity /= runs;
    mv.skipped_pairs /= runs;
    report.mean.values.push_back(std::move(mv));
  }
  double ratio_sum = 0.0;
  for (const auto& run : report.runs) {
    if (run.ratio) {
      ratio_sum += *run.ratio;
      ++report.mean.ratio_runs;
    }
  }
  if (report.mean.ratio_runs > 0) report.mean.ratio = ratio_sum / static_cast<double>(report.mean.ratio_runs);
  return report;
}

models::SurgeryResult modulate(const models::EncoderModel& model, SweepParam param, double value) {
  check_param_value(param, value);
  switch (param) {
    case SweepParam::beta: return models::swap_activations(model, value);
    case SweepParam::gamma_s: return models::scale_layernorms(model, value);
    case SweepParam::cutoff: return models::set_lowpass_cutoff(model, value);
  }
  throw std::logic_error("modulate: unreachable");
}

namespace {

std::string site_list(const std::vector<std::string>& sites) {
  if (sites.empty()) return "none";
  std::string s;
  for (const auto& x : sites) s += (s.empty() ? "" : ", ") + x;
  return s;
}

void check_applicable(const models::EncoderModel& model, SweepParam param) {
  const auto act = model.activation_sites();
  const auto ln = model.layernorm_sites();
  const auto lp = model.lowpass_sites();
  const bool ok = (param == SweepParam::beta && !act.empty()) || (param == SweepParam::gamma_s && !ln.empty()) ||
                  (param == SweepParam::cutoff && !lp.empty());
  if (!ok) {
    throw std::invalid_argument("sweep parameter " + to_string(param) + " does not apply to model '" +
                                model.name() + "'; available sites: activation [" + site_list(act) +
                                "], layernorm [" + site_list(ln) + "], lowpass [" + site_list(lp) + "]");
  }
}

}  // namespace

SweepReport run_sweep(const ExperimentConfig& config, const Subject& subject) {
  if (!config.sweep) throw std::invalid_argument("run_sweep: config has no sweep");
  config.validate();
  const auto param = config.sweep->param;
  check_applicable(subject.encoder, param);

  SweepReport out;
  out.param = param;
  out.reference = 1.0;
  std::vector<double> values = config.sweep->values;
  if (std::find(values.begin(), values.end(), out.reference) == values.end()) {
    values.insert(values.begin(), out.reference);
  }

  std::optional<std::size_t> ref_index;
  for (double v : values) {
    auto surgery = modulate(subject.encoder, param, v);
    if (surgery.warning) out.warnings.push_back(*surgery.warning);
    const Subject modulated{surgery.model, subject.anchors, subject.dataset};
    auto report = run_measurement(config, modulated);
    report.modulation = Modulation{param, v};
    for (const auto& w : report.warnings) out.warnings.push_back(to_string(param) + "=" + std::to_string(v) + ": " + w);
    if (!ref_index && v == out.reference) ref_index = out.settings.size();
    out.settings.push_back({v, std::move(report)});
  }

  const auto& ref = out.settings[*ref_index].report.mean;
  for (const auto& v : ref.values) out.bands.push_back(v.band);
  std::vector<bool> flagged(ref.values.size(), false);
  for (const auto& setting : out.settings) {
    DecayRow row;
    row.value = setting.value;
    for (std::size_t s = 0; s < ref.values.size(); ++s) {
      try {
        row.ratios.push_back(metrics::decay_ratio(setting.report.mean.values[s].sensitivity, ref.values[s].sensitivity));
      } catch (const metrics::UndefinedRatioError& e) {
        row.ratios.push_back(std::nullopt);
        if (!flagged[s]) {
          out.warnings.push_back("decay ratio for '" + ref.values[s].band + "' undefined: " + e.what());
          flagged[s] = true;
        }
      }
    }
    out.decay.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<PathLogits> ingest_path_logits(const std::filesystem::path& file) {
  return io::load_path_logits(file);
}

PathSetMetrics metrics_from_paths(std::span<const PathLogits> paths, const spectral::BandSpec& spec) {
  PathSetMetrics out;
  std::vector<std::pair<std::string, std::vector<PathLogits>>> groups;
  for (const auto& p : paths) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == p.band; });
    if (it == groups.end()) {
      groups.push_back({p.band, {}});
      it = std::prev(groups.end());
    }
    it->second.push_back(p);
  }
  for (const auto& [band, records] : groups) {
    try {
      out.bands.push_back({band, metrics::tv_sensitivity(records)});
    } catch (const metrics::NoValidPairsError& e) {
      out.warnings.push_back("band '" + band + "': " + e.what());
    }
  }
  auto find = [&](const std::string& name) -> const metrics::Sensitivity* {
    for (const auto& [b, s] : out.bands) {
      if (b == name) return &s;
    }
    return nullptr;
  };
  const auto* lo = find(spec.front().name);
  const auto* hi = find(spec.back().name);
  if (lo && hi) {
    try {
      out.ratio = metrics::sb_ratio(lo->value, hi->value);
    } catch (const metrics::UndefinedRatioError& e) {
      out.warnings.push_back(std::string("ratio undefined: ") + e.what());
    }
  } else {
    out.warnings.push_back("ratio needs bands '" + spec.front().name + "' and '" + spec.back().name +
                           "' in the input");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw std::invalid_argument(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::uint64_t get_seed(const json& obj, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw std::invalid_argument(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

spectral::BandSpec parse_bands(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("bands: expected a non-empty array");
  if (j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return spectral::BandSpec::from_thresholds(j[0].get<double>(), j[1].get<double>());
  }
  std::vector<spectral::Band> bands;
  for (const auto& b : j) {
    check_keys(b, {"name", "r_min", "r_max"}, "bands[]");
    bands.push_back({b.at("name").get<std::string>(), b.at("r_min").get<double>(), b.at("r_max").get<double>()});
  }
  return spectral::BandSpec(std::move(bands));
}

std::uint64_t env_seed() {
  const char* s = std::getenv("SBMETER_SEED");
  if (!s || !*s) return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || *end != '\0' || s[0] == '-') {
    throw std::invalid_argument(std::string("SBMETER_SEED is not a non-negative integer: '") + s + "'");
  }
  return v;
}

}  // namespace

Setup parse_setup(const json& doc, const std::filesystem::path& base_dir) {
  try {
    check_keys(doc,
               {"dataset", "model", "anchors", "bands", "steps", "pairs", "runs", "seed", "target", "path_form",
                "sweep", "modulation", "output", "workers", "export_logits"},
               "config");
    Setup s;
    auto& c = s.config;
    if (doc.contains("dataset")) {
      s.dataset = doc.at("dataset");
      if (s.dataset.is_string()) {
        c.dataset = resolve(base_dir, s.dataset.get<std::string>()).string();
        s.dataset = c.dataset;
      } else if (s.dataset.is_object() && s.dataset.contains("dir")) {
        c.dataset = resolve(base_dir, s.dataset.at("dir").get<std::string>()).string();
        s.dataset = c.dataset;
      } else {
        c.dataset = "synthetic";
      }
    }
    if (doc.contains("model")) s.model = doc.at("model");
    if (doc.contains("anchors")) s.anchors = doc.at("anchors");
    if (doc.contains("bands")) c.bands = parse_bands(doc.at("bands"));
    c.steps = get_count(doc, "steps", c.steps);
    c.pairs = get_count(doc, "pairs", c.pairs);
    c.runs = get_count(doc, "runs", c.runs);
    c.workers = get_count(doc, "workers", c.workers);
    c.seed = doc.contains("seed") ? get_seed(doc, "seed", 0) : env_seed();
    c.target = parse_target_policy(get_or<std::string>(doc, "target", "x1"));
    const auto form = get_or<std::string>(doc, "path_form", "anchored");
    if (form == "anchored") {
      c.path_form = spectral::PathForm::anchored;
    } else if (form == "literal") {
      c.path_form = spectral::PathForm::literal;
    } else {
      throw std::invalid_argument("path_form must be 'anchored' or 'literal'");
    }
    if (doc.contains("sweep")) {
      const auto& sw = doc.at("sweep");
      check_keys(sw, {"param", "values"}, "sweep");
      c.sweep = Sweep{parse_sweep_param(sw.at("param").get<std::string>()), sw.at("values").get<std::vector<double>>()};
    }
    if (doc.contains("modulation")) {
      const auto& m = doc.at("modulation");
      check_keys(m, {"param", "value"}, "modulation");
      s.modulation = Modulation{parse_sweep_param(m.at("param").get<std::string>()), m.at("value").get<double>()};
      check_param_value(s.modulation->param, s.modulation->value);
    }
    if (doc.contains("output")) c.output = resolve(base_dir, doc.at("output").get<std::string>()).string();
    if (doc.contains("export_logits")) {
      s.export_logits = resolve(base_dir, doc.at("export_logits").get<std::string>()).string();
    }
    c.validate();
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

LabeledDataset build_dataset(const json& spec, const std::filesystem::path& base_dir) {
  try {
    if (spec.is_null()) throw std::invalid_argument("config: no dataset given");
    if (spec.is_string()) return load_dataset(resolve(base_dir, spec.get<std::string>()));
    check_keys(spec, {"dir", "synthetic"}, "dataset");
    if (spec.contains("dir")) return load_dataset(resolve(base_dir, spec.at("dir").get<std::string>()));
    const auto& syn = spec.at("synthetic");
    check_keys(syn, {"num_classes", "per_class", "channels", "height", "width", "noise", "seed"}, "dataset.synthetic");
    SyntheticSpec s;
    s.num_classes = get_count(syn, "num_classes", s.num_classes);
    s.per_class = get_count(syn, "per_class", s.per_class);
    s.channels = get_count(syn, "channels", s.channels);
    s.height = get_count(syn, "height", s.height);
    s.width = get_count(syn, "width", s.width);
    s.noise = get_or<double>(syn, "noise", s.noise);
    s.seed = get_seed(syn, "seed", s.seed);
    return synthetic_dataset(s);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("dataset: ") + e.what());
  }
}

models::EncoderModel build_model(const json& spec, models::InputShape shape, const std::filesystem::path& base_dir) {
  try {
    if (spec.contains("dir")) {
      check_keys(spec, {"dir"}, "model");
      auto model = models::load_model(resolve(base_dir, spec.at("dir").get<std::string>()));
      if (!(model.input_shape() == shape)) {
        throw std::invalid_argument("model input shape does not match the dataset images");
      }
      return model;
    }
    const auto kind = get_or<std::string>(spec, "fixture", "linear");
    const auto seed = get_seed(spec, "seed", 0);
    if (kind == "linear") {
      check_keys(spec, {"fixture", "seed", "embed_dim"}, "model");
      const auto d = get_count(spec, "embed_dim", 8);
      return models::fixture_encoder(models::LinearFixture{shape, models::random_matrix(seed, d, shape.size())});
    }
    if (kind == "smoothing") {
      check_keys(spec, {"fixture", "seed", "embed_dim", "cutoff", "stopband_gain"}, "model");
      const auto d = get_count(spec, "embed_dim", 8);
      models::SmoothingFixture f{shape, get_or<double>(spec, "cutoff", 1.0), models::random_matrix(seed, d, shape.size())};
      f.stopband_gain = get_or<double>(spec, "stopband_gain", f.stopband_gain);
      return models::fixture_encoder(f);
    }
    if (kind == "tiny_cnn") {
      check_keys(spec, {"fixture", "seed", "activation", "beta", "hidden_channels", "embed_dim"}, "model");
      models::TinyCnnFixture f{shape, seed};
      const auto act = get_or<std::string>(spec, "activation", "relu");
      if (act == "relu") {
        f.activation.kind = models::ActivationKind::relu;
      } else if (act == "betarelu") {
        f.activation.kind = models::ActivationKind::betarelu;
      } else {
        throw std::invalid_argument("model.activation must be 'relu' or 'betarelu'");
      }
      f.activation.beta = get_or<double>(spec, "beta", 1.0);
      f.hidden_channels = get_count(spec, "hidden_channels", f.hidden_channels);
      f.embed_dim = get_count(spec, "embed_dim", f.embed_dim);
      return models::fixture_encoder(f);
    }
    if (kind == "tiny_prenorm") {
      check_keys(spec, {"fixture", "seed", "gamma_s", "embed_dim", "hidden"}, "model");
      models::TinyPrenormFixture f{shape, seed};
      f.gamma_s = get_or<double>(spec, "gamma_s", 1.0);
      f.embed_dim = get_count(spec, "embed_dim", f.embed_dim);
      f.hidden = get_count(spec, "hidden", f.hidden);
      return models::fixture_encoder(f);
    }
    throw std::invalid_argument("unknown model fixture '" + kind +
                                "' (expected linear, smoothing, tiny_cnn, tiny_prenorm or a {\"dir\": ...} model)");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model: ") + e.what());
  }
}

models::TextAnchors build_anchors(const json& spec, std::size_t num_classes, std::size_t dim,
                                  const std::filesystem::path& base_dir) {
  try {
    check_keys(spec, {"seed", "file", "values"}, "anchors");
    if (spec.contains("file")) {
      const auto t = io::load_tensor(resolve(base_dir, spec.at("file").get<std::string>()));
      if (t.dims.size() != 2 || t.dims[1] != dim || t.dims[0] < num_classes) {
        throw std::invalid_argument("anchors file must be a K x " + std::to_string(dim) + " tensor with K >= " +
                                    std::to_string(num_classes));
      }
      return models::TextAnchors(t.dims[0], dim, t.values);
    }
    if (spec.contains("values")) {
      const auto rows = spec.at("values").get<std::vector<std::vector<double>>>();
      std::vector<double> flat;
      for (const auto& r : rows) {
        if (r.size() != dim) throw std::invalid_argument("anchors: every row needs " + std::to_string(dim) + " values");
        flat.insert(flat.end(), r.begin(), r.end());
      }
      return models::TextAnchors(rows.size(), dim, std::move(flat));
    }
    return models::random_anchors(get_seed(spec, "seed", 0), num_classes, dim);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("anchors: ") + e.what());
  }
}

}  // namespace sbmeter::harness
