// sbmeter: measure how strongly an image encoder leans on low frequencies.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sbmeter/containers.hpp"
#include "sbmeter/harness.hpp"
#include "sbmeter/metrics.hpp"
#include "sbmeter/report.hpp"
#include "sbmeter/spectral.hpp"

namespace fs = std::filesystem;
using namespace sbmeter;
using report::Json;

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size() || !std::isfinite(v)) {
      throw std::invalid_argument(what + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> pairs;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> workers;
  std::string bands;
  std::string beta;
  std::string gamma_s;
  std::string cutoff;
  std::string target;
  std::string out;
  std::string export_logits;
};

void add_common(CLI::App* cmd, Common& c, bool sweep) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--seed", c.seed, "Base seed (default: config, then $SBMETER_SEED, then 0)");
  cmd->add_option("--pairs", c.pairs, "Pairs per run");
  cmd->add_option("--steps", c.steps, "Interpolation steps per path");
  cmd->add_option("--runs", c.runs, "Independent runs");
  cmd->add_option("--workers", c.workers, "Worker threads (does not change results)");
  cmd->add_option("--bands", c.bands, "Band thresholds lo,hi");
  const char* list_hint = sweep ? "Sweep values (comma separated)" : "Single modulation value";
  cmd->add_option("--beta", c.beta, std::string("BetaReLU smoothness. ") + list_hint);
  cmd->add_option("--gamma-s", c.gamma_s, std::string("LayerNorm scale. ") + list_hint);
  cmd->add_option("--cutoff", c.cutoff, std::string("Low-pass cutoff. ") + list_hint);
  cmd->add_option("--target", c.target, "Target logit: x1, x2 or mean");
  cmd->add_option("--out", c.out, "Report path, - for stdout (default: config output, else stdout)");
  if (!sweep) cmd->add_option("--export-logits", c.export_logits, "Write every scored path as SBP1");
}

fs::path base_of(const std::string& config) {
  return config.empty() ? fs::path{} : fs::absolute(fs::path(config)).parent_path();
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
}

harness::Setup load_setup(const Common& c, bool sweep) {
  nlohmann::json doc = c.config.empty() ? nlohmann::json::object() : read_json_file(c.config);
  if (!doc.contains("dataset")) doc["dataset"] = {{"synthetic", nlohmann::json::object()}};
  if (!doc.contains("model")) doc["model"] = {{"fixture", "linear"}};
  auto setup = harness::parse_setup(doc, base_of(c.config));
  auto& cfg = setup.config;
  if (c.seed) cfg.seed = *c.seed;
  if (c.pairs) cfg.pairs = *c.pairs;
  if (c.steps) cfg.steps = *c.steps;
  if (c.runs) cfg.runs = *c.runs;
  if (c.workers) cfg.workers = *c.workers;
  if (!c.bands.empty()) {
    const auto t = parse_list(c.bands, "--bands");
    if (t.size() != 2) throw std::invalid_argument("--bands expects lo,hi");
    cfg.bands = spectral::BandSpec::from_thresholds(t[0], t[1]);
  }
  if (!c.target.empty()) cfg.target = harness::parse_target_policy(c.target);
  if (!c.out.empty()) cfg.output = c.out;
  if (!c.export_logits.empty()) setup.export_logits = c.export_logits;

  std::optional<std::pair<harness::SweepParam, std::vector<double>>> flag;
  auto take = [&](const std::string& text, harness::SweepParam p, const char* name) {
    if (text.empty()) return;
    if (flag) throw std::invalid_argument("only one of --beta, --gamma-s, --cutoff may be given");
    flag = {p, parse_list(text, name)};
  };
  take(c.beta, harness::SweepParam::beta, "--beta");
  take(c.gamma_s, harness::SweepParam::gamma_s, "--gamma-s");
  take(c.cutoff, harness::SweepParam::cutoff, "--cutoff");
  if (flag) {
    if (sweep) {
      cfg.sweep = harness::Sweep{flag->first, flag->second};
    } else {
      if (flag->second.size() != 1) throw std::invalid_argument("measure takes a single modulation value");
      setup.modulation = harness::Modulation{flag->first, flag->second.front()};
    }
  }
  cfg.validate();
  return setup;
}

void write_output(const Json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << report::dump(doc) << '\n';
  } else {
    report::emit_report(doc, path);
  }
}

struct Loaded {
  harness::LabeledDataset dataset;
  models::EncoderModel encoder;
  models::TextAnchors anchors;
};

Loaded load_subject(const harness::Setup& setup, const fs::path& base) {
  auto dataset = harness::build_dataset(setup.dataset, base);
  const auto& img = dataset[0].image;
  auto encoder = harness::build_model(setup.model, {img.channels(), img.height(), img.width()}, base);
  auto anchors = harness::build_anchors(setup.anchors, dataset.num_classes(), encoder.output_dim(), base);
  return {std::move(dataset), std::move(encoder), std::move(anchors)};
}

int cmd_measure(const Common& c) {
  auto setup = load_setup(c, false);
  if (setup.config.sweep) throw std::invalid_argument("config has a sweep; use the sweep subcommand");
  auto loaded = load_subject(setup, base_of(c.config));
  std::vector<std::string> extra;
  if (setup.modulation) {
    auto surgery = harness::modulate(loaded.encoder, setup.modulation->param, setup.modulation->value);
    if (surgery.warning) extra.push_back(*surgery.warning);
    loaded.encoder = std::move(surgery.model);
  }
  std::vector<metrics::PathLogits> paths;
  const harness::Subject subject{loaded.encoder, loaded.anchors, loaded.dataset};
  auto result = harness::run_measurement(setup.config, subject, setup.export_logits.empty() ? nullptr : &paths);
  result.modulation = setup.modulation;
  result.warnings.insert(result.warnings.begin(), extra.begin(), extra.end());
  if (!setup.export_logits.empty()) io::save_path_logits(setup.export_logits, paths);
  write_output(report::measurement_document(setup, result), setup.config.output);
  return 0;
}

int cmd_sweep(const Common& c) {
  auto setup = load_setup(c, true);
  if (!setup.config.sweep) throw std::invalid_argument("no sweep given (use --beta, --gamma-s or --cutoff with a list)");
  auto loaded = load_subject(setup, base_of(c.config));
  if (setup.modulation) {
    throw std::invalid_argument("sweep does not combine with a fixed modulation");
  }
  const harness::Subject subject{loaded.encoder, loaded.anchors, loaded.dataset};
  const auto result = harness::run_sweep(setup.config, subject);
  write_output(report::sweep_document(setup, result), setup.config.output);
  return 0;
}

spectral::BandSpec bands_from(const std::string& text, const std::string& config) {
  if (!text.empty()) {
    const auto t = parse_list(text, "--bands");
    if (t.size() != 2) throw std::invalid_argument("--bands expects lo,hi");
    return spectral::BandSpec::from_thresholds(t[0], t[1]);
  }
  if (!config.empty()) {
    auto doc = read_json_file(config);
    if (doc.contains("bands")) {
      nlohmann::json only = {{"bands", doc["bands"]}};
      return harness::parse_setup(only).config.bands;
    }
  }
  return spectral::BandSpec::defaults();
}

int cmd_decompose(const std::string& image, const std::string& out_dir, const std::string& bands_text,
                  const std::string& config, const std::string& out) {
  const auto spec = bands_from(bands_text, config);
  const auto x = io::load_image(image);
  const auto parts = spectral::band_components(x, spec);
  fs::create_directories(out_dir);
  const auto stem = fs::path(image).stem().string();

  Json doc;
  doc["image"] = image;
  doc["shape"] = {x.channels(), x.height(), x.width()};
  Json bands = Json::array();
  ndnum::ImageTensor sum(x.channels(), x.height(), x.width());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const auto file = fs::path(out_dir) / (stem + "." + spec[k].name + ".sbt");
    io::save_tensor(file, io::image_to_tensor(parts[k], io::DType::f64));
    sum += parts[k];
    const double e = ndnum::l2_norm(parts[k]);
    bands.push_back({{"name", spec[k].name}, {"r_min", spec[k].r_min}, {"r_max", spec[k].r_max},
                     {"l2_norm", e}, {"file", file.string()}});
  }
  doc["bands"] = std::move(bands);
  doc["reconstruction_max_abs_error"] = ndnum::max_abs_diff(sum, x);
  write_output(doc, out);
  return 0;
}

int cmd_ingest(const std::string& in, const std::string& bands_text, const std::string& config,
               const std::string& out) {
  const auto spec = bands_from(bands_text, config);
  const auto paths = harness::ingest_path_logits(in);
  const auto m = harness::metrics_from_paths(paths, spec);
  Json doc;
  doc["input"] = in;
  doc["records"] = paths.size();
  Json bands = Json::object();
  for (const auto& [name, s] : m.bands) {
    bands[name] = {{"S", s.value}, {"retained", s.retained}, {"skipped", s.skipped}};
  }
  doc["bands"] = std::move(bands);
  doc["ratio"] = m.ratio ? Json(*m.ratio) : Json(nullptr);
  doc["warnings"] = m.warnings;
  write_output(doc, out);
  return 0;
}

struct OneD {
  std::string family;
  std::string coeffs;
  double frequency = 1.0;
  double amplitude = 1.0;
  double phase = 0.0;
  std::string domain = "-1,1";
  std::size_t dmax = 4;
  double tol = 1e-6;
  std::string magnitudes;
  std::string eps = "0.1";
  std::string out;
};

/// Config keys fill in whatever was not given on the command line.
void apply_oned_config(const CLI::App& cmd, OneD& o, const std::string& config) {
  if (config.empty()) return;
  const auto doc = read_json_file(config);
  auto given = [&](const char* flag) { return cmd.get_option(flag)->count() > 0; };
  auto list = [](const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    std::string s;
    for (const auto& x : v) {
      std::ostringstream os;
      os.precision(17);
      os << x.get<double>();
      s += (s.empty() ? "" : ",") + os.str();
    }
    return s;
  };
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "family") {
        if (!given("--family")) o.family = v.get<std::string>();
      } else if (key == "coeffs") {
        if (!given("--coeffs")) o.coeffs = list(v);
      } else if (key == "frequency") {
        if (!given("--frequency")) o.frequency = v.get<double>();
      } else if (key == "amplitude") {
        if (!given("--amplitude")) o.amplitude = v.get<double>();
      } else if (key == "phase") {
        if (!given("--phase")) o.phase = v.get<double>();
      } else if (key == "domain") {
        if (!given("--domain")) o.domain = list(v);
      } else if (key == "dmax") {
        if (!given("--dmax")) o.dmax = v.get<std::size_t>();
      } else if (key == "tol") {
        if (!given("--tol")) o.tol = v.get<double>();
      } else if (key == "M") {
        if (!given("--M")) o.magnitudes = list(v);
      } else if (key == "eps") {
        if (cmd.get_option_no_throw("--eps") && !given("--eps")) o.eps = list(v);
      } else if (key == "output") {
        if (!given("--out")) o.out = v.get<std::string>();
      } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + config + ": " + e.what());
  }
}

metrics::Interval domain_of(const OneD& o) {
  const auto d = parse_list(o.domain, "--domain");
  if (d.size() != 2 || !(d[0] < d[1])) throw std::invalid_argument("--domain expects lo,hi with lo < hi");
  return {d[0], d[1]};
}

metrics::DerivativeProfile profile_of(const OneD& o) {
  const auto domain = domain_of(o);
  if (!o.magnitudes.empty()) {
    if (!o.family.empty()) throw std::invalid_argument("give either --M or --family, not both");
    return metrics::make_profile(parse_list(o.magnitudes, "--M"), domain);
  }
  metrics::Function1D f;
  if (o.family == "poly") {
    if (o.coeffs.empty()) throw std::invalid_argument("--family poly needs --coeffs");
    f = metrics::polynomial(parse_list(o.coeffs, "--coeffs"));
  } else if (o.family == "sin") {
    f = metrics::sine(o.frequency, o.amplitude, o.phase);
  } else {
    throw std::invalid_argument("--family must be poly or sin (or give --M)");
  }
  metrics::ProfileOptions opts;
  opts.max_order = o.dmax;
  opts.tol = o.tol;
  return metrics::derivative_profile(f, domain, opts);
}

Json profile_json(const OneD& o, const metrics::DerivativeProfile& p) {
  Json j;
  if (o.magnitudes.empty()) {
    j["family"] = o.family;
    if (o.family == "poly") {
      j["coeffs"] = parse_list(o.coeffs, "--coeffs");
    } else {
      j["frequency"] = o.frequency;
      j["amplitude"] = o.amplitude;
      j["phase"] = o.phase;
    }
    j["d_max"] = o.dmax;
    j["tol"] = o.tol;
  }
  j["domain"] = {p.domain.lo, p.domain.hi};
  j["M"] = p.magnitudes;
  j["d"] = p.order();
  return j;
}

int cmd_complexity(const OneD& o) {
  const auto p = profile_of(o);
  Json doc = profile_json(o, p);
  doc["complexity"] = metrics::complexity_1d(p);
  doc["notices"] = p.notices;
  write_output(doc, o.out);
  return 0;
}

int cmd_taylor(const OneD& o) {
  const auto p = profile_of(o);
  Json doc = profile_json(o, p);
  Json bounds = Json::array();
  std::vector<std::string> notices = p.notices;
  for (double eps : parse_list(o.eps, "--eps")) {
    const auto b = metrics::taylor_bound(p, eps);
    bounds.push_back({{"eps", eps}, {"bound", b.value}});
    if (b.notice && std::find(notices.begin(), notices.end(), *b.notice) == notices.end()) notices.push_back(*b.notice);
  }
  doc["bounds"] = std::move(bounds);
  doc["notices"] = notices;
  write_output(doc, o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sbmeter: frequency-band sensitivity and simplicity-bias measurements for image encoders"};
  app.require_subcommand(1);

  Common measure_opts;
  auto* measure = app.add_subcommand("measure", "Band sensitivities and low/high ratio for one model");
  add_common(measure, measure_opts, false);

  Common sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Measurements over a beta / gamma_s / cutoff sweep with decay ratios");
  add_common(sweep, sweep_opts, true);

  std::string dec_image, dec_dir = ".", dec_bands, dec_config, dec_out;
  auto* decompose = app.add_subcommand("decompose", "Split an image into its frequency-band components");
  decompose->add_option("--image", dec_image, "PPM or SBT1 image")->required();
  decompose->add_option("--out-dir", dec_dir, "Directory for <stem>.<band>.sbt files");
  decompose->add_option("--bands", dec_bands, "Band thresholds lo,hi");
  decompose->add_option("--config", dec_config, "Config to take bands from");
  decompose->add_option("--out", dec_out, "Summary JSON path (default stdout)");

  std::string ing_in, ing_bands, ing_config, ing_out;
  auto* ingest = app.add_subcommand("ingest", "Metrics from externally computed path logits (SBP1)");
  ingest->add_option("--in", ing_in, "SBP1 file")->required();
  ingest->add_option("--bands", ing_bands, "Band thresholds lo,hi (selects the ratio bands)");
  ingest->add_option("--config", ing_config, "Config to take bands from");
  ingest->add_option("--out", ing_out, "Report path (default stdout)");

  auto add_oned = [](CLI::App* cmd, OneD& o) {
    cmd->add_option("--family", o.family, "poly or sin");
    cmd->add_option("--coeffs", o.coeffs, "Polynomial coefficients c0,c1,... (lowest order first)");
    cmd->add_option("--frequency", o.frequency, "sin frequency");
    cmd->add_option("--amplitude", o.amplitude, "sin amplitude");
    cmd->add_option("--phase", o.phase, "sin phase");
    cmd->add_option("--domain", o.domain, "Interval lo,hi (use --domain=-1,1 for negatives)");
    cmd->add_option("--dmax", o.dmax, "Highest derivative order considered");
    cmd->add_option("--tol", o.tol, "Magnitudes at or below this count as zero");
    cmd->add_option("--M", o.magnitudes, "Derivative magnitudes M0,M1,... instead of a function");
    cmd->add_option("--out", o.out, "Output JSON path (default stdout)");
  };
  OneD cx_opts;
  auto* complexity = app.add_subcommand("complexity1d", "Derivative-profile complexity of a 1-D function");
  add_oned(complexity, cx_opts);
  std::string cx_config;
  complexity->add_option("--config", cx_config, "JSON with the same keys as the flags");

  OneD ty_opts;
  auto* taylor = app.add_subcommand("taylor", "Taylor bound on |f(x + delta) - f(x)| for |delta| <= eps");
  add_oned(taylor, ty_opts);
  taylor->add_option("--eps", ty_opts.eps, "Perturbation amplitude(s), comma separated");
  std::string ty_config;
  taylor->add_option("--config", ty_config, "JSON with the same keys as the flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*measure) return cmd_measure(measure_opts);
    if (*sweep) return cmd_sweep(sweep_opts);
    if (*decompose) return cmd_decompose(dec_image, dec_dir, dec_bands, dec_config, dec_out);
    if (*ingest) return cmd_ingest(ing_in, ing_bands, ing_config, ing_out);
    if (*complexity) {
      apply_oned_config(*complexity, cx_opts, cx_config);
      return cmd_complexity(cx_opts);
    }
    if (*taylor) {
      apply_oned_config(*taylor, ty_opts, ty_config);
      return cmd_taylor(ty_opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "sbmeter: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
