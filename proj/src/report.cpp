#include "sbmeter/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sbmeter::report {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw std::domain_error("report: non-finite value cannot be serialized");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

void write_string(std::string& out, const std::string& s) {
  // nlohmann's escaping is correct and already handles UTF-8.
  out += Json(s).dump();
}

void write(std::string& out, const Json& j, int indent, int depth) {
  const std::string pad = indent >= 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close_pad = indent >= 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent >= 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        write_string(out, it.key());
        out += indent >= 0 ? ": " : ":";
        write(out, it.value(), indent, depth + 1);
      }
      out += nl;
      out += close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      out += nl;
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) {
          out += ",";
          out += nl;
        }
        out += pad;
        write(out, j[k], indent, depth + 1);
      }
      out += nl;
      out += close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    case Json::value_t::string:
      write_string(out, j.get<std::string>());
      return;
    default:
      out += j.dump();
  }
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json bands_json(const spectral::BandSpec& spec) {
  Json arr = Json::array();
  for (const auto& b : spec.bands()) arr.push_back({{"name", b.name}, {"r_min", b.r_min}, {"r_max", b.r_max}});
  return arr;
}

std::string key_for(const std::string& band) { return band == "full" ? "S" : "S_" + band; }

}  // namespace

std::string dump(const Json& doc, int indent) {
  std::string out;
  write(out, doc, indent, 0);
  return out;
}

Json config_echo(const harness::Setup& setup) {
  const auto& c = setup.config;
  Json j;
  j["dataset"] = Json::parse(setup.dataset.dump());
  j["model"] = Json::parse(setup.model.dump());
  j["anchors"] = Json::parse(setup.anchors.dump());
  j["bands"] = bands_json(c.bands);
  j["steps"] = c.steps;
  j["pairs"] = c.pairs;
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  j["target"] = harness::to_string(c.target);
  j["path_form"] = c.path_form == spectral::PathForm::anchored ? "anchored" : "literal";
  if (c.sweep) {
    j["sweep"] = {{"param", harness::to_string(c.sweep->param)}, {"values", c.sweep->values}};
  }
  if (setup.modulation) {
    j["modulation"] = {{"param", harness::to_string(setup.modulation->param)}, {"value", setup.modulation->value}};
  }
  j["distance_tolerance"] = metrics::kDistanceTolerance;
  j["ratio_tolerance"] = metrics::kRatioTolerance;
  return j;
}

Json run_json(const harness::RunResult& run) {
  Json j;
  j["seed"] = run.seed;
  Json skipped = Json::object();
  for (const auto& v : run.values) {
    j[key_for(v.band)] = v.sensitivity;
    skipped[v.band] = v.skipped_pairs;
  }
  j["ratio"] = optional_number(run.ratio);
  j["skipped_pairs"] = std::move(skipped);
  return j;
}

Json mean_json(const harness::MeanResult& mean) {
  Json j;
  Json skipped = Json::object();
  for (const auto& v : mean.values) {
    j[key_for(v.band)] = v.sensitivity;
    skipped[v.band] = v.skipped_pairs;
  }
  j["ratio"] = optional_number(mean.ratio);
  j["ratio_runs"] = mean.ratio_runs;
  j["skipped_pairs"] = std::move(skipped);
  return j;
}

namespace {

Json runs_json(const harness::SensitivityReport& report) {
  Json arr = Json::array();
  for (const auto& r : report.runs) arr.push_back(run_json(r));
  return arr;
}

}  // namespace

Json measurement_document(const harness::Setup& setup, const harness::SensitivityReport& report) {
  Json doc;
  doc["config"] = config_echo(setup);
  doc["pairs_per_run"] = report.pairs_per_run;
  doc["per_run"] = runs_json(report);
  doc["mean"] = mean_json(report.mean);
  doc["decay"] = Json::object();
  doc["warnings"] = report.warnings;
  return doc;
}

Json sweep_document(const harness::Setup& setup, const harness::SweepReport& sweep) {
  Json doc;
  doc["config"] = config_echo(setup);
  const harness::SweepSetting* ref = nullptr;
  for (const auto& s : sweep.settings) {
    if (s.value == sweep.reference) {
      ref = &s;
      break;
    }
  }
  if (!ref) throw std::logic_error("sweep report has no reference setting");
  doc["pairs_per_run"] = ref->report.pairs_per_run;
  doc["per_run"] = runs_json(ref->report);
  doc["mean"] = mean_json(ref->report.mean);

  Json rows = Json::array();
  for (const auto& row : sweep.decay) {
    Json r;
    r["value"] = row.value;
    for (std::size_t s = 0; s < sweep.bands.size(); ++s) r[key_for(sweep.bands[s])] = optional_number(row.ratios[s]);
    rows.push_back(std::move(r));
  }
  doc["decay"] = {{"param", harness::to_string(sweep.param)}, {"reference", sweep.reference}, {"rows", rows}};

  Json settings = Json::array();
  for (const auto& s : sweep.settings) {
    Json e;
    e["value"] = s.value;
    e["per_run"] = runs_json(s.report);
    e["mean"] = mean_json(s.report.mean);
    settings.push_back(std::move(e));
  }
  doc["settings"] = std::move(settings);
  doc["warnings"] = sweep.warnings;
  return doc;
}

void emit_report(const Json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report to " + path.string());
  out << dump(doc) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("failed while writing report to " + path.string());
}

}  // namespace sbmeter::report
