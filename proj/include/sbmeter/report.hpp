#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sbmeter/harness.hpp"

namespace sbmeter::report {

/// Key order is insertion order, so reports are stable byte for byte.
using Json = nlohmann::ordered_json;

/// %.17g, with ".0" appended when the result would read as an integer.
/// Non-finite values have no JSON spelling and are rejected.
std::string format_double(double v);

/// Pretty-printed JSON with every float at 17 significant digits.
std::string dump(const Json& doc, int indent = 2);

/// Input echo: everything that determines the result. The worker count and
/// output paths are left out because they cannot change it.
Json config_echo(const harness::Setup& setup);

Json run_json(const harness::RunResult& run);
Json mean_json(const harness::MeanResult& mean);

/// {config, per_run, mean, decay, warnings}; decay is empty.
Json measurement_document(const harness::Setup& setup, const harness::SensitivityReport& report);

/// Same layout; per_run and mean describe the reference setting, decay holds
/// the ratio table, and every setting is listed under "settings".
Json sweep_document(const harness::Setup& setup, const harness::SweepReport& sweep);

/// Writes dump(doc) plus a newline. Throws std::runtime_error when the file
/// cannot be written.
void emit_report(const Json& doc, const std::filesystem::path& path);

}  // namespace sbmeter::report
