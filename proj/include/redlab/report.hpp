#pragma once

// report.csv, summary.txt, structured-text rows and SVG plots. The plot is a
// function of the CSV rows alone.

#include <json.hpp>

#include <string>
#include <vector>

#include "redlab/experiments.hpp"

namespace redlab {

/// scenario,model_id,m,replicate,seed,measured_risk,bound_value,eps_opt,verdict,se,wall_time_ms
const std::string& csv_header();

/// wall_time_ms is written as 0 unless `timing` is set.
std::string rows_to_csv(const std::vector<ReportRow>& rows, bool timing);
/// Throws ConfigError on a malformed document or a header mismatch.
std::vector<ReportRow> rows_from_csv(const std::string& text);

nlohmann::json rows_to_json(const std::vector<ReportRow>& rows, bool timing);

std::string summary_text(const RunResult& run, bool timing);

/// Log-log plot of median measured risk against m per model, with the bound
/// curve from the aggregate rows. Rows of other scenarios are ignored.
std::string render_svg(const std::vector<ReportRow>& rows, const std::string& scenario);

/// Scenarios whose rows form a sweep over m and get a plot.
bool scenario_has_plot(const std::string& scenario);

/// Writes report.csv, summary.txt and, for sweeps, plot_<scenario>.svg.
/// Returns the written paths.
std::vector<std::string> write_outputs(const RunResult& run, const std::string& dir, bool timing);

std::string format_double(double v);

}  // namespace redlab
