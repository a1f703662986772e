#pragma once

// Seeded experiment sweeps. A run turns an ExperimentConfig into report rows
// (one per model, dimension and replicate, plus aggregate rows) that are
// sorted before output so the result does not depend on scheduling.

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "redlab/bounds.hpp"
#include "redlab/models.hpp"

namespace redlab {

enum class Scenario {
  landmark_sweep,
  direct_sweep,
  factorize_exact,
  error_propagation,
  transfer,
  closed_forms,
  mi_check,
};

std::string to_string(Scenario s);
/// Throws ConfigError for an unknown name.
Scenario scenario_from_string(const std::string& name);
std::vector<std::string> scenario_names();

struct ExperimentConfig {
  Scenario scenario = Scenario::landmark_sweep;
  /// Model tokens: a builtin name, gaussian:<s2>, topic:<K>:<alpha>,
  /// random:<seed>, or a path to a model document.
  std::vector<std::string> models;
  double sigma2 = 1.0;  // used by the bare `gaussian` token
  std::vector<std::size_t> m_grid;
  std::size_t replicates = 50;
  double delta = 0.1;
  std::size_t n_mc = 100000;
  std::size_t validation = 100000;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  /// error-propagation: multiplicative log-noise levels of the perturbed scorer.
  std::vector<double> levels;
  /// transfer: q_X(x) proportional to p_X(x) exp(shift * x / (|X| - 1)).
  double shift = 1.5;
  /// transfer: number of random alpha_Z for the variance comparison.
  std::size_t alpha_draws = 20;
};

/// Scenario defaults (model list, grid, replicate count).
ExperimentConfig default_config(Scenario s);

/// Reads a config document (comments allowed). Fields absent from the
/// document keep the scenario defaults; unknown fields are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc, std::optional<Scenario> scenario = std::nullopt);
ExperimentConfig config_from_file(const std::string& path, std::optional<Scenario> scenario = std::nullopt);
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Throws ConfigError naming the offending field.
void validate_config(const ExperimentConfig& c);

ModelPtr model_from_token(const std::string& token, double sigma2);

struct ReportRow {
  std::string scenario;
  std::string model_id;
  std::size_t m = 0;
  long replicate = 0;  // -1 for aggregate rows
  std::uint64_t seed = 0;
  double measured_risk = 0.0;
  std::optional<double> bound_value;  // nullopt is written as `unbounded`
  double eps_opt = 0.0;
  Verdict verdict = Verdict::not_applicable;
  double se = 0.0;
  double wall_time_ms = 0.0;
};

/// Orders by (scenario, model_id, m, replicate).
bool row_less(const ReportRow& a, const ReportRow& b);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
  std::vector<std::string> notes;
};

/// Least squares of ln(median risk) on ln m over replicate rows (replicate
/// >= 0). Non-positive risks are dropped with a note; fewer than three
/// distinct m afterwards throws NumericalError.
SlopeFit fit_slope(const std::vector<ReportRow>& rows);

struct RunResult {
  ExperimentConfig config;
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;
  double total_ms = 0.0;
};

RunResult run_experiment(const ExperimentConfig& config);

/// Rows with verdict `violated`.
std::size_t count_violations(const std::vector<ReportRow>& rows);

}  // namespace redlab
