#include "redlab/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "redlab/embeddings.hpp"
#include "redlab/model_io.hpp"
#include "scenarios.hpp"

namespace redlab {

using nlohmann::json;

namespace {

const std::vector<std::pair<Scenario, std::string>>& scenario_table() {
  static const std::vector<std::pair<Scenario, std::string>> table = {
      {Scenario::landmark_sweep, "landmark-sweep"},     {Scenario::direct_sweep, "direct-sweep"},
      {Scenario::factorize_exact, "factorize-exact"},   {Scenario::error_propagation, "error-propagation"},
      {Scenario::transfer, "transfer"},                 {Scenario::closed_forms, "closed-forms"},
      {Scenario::mi_check, "mi-check"},
  };
  return table;
}

const std::vector<std::size_t> kDefaultGrid = {16, 64, 256, 1024, 4096};

std::vector<std::string> with_random(std::vector<std::string> names, std::size_t count) {
  for (std::size_t i = 1; i <= count; ++i) names.push_back("random:" + std::to_string(i));
  return names;
}

double parse_number(const std::string& text, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw ConfigError(field + ": '" + text + "' is not a number");
  return v;
}

template <class T>
T get_field(const json& doc, const std::string& name) {
  try {
    return doc.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

}  // namespace

std::string to_string(Scenario s) {
  for (const auto& [k, name] : scenario_table())
    if (k == s) return name;
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  for (const auto& [k, n] : scenario_table())
    if (n == name) return k;
  throw ConfigError("scenario: unknown scenario '" + name + "'");
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& entry : scenario_table()) out.push_back(entry.second);
  return out;
}

ExperimentConfig default_config(Scenario s) {
  ExperimentConfig c;
  c.scenario = s;
  c.m_grid = kDefaultGrid;
  switch (s) {
    case Scenario::landmark_sweep:
      c.models = {"mixture3", "topic-k5"};
      break;
    case Scenario::direct_sweep:
      c.models = {"mixture3", "topic-k5", "gaussian:0.25"};
      break;
    case Scenario::factorize_exact:
      c.models = with_random({"flip01", "mixture3", "identity2", "independent"}, 20);
      c.replicates = 1;
      break;
    case Scenario::error_propagation:
      c.models = {"topic-k5", "flip01", "mixture3", "random:3", "random:4", "random:13", "gaussian"};
      c.m_grid = {256};
      c.replicates = 20;
      c.levels = {0.0, 0.05, 0.1, 0.2, 0.4};
      break;
    case Scenario::transfer:
      c.models = {"mixture3"};
      break;
    case Scenario::closed_forms:
      c.models = {"gaussian",   "gaussian:0.25",  "gaussian:0.5", "topic-k2", "topic:5:1",
                  "topic:5:0.2", "topic:20:0.05", "flip01",       "mixture3", "topic-scaling"};
      c.replicates = 10;
      break;
    case Scenario::mi_check:
      c.models = with_random({"flip01", "mixture3", "identity2", "independent"}, 20);
      c.replicates = 1;
      break;
  }
  return c;
}

ExperimentConfig config_from_json(const json& doc, std::optional<Scenario> scenario) {
  if (!doc.is_object()) throw ConfigError("config: expected an object");
  static const std::set<std::string> known = {"scenario", "models",     "sigma2", "m_grid", "replicates",
                                              "delta",    "n_mc",       "seed",   "output_dir", "levels",
                                              "shift",    "validation", "alpha_draws"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ConfigError(key + ": unknown config field");
  }
  Scenario s;
  if (doc.contains("scenario")) {
    s = scenario_from_string(get_field<std::string>(doc, "scenario"));
    if (scenario && *scenario != s) {
      throw ConfigError("scenario: config is for '" + to_string(s) + "' but '" + to_string(*scenario) +
                        "' was requested");
    }
  } else if (scenario) {
    s = *scenario;
  } else {
    throw ConfigError("scenario: missing");
  }
  ExperimentConfig c = default_config(s);
  if (doc.contains("models")) {
    const json& models = doc.at("models");
    if (!models.is_array()) throw ConfigError("models: expected an array");
    c.models.clear();
    for (const json& m : models) {
      if (m.is_string()) {
        c.models.push_back(m.get<std::string>());
      } else if (m.is_object()) {
        c.models.push_back(m.dump());
      } else {
        throw ConfigError("models: entries must be names, paths or inline model objects");
      }
    }
  }
  if (doc.contains("sigma2")) c.sigma2 = get_field<double>(doc, "sigma2");
  if (doc.contains("m_grid")) c.m_grid = get_field<std::vector<std::size_t>>(doc, "m_grid");
  if (doc.contains("replicates")) c.replicates = get_field<std::size_t>(doc, "replicates");
  if (doc.contains("delta")) c.delta = get_field<double>(doc, "delta");
  if (doc.contains("n_mc")) c.n_mc = get_field<std::size_t>(doc, "n_mc");
  if (doc.contains("validation")) c.validation = get_field<std::size_t>(doc, "validation");
  if (doc.contains("seed")) c.seed = get_field<std::uint64_t>(doc, "seed");
  if (doc.contains("output_dir")) c.output_dir = get_field<std::string>(doc, "output_dir");
  if (doc.contains("levels")) c.levels = get_field<std::vector<double>>(doc, "levels");
  if (doc.contains("shift")) c.shift = get_field<double>(doc, "shift");
  if (doc.contains("alpha_draws")) c.alpha_draws = get_field<std::size_t>(doc, "alpha_draws");
  validate_config(c);
  return c;
}

ExperimentConfig config_from_file(const std::string& path, std::optional<Scenario> scenario) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return config_from_json(doc, scenario);
}

json config_to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) {
    if (!m.empty() && m.front() == '{') {
      models.push_back(json::parse(m));
    } else {
      models.push_back(m);
    }
  }
  return {{"scenario", to_string(c.scenario)}, {"models", models},         {"sigma2", c.sigma2},
          {"m_grid", c.m_grid},               {"replicates", c.replicates}, {"delta", c.delta},
          {"n_mc", c.n_mc},                   {"validation", c.validation}, {"seed", c.seed},
          {"output_dir", c.output_dir},       {"levels", c.levels},         {"shift", c.shift},
          {"alpha_draws", c.alpha_draws}};
}

void validate_config(const ExperimentConfig& c) {
  if (c.models.empty()) throw ConfigError("models: at least one model is required");
  if (c.m_grid.empty()) throw ConfigError("m_grid: must not be empty");
  if (c.replicates < 1) throw ConfigError("replicates: must be at least 1");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta: must lie in (0, 1)");
  if (c.n_mc < 2) throw ConfigError("n_mc: must be at least 2");
  if (c.validation < 1) throw ConfigError("validation: must be at least 1");
  if (!(c.sigma2 > 0.0) || !std::isfinite(c.sigma2)) throw ConfigError("sigma2: must be positive");
  for (std::size_t m : c.m_grid) {
    if (m == 0) throw ConfigError("m_grid: dimensions must be positive");
  }
  const bool blocks = c.scenario == Scenario::landmark_sweep || c.scenario == Scenario::transfer ||
                      c.scenario == Scenario::error_propagation;
  if (blocks) {
    for (std::size_t m : c.m_grid) {
      try {
        block_layout(m, c.delta);
      } catch (const std::invalid_argument&) {
        throw ConfigError("m_grid: m = " + std::to_string(m) + " is smaller than log2(1/delta)");
      }
    }
  }
  if (c.scenario == Scenario::error_propagation) {
    if (c.levels.empty()) throw ConfigError("levels: must not be empty");
    for (double l : c.levels) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("levels: must be finite and non-negative");
    }
  }
  if (c.scenario == Scenario::transfer) {
    if (!std::isfinite(c.shift)) throw ConfigError("shift: must be finite");
    if (c.alpha_draws < 1) throw ConfigError("alpha_draws: must be at least 1");
  }
}

ModelPtr model_from_token(const std::string& token, double sigma2) {
  if (token.empty()) throw ConfigError("models: empty model name");
  if (token.front() == '{') return model_from_text(token);
  const auto colon = token.find(':');
  if (colon == std::string::npos) {
    const auto names = builtin_model_names();
    if (std::find(names.begin(), names.end(), token) != names.end()) return builtin_model(token, sigma2);
    if (!std::filesystem::exists(token)) {
      std::string known;
      for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
      throw ConfigError("models: '" + token + "' is neither a builtin model (" + known + ") nor a file");
    }
    return model_from_file(token);
  }
  const std::string head = token.substr(0, colon);
  const std::string rest = token.substr(colon + 1);
  if (head == "gaussian") {
    const double s2 = parse_number(rest, "models");
    const auto problems = GaussianModel::validate(s2);
    if (!problems.empty()) throw ModelError(problems);
    return builtin_model("gaussian", s2);
  }
  if (head == "topic") {
    const auto second = rest.find(':');
    if (second == std::string::npos) throw ConfigError("models: expected topic:<K>:<alpha>, got '" + token + "'");
    const double k = parse_number(rest.substr(0, second), "models");
    const double alpha = parse_number(rest.substr(second + 1), "models");
    if (k < 1 || k != std::floor(k)) throw ConfigError("models: topic count must be a positive integer");
    return std::make_shared<TopicModel>(uniform_topic_spec(static_cast<std::size_t>(k), alpha, 3));
  }
  if (head == "random") {
    const double seed = parse_number(rest, "models");
    if (seed < 0 || seed != std::floor(seed)) throw ConfigError("models: random seed must be a non-negative integer");
    return std::make_shared<DiscreteHiddenModel>(
        random_discrete_spec(static_cast<std::uint64_t>(seed), 5, 12, 12));
  }
  return model_from_file(token);
}

bool row_less(const ReportRow& a, const ReportRow& b) {
  return std::tie(a.scenario, a.model_id, a.m, a.replicate) < std::tie(b.scenario, b.model_id, b.m, b.replicate);
}

SlopeFit fit_slope(const std::vector<ReportRow>& rows) {
  SlopeFit out;
  std::map<std::size_t, std::vector<double>> by_m;
  std::size_t dropped = 0;
  for (const auto& r : rows) {
    if (r.replicate < 0) continue;
    if (!(r.measured_risk > 0.0) || !std::isfinite(r.measured_risk) || r.m == 0) {
      ++dropped;
      continue;
    }
    by_m[r.m].push_back(r.measured_risk);
  }
  if (dropped > 0) out.notes.push_back(std::to_string(dropped) + " non-positive risk values excluded from the fit");
  if (by_m.size() < 3) {
    throw NumericalError("fit_slope: need at least 3 distinct m with positive risk, have " +
                         std::to_string(by_m.size()));
  }
  std::vector<double> lx, ly;
  for (auto& [m, values] : by_m) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    lx.push_back(std::log(static_cast<double>(m)));
    ly.push_back(std::log(median));
  }
  const LineFit line = fit_line(lx, ly);
  out.slope = line.slope;
  out.intercept = line.intercept;
  out.r2 = line.r2;
  out.points = lx.size();
  return out;
}

std::size_t count_violations(const std::vector<ReportRow>& rows) {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const ReportRow& r) { return r.verdict == Verdict::violated; }));
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ReportRow aggregate_row(const ExperimentConfig& config, const detail::AggregateKey& key,
                        const std::vector<const ReportRow*>& group) {
  ReportRow row;
  row.scenario = to_string(config.scenario);
  row.model_id = key.model_id;
  row.m = key.m;
  row.replicate = -1;
  row.seed = config.seed;
  std::vector<double> risks, bounds, eps;
  std::size_t inside = 0;
  bool unbounded = false;
  for (const ReportRow* r : group) {
    risks.push_back(r->measured_risk);
    eps.push_back(r->eps_opt);
    if (r->bound_value) {
      bounds.push_back(*r->bound_value);
    } else {
      unbounded = true;
    }
    if (r->verdict == Verdict::holds) ++inside;
  }
  row.eps_opt = median_of(eps);
  if (!unbounded && !bounds.empty()) row.bound_value = median_of(bounds);
  if (key.rule == detail::AggregateRule::mean) {
    const Estimate mean = mean_estimate(risks);
    row.measured_risk = mean.value;
    row.se = mean.se;
    row.verdict = judge_upper(mean.value, mean.se, row.bound_value);
  } else {
    row.measured_risk = median_of(risks);
    const double fraction = static_cast<double>(inside) / static_cast<double>(group.size());
    row.verdict = unbounded ? Verdict::not_applicable
                            : (fraction >= 1.0 - config.delta ? Verdict::holds : Verdict::violated);
  }
  return row;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();

  std::vector<detail::LoadedModel> models;
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    const std::string& token = config.models[i];
    if (token == "topic-scaling") {
      if (config.scenario != Scenario::closed_forms) {
        throw ConfigError("models[" + std::to_string(i) + "]: topic-scaling is only meaningful for closed-forms");
      }
      models.push_back({token, nullptr});
      continue;
    }
    try {
      models.push_back({token, model_from_token(token, config.sigma2)});
    } catch (const ModelError& e) {
      throw ConfigError("models[" + std::to_string(i) + "]: " + e.what());
    }
  }

  std::set<std::string> ids;
  for (const auto& lm : models) {
    const std::string id = lm.model ? lm.model->id() : lm.token;
    if (!ids.insert(id).second) throw ConfigError("models: duplicate model id '" + id + "'");
  }

  detail::Plan plan = detail::plan_scenario(config, models);
  std::vector<detail::TaskOutput> outputs(plan.tasks.size());
  parallel_for(plan.tasks.size(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    outputs[i] = plan.tasks[i]();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    for (auto& row : outputs[i].rows) row.wall_time_ms = ms;
  });

  RunResult result;
  result.config = config;
  for (auto& out : outputs) {
    for (auto& row : out.rows) result.rows.push_back(std::move(row));
    for (auto& note : out.notes) result.notes.push_back(std::move(note));
  }
  for (const auto& key : plan.aggregates) {
    std::vector<const ReportRow*> group;
    for (const auto& r : result.rows) {
      if (r.replicate >= 0 && r.model_id == key.model_id && r.m == key.m) group.push_back(&r);
    }
    if (!group.empty()) result.rows.push_back(aggregate_row(config, key, group));
  }
  std::sort(result.rows.begin(), result.rows.end(), row_less);
  result.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace redlab
