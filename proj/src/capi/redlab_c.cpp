#include "redlab/redlab.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <variant>

#include "redlab/bounds.hpp"
#include "redlab/downstream.hpp"
#include "redlab/experiments.hpp"
#include "redlab/model_io.hpp"
#include "redlab/report.hpp"
#include "redlab/serialization.hpp"

using namespace redlab;

struct redlab_model {
  ModelPtr model;
};

struct redlab_scorer {
  PairScorer scorer;
};

struct redlab_embedding {
  std::variant<LandmarkEmbedding, FactorizedEmbedding> emb;
  const Embedding& base() const {
    return std::visit([](const auto& e) -> const Embedding& { return e; }, emb);
  }
};

struct redlab_config {
  ExperimentConfig config;
};

struct redlab_run {
  RunResult result;
};

namespace {

thread_local std::string last_error;

redlab_status fail(redlab_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <class F>
redlab_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return REDLAB_OK;
  } catch (const ModelError& e) {
    std::string msg = e.what();
    for (const auto& v : e.violations) msg += "\n  " + v.field + ": " + v.message;
    return fail(REDLAB_MODEL_INVALID, msg);
  } catch (const DomainError& e) {
    return fail(REDLAB_DOMAIN_ERROR, e.what());
  } catch (const UnsupportedModel& e) {
    return fail(REDLAB_UNSUPPORTED, e.what());
  } catch (const NumericalError& e) {
    return fail(REDLAB_NUMERICAL_ERROR, e.what());
  } catch (const ConfigError& e) {
    return fail(REDLAB_CONFIG_ERROR, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(REDLAB_CONFIG_ERROR, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(REDLAB_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(REDLAB_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(REDLAB_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(REDLAB_INTERNAL_ERROR, "unknown exception");
  }
}

template <class... P>
void require(const char* fn, const P*... ptrs) {
  if (((ptrs == nullptr) || ...)) throw std::invalid_argument(std::string(fn) + ": null argument");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Scale scale_of(redlab_scale s) {
  if (s == REDLAB_LOG_ODDS) return Scale::log_odds;
  if (s == REDLAB_ODDS) return Scale::odds;
  throw std::invalid_argument("unknown scale");
}

std::optional<double> cap_of(double g_max) {
  if (g_max < 0.0) return std::nullopt;
  return g_max;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return out;
}

std::uint64_t count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + v + "' is out of range");
  }
}

}  // namespace

extern "C" {

const char* redlab_version(void) { return "1.0.0"; }

const char* redlab_last_error(void) { return last_error.c_str(); }

const char* redlab_status_name(redlab_status status) {
  switch (status) {
    case REDLAB_OK: return "ok";
    case REDLAB_INVALID_ARGUMENT: return "invalid_argument";
    case REDLAB_DOMAIN_ERROR: return "domain_error";
    case REDLAB_UNSUPPORTED: return "unsupported";
    case REDLAB_NUMERICAL_ERROR: return "numerical_error";
    case REDLAB_CONFIG_ERROR: return "config_error";
    case REDLAB_MODEL_INVALID: return "model_invalid";
    case REDLAB_INTERNAL_ERROR: return "internal_error";
  }
  return "unknown";
}

void redlab_string_free(char* s) { std::free(s); }

// ---- models ---------------------------------------------------------------

redlab_status redlab_model_load(const char* token, double sigma2, redlab_model** out) {
  return guarded([&] {
    require("redlab_model_load", token, out);
    *out = new redlab_model{model_from_token(token, sigma2)};
  });
}

redlab_status redlab_model_from_json(const char* text, redlab_model** out) {
  return guarded([&] {
    require("redlab_model_from_json", text, out);
    *out = new redlab_model{model_from_text(text)};
  });
}

void redlab_model_free(redlab_model* model) { delete model; }

redlab_status redlab_model_builtin_names(char** out) {
  return guarded([&] {
    require("redlab_model_builtin_names", out);
    std::string s;
    for (const auto& n : builtin_model_names()) s += n + "\n";
    *out = dup(s);
  });
}

redlab_status redlab_model_validate_json(const char* text, char** out) {
  return guarded([&] {
    require("redlab_model_validate_json", text, out);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : validate_model_text(text)) {
      arr.push_back({{"field", v.field}, {"message", v.message}, {"slack", v.slack}});
    }
    *out = dup(arr.dump(2));
  });
}

redlab_status redlab_model_to_json(const redlab_model* model, char** out) {
  return guarded([&] {
    require("redlab_model_to_json", model, out);
    *out = dup(model_to_json(*model->model).dump(2));
  });
}

redlab_status redlab_model_id(const redlab_model* model, char** out) {
  return guarded([&] {
    require("redlab_model_id", model, out);
    *out = dup(model->model->id());
  });
}

redlab_status redlab_model_odds(const redlab_model* model, double x, double z, double* out) {
  return guarded([&] {
    require("redlab_model_odds", model, out);
    *out = model->model->odds(x, z);
  });
}

redlab_status redlab_model_log_odds(const redlab_model* model, double x, double z, double* out) {
  return guarded([&] {
    require("redlab_model_log_odds", model, out);
    *out = model->model->log_odds(x, z);
  });
}

redlab_status redlab_model_mu(const redlab_model* model, double x, double* out) {
  return guarded([&] {
    require("redlab_model_mu", model, out);
    *out = model->model->mu(x);
  });
}

redlab_status redlab_model_cond_mean_z(const redlab_model* model, double z, double* out) {
  return guarded([&] {
    require("redlab_model_cond_mean_z", model, out);
    *out = model->model->cond_mean_y_given_z(z);
  });
}

redlab_status redlab_model_cond_mean_xz(const redlab_model* model, double x, double z, double* out) {
  return guarded([&] {
    require("redlab_model_cond_mean_xz", model, out);
    *out = model->model->cond_mean_y_given_xz(x, z);
  });
}

redlab_status redlab_model_redundancy(const redlab_model* model, double* eps_x, double* eps_z, double* eps_mu) {
  return guarded([&] {
    require("redlab_model_redundancy", model, eps_x, eps_z, eps_mu);
    const Redundancy r = redundancy(*model->model);
    *eps_x = r.eps_x;
    *eps_z = r.eps_z;
    *eps_mu = r.eps_mu;
  });
}

redlab_status redlab_model_sample(const redlab_model* model, size_t n, uint64_t seed, double* rows) {
  return guarded([&] {
    require("redlab_model_sample", model, rows);
    if (n == 0) throw std::invalid_argument("redlab_model_sample: n must be at least 1");
    const Dataset d = model->model->sample(n, seed);
    for (std::size_t i = 0; i < n; ++i) {
      rows[3 * i] = d.rows[i].x;
      rows[3 * i + 1] = d.rows[i].z;
      rows[3 * i + 2] = d.rows[i].y;
    }
  });
}

// ---- scorers and embeddings -------------------------------------------------

redlab_status redlab_scorer_oracle(const redlab_model* model, redlab_scale scale, redlab_scorer** out) {
  return guarded([&] {
    require("redlab_scorer_oracle", model, out);
    *out = new redlab_scorer{PairScorer::oracle(model->model, scale_of(scale))};
  });
}

redlab_status redlab_scorer_table(const double* values, size_t rows, size_t cols, redlab_scale scale,
                                  redlab_scorer** out) {
  return guarded([&] {
    require("redlab_scorer_table", values, out);
    if (rows == 0 || cols == 0) throw std::invalid_argument("redlab_scorer_table: empty table");
    Eigen::MatrixXd t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
    *out = new redlab_scorer{PairScorer::table(std::move(t), scale_of(scale))};
  });
}

redlab_status redlab_scorer_from_json(const char* text, const redlab_model* model, redlab_scorer** out) {
  return guarded([&] {
    require("redlab_scorer_from_json", text, out);
    *out = new redlab_scorer{scorer_from_json(nlohmann::json::parse(text), model ? model->model : nullptr)};
  });
}

redlab_status redlab_scorer_to_json(const redlab_scorer* scorer, char** out) {
  return guarded([&] {
    require("redlab_scorer_to_json", scorer, out);
    *out = dup(scorer_to_json(scorer->scorer).dump(2));
  });
}

redlab_status redlab_scorer_eval(const redlab_scorer* scorer, double x, double z, double* out) {
  return guarded([&] {
    require("redlab_scorer_eval", scorer, out);
    *out = scorer->scorer(x, z);
  });
}

void redlab_scorer_free(redlab_scorer* scorer) { delete scorer; }

redlab_status redlab_embedding_landmark(const redlab_model* model, const redlab_scorer* scorer, size_t m,
                                        uint64_t seed, redlab_embedding** out) {
  return guarded([&] {
    require("redlab_embedding_landmark", model, scorer, out);
    *out = new redlab_embedding{
        LandmarkEmbedding(draw_landmarks(*model->model, m, seed), scorer->scorer, "p_Z", seed)};
  });
}

redlab_status redlab_embedding_exact(const redlab_model* model, redlab_embedding** out) {
  return guarded([&] {
    require("redlab_embedding_exact", model, out);
    *out = new redlab_embedding{exact_factorization(*model->model)};
  });
}

redlab_status redlab_embedding_probabilistic(const redlab_model* model, size_t m, uint64_t seed,
                                             redlab_embedding** out) {
  return guarded([&] {
    require("redlab_embedding_probabilistic", model, out);
    if (m == 0) throw std::invalid_argument("redlab_embedding_probabilistic: m must be at least 1");
    *out = new redlab_embedding{probabilistic_embed(model->model, m, seed)};
  });
}

redlab_status redlab_embedding_from_json(const char* text, const redlab_model* model, redlab_embedding** out) {
  return guarded([&] {
    require("redlab_embedding_from_json", text, out);
    const auto doc = nlohmann::json::parse(text);
    const ModelPtr mp = model ? model->model : nullptr;
    if (doc.value("kind", "") == "landmark") {
      *out = new redlab_embedding{landmark_embedding_from_json(doc, mp)};
    } else {
      *out = new redlab_embedding{factorized_embedding_from_json(doc, mp)};
    }
  });
}

redlab_status redlab_embedding_to_json(const redlab_embedding* emb, char** out) {
  return guarded([&] {
    require("redlab_embedding_to_json", emb, out);
    *out = dup(std::visit([](const auto& e) { return embedding_to_json(e).dump(2); }, emb->emb));
  });
}

redlab_status redlab_embedding_dim(const redlab_embedding* emb, size_t* out) {
  return guarded([&] {
    require("redlab_embedding_dim", emb, out);
    *out = emb->base().dim();
  });
}

redlab_status redlab_embedding_embed(const redlab_embedding* emb, double x, double* out) {
  return guarded([&] {
    require("redlab_embedding_embed", emb, out);
    const Eigen::VectorXd v = emb->base().embed(x);
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i);
  });
}

redlab_status redlab_embedding_risk(const redlab_embedding* emb, const redlab_model* model, size_t n_eval,
                                    uint64_t seed, double* risk, double* se) {
  return guarded([&] {
    require("redlab_embedding_risk", emb, model, risk, se);
    const RiskReport r = infimum_risk(emb->base(), *model->model, n_eval, seed);
    *risk = r.risk;
    *se = r.risk_se;
  });
}

void redlab_embedding_free(redlab_embedding* emb) { delete emb; }

// ---- bound formulas ---------------------------------------------------------

redlab_status redlab_mu_gap_bound(double eps_x, double eps_z, double* out) {
  return guarded([&] {
    require("redlab_mu_gap_bound", out);
    *out = mu_gap_bound(eps_x, eps_z);
  });
}

redlab_status redlab_landmark_block_bound(double variance, size_t m, double delta, double* out) {
  return guarded([&] {
    require("redlab_landmark_block_bound", out);
    *out = landmark_block_bound(variance, m, delta);
  });
}

redlab_status redlab_landmark_risk_bound(double eps_mu, double eps_lm, double* out) {
  return guarded([&] {
    require("redlab_landmark_risk_bound", out);
    *out = landmark_risk_bound(eps_mu, eps_lm);
  });
}

redlab_status redlab_learned_landmark_bound(double eps_lm, double eps_opt, double g_max, double* out,
                                            int* available) {
  return guarded([&] {
    require("redlab_learned_landmark_bound", out, available);
    const auto b = learned_landmark_bound(eps_lm, eps_opt, cap_of(g_max));
    *available = b.has_value();
    *out = b.value_or(0.0);
  });
}

redlab_status redlab_direct_risk_bound(double ey2, double g_max, double eps_opt, double* out, int* available) {
  return guarded([&] {
    require("redlab_direct_risk_bound", out, available);
    const auto b = direct_risk_bound(ey2, cap_of(g_max), eps_opt);
    *available = b.has_value();
    *out = b.value_or(0.0);
  });
}

redlab_status redlab_gaussian_closed_forms(double sigma2, double* second_moment, double* direct_moment,
                                          int* direct_available) {
  return guarded([&] {
    require("redlab_gaussian_closed_forms", second_moment, direct_moment, direct_available);
    if (!(sigma2 > 0.0)) throw std::invalid_argument("redlab_gaussian_closed_forms: sigma2 must be positive");
    const GaussianClosedForms cf = gaussian_closed_forms(sigma2);
    *second_moment = cf.second_moment_gstar;
    *direct_available = cf.direct_moment.has_value();
    *direct_moment = cf.direct_moment.value_or(0.0);
  });
}

redlab_status redlab_topic_closed_forms(size_t k, double alpha, double* second_moment, double* fourth_moment) {
  return guarded([&] {
    require("redlab_topic_closed_forms", second_moment, fourth_moment);
    if (k == 0 || !(alpha > 0.0)) throw std::invalid_argument("redlab_topic_closed_forms: need K >= 1, alpha > 0");
    const TopicClosedForms cf = topic_closed_forms(k, alpha);
    *second_moment = cf.second_moment_gstar;
    *fourth_moment = cf.fourth_moment_quantity;
  });
}

// ---- experiments ------------------------------------------------------------

redlab_status redlab_scenario_names(char** out) {
  return guarded([&] {
    require("redlab_scenario_names", out);
    std::string s;
    for (const auto& n : scenario_names()) s += n + "\n";
    *out = dup(s);
  });
}

redlab_status redlab_config_default(const char* scenario, redlab_config** out) {
  return guarded([&] {
    require("redlab_config_default", scenario, out);
    *out = new redlab_config{default_config(scenario_from_string(scenario))};
  });
}

redlab_status redlab_config_from_file(const char* path, const char* scenario, redlab_config** out) {
  return guarded([&] {
    require("redlab_config_from_file", path, out);
    std::optional<Scenario> s;
    if (scenario) s = scenario_from_string(scenario);
    *out = new redlab_config{config_from_file(path, s)};
  });
}

redlab_status redlab_config_set(redlab_config* config, const char* key, const char* value) {
  return guarded([&] {
    require("redlab_config_set", config, key, value);
    ExperimentConfig& c = config->config;
    const std::string k = key, v = value;
    if (k == "models") {
      c.models = split(v, ',');
    } else if (k == "sigma2") {
      c.sigma2 = number(k, v);
    } else if (k == "m") {
      c.m_grid.clear();
      for (const auto& part : split(v, ',')) c.m_grid.push_back(count(k, part));
    } else if (k == "replicates") {
      c.replicates = count(k, v);
    } else if (k == "delta") {
      c.delta = number(k, v);
    } else if (k == "n_mc") {
      c.n_mc = count(k, v);
    } else if (k == "validation") {
      c.validation = count(k, v);
    } else if (k == "seed") {
      c.seed = count(k, v);
    } else if (k == "out") {
      c.output_dir = v;
    } else if (k == "levels") {
      c.levels.clear();
      for (const auto& part : split(v, ',')) c.levels.push_back(number(k, part));
    } else if (k == "shift") {
      c.shift = number(k, v);
    } else if (k == "alpha_draws") {
      c.alpha_draws = count(k, v);
    } else {
      throw ConfigError(k + ": unknown config key");
    }
    validate_config(c);
  });
}

redlab_status redlab_config_output_dir(const redlab_config* config, char** out) {
  return guarded([&] {
    require("redlab_config_output_dir", config, out);
    *out = dup(config->config.output_dir);
  });
}

redlab_status redlab_config_to_json(const redlab_config* config, char** out) {
  return guarded([&] {
    require("redlab_config_to_json", config, out);
    *out = dup(config_to_json(config->config).dump(2));
  });
}

void redlab_config_free(redlab_config* config) { delete config; }

redlab_status redlab_run_experiment(const redlab_config* config, redlab_run** out) {
  return guarded([&] {
    require("redlab_run_experiment", config, out);
    *out = new redlab_run{run_experiment(config->config)};
  });
}

redlab_status redlab_run_row_count(const redlab_run* run, size_t* out) {
  return guarded([&] {
    require("redlab_run_row_count", run, out);
    *out = run->result.rows.size();
  });
}

redlab_status redlab_run_violations(const redlab_run* run, size_t* out) {
  return guarded([&] {
    require("redlab_run_violations", run, out);
    *out = count_violations(run->result.rows);
  });
}

redlab_status redlab_run_csv(const redlab_run* run, int timing, char** out) {
  return guarded([&] {
    require("redlab_run_csv", run, out);
    *out = dup(rows_to_csv(run->result.rows, timing != 0));
  });
}

redlab_status redlab_run_json(const redlab_run* run, int timing, char** out) {
  return guarded([&] {
    require("redlab_run_json", run, out);
    *out = dup(rows_to_json(run->result.rows, timing != 0).dump(2));
  });
}

redlab_status redlab_run_summary(const redlab_run* run, int timing, char** out) {
  return guarded([&] {
    require("redlab_run_summary", run, out);
    *out = dup(summary_text(run->result, timing != 0));
  });
}

redlab_status redlab_run_write(const redlab_run* run, const char* dir, int timing) {
  return guarded([&] {
    require("redlab_run_write", run, dir);
    write_outputs(run->result, dir, timing != 0);
  });
}

void redlab_run_free(redlab_run* run) { delete run; }

redlab_status redlab_plot_csv(const char* csv_text, const char* scenario, char** out) {
  return guarded([&] {
    require("redlab_plot_csv", csv_text, scenario, out);
    *out = dup(render_svg(rows_from_csv(csv_text), scenario));
  });
}

redlab_status redlab_fit_slope_csv(const char* csv_text, const char* scenario, const char* model_id, double* slope,
                                   double* intercept, double* r2) {
  return guarded([&] {
    require("redlab_fit_slope_csv", csv_text, scenario, model_id, slope, intercept, r2);
    std::vector<ReportRow> rows;
    for (auto& r : rows_from_csv(csv_text)) {
      if (r.scenario == scenario && r.model_id == model_id) rows.push_back(std::move(r));
    }
    const SlopeFit fit = fit_slope(rows);
    *slope = fit.slope;
    *intercept = fit.intercept;
    *r2 = fit.r2;
  });
}

}  // extern "C"
