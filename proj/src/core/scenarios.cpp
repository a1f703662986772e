#include "scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "redlab/bounds.hpp"
#include "redlab/contrastive.hpp"
#include "redlab/downstream.hpp"
#include "redlab/embeddings.hpp"

namespace redlab::detail {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string level_tag(double level) {
  std::ostringstream os;
  os << level;
  return os.str();
}

ReportRow base_row(const ExperimentConfig& c, const std::string& model_id, std::size_t m, long replicate) {
  ReportRow r;
  r.scenario = to_string(c.scenario);
  r.model_id = model_id;
  r.m = m;
  r.replicate = replicate;
  r.seed = row_seed(c.seed, model_id, m, replicate);
  return r;
}

ReportRow not_applicable_row(const ExperimentConfig& c, const std::string& model_id, std::size_t m) {
  ReportRow r = base_row(c, model_id, m, 0);
  r.measured_risk = std::nan("");
  r.verdict = Verdict::not_applicable;
  return r;
}

/// holds inside the bound, exceeded outside: for guarantees that only hold
/// with probability 1 - delta per replicate.
Verdict coverage_verdict(double value, double se, const std::optional<double>& bound) {
  const Verdict v = judge_upper(value, se, bound);
  return v == Verdict::violated ? Verdict::exceeded : v;
}

Verdict exact_upper(double value, double bound) {
  return value <= bound + 1e-12 ? Verdict::holds : Verdict::violated;
}

// ---------------------------------------------------------------------------

void plan_landmark_sweep(const ExperimentConfig& c, const LoadedModel& lm, Plan& plan) {
  const ModelPtr model = lm.model;
  const std::string id = model->id();
  // Model-level quantities are shared by every task of this model.
  auto variance = std::make_shared<Estimate>(landmark_variance(*model, c.n_mc, row_seed(c.seed, id, 0, -2)));
  auto eps_mu = std::make_shared<std::optional<double>>();
  std::string mu_note;
  try {
    *eps_mu = redundancy(*model).eps_mu;
  } catch (const NumericalError& e) {
    mu_note = id + ": redundancy unavailable (" + e.what() + "); composed check skipped";
  }
  if (!mu_note.empty()) {
    plan.tasks.push_back([mu_note] { return TaskOutput{{}, {mu_note}}; });
  }
  for (std::size_t m : c.m_grid) {
    plan.aggregates.push_back({id, m, AggregateRule::coverage});
    for (std::size_t r = 0; r < c.replicates; ++r) {
      plan.tasks.push_back([=, &c] {
        TaskOutput out;
        ReportRow row = base_row(c, id, m, static_cast<long>(r));
        const LandmarkEmbedding emb(draw_landmarks(*model, m, row.seed), PairScorer::oracle(model, Scale::odds),
                                    "p_Z", row.seed);
        const BlockChoice choice =
            oracle_landmark_weights(*model, emb, c.delta, c.validation, derive_seed(row.seed, 1));
        const RiskReport risk = risk_R(emb, choice.weights.w, *model, c.n_mc, derive_seed(row.seed, 2));
        const double bound = landmark_block_bound(variance->value, m, c.delta);
        row.measured_risk = risk.risk;
        row.se = risk.risk_se;
        row.bound_value = bound;
        row.verdict = coverage_verdict(risk.risk, risk.risk_se, bound);
        // On the event that the block bound holds, the composed bound is
        // deterministic, so a miss there is a real violation.
        if (row.verdict == Verdict::holds && eps_mu->has_value()) {
          const double composed = landmark_risk_bound(**eps_mu, bound);
          if (judge_upper(risk.mse_vs_bayes, risk.mse_se, composed) == Verdict::violated) {
            row.verdict = Verdict::violated;
            std::ostringstream note;
            note << id << " m=" << m << " replicate " << r << ": composed bound " << composed
                 << " below E[(w.phi - E[Y|X,Z])^2] = " << risk.mse_vs_bayes;
            out.notes.push_back(note.str());
          }
        }
        out.rows.push_back(row);
        return out;
      });
    }
  }
}

void plan_direct_sweep(const ExperimentConfig& c, const LoadedModel& lm, Plan& plan) {
  const ModelPtr model = lm.model;
  const std::string id = model->id();
  const std::optional<double> variance = hidden_factor_variance(*model);
  if (!variance) {
    plan.tasks.push_back([=, &c] {
      TaskOutput out;
      for (std::size_t m : c.m_grid) out.rows.push_back(not_applicable_row(c, id, m));
      out.notes.push_back(id + ": hidden-factor variance is infinite, direct sweep not applicable");
      return out;
    });
    return;
  }
  for (std::size_t m : c.m_grid) {
    plan.aggregates.push_back({id, m, AggregateRule::mean});
    for (std::size_t r = 0; r < c.replicates; ++r) {
      plan.tasks.push_back([=, &c] {
        ReportRow row = base_row(c, id, m, static_cast<long>(r));
        const FactorizedEmbedding emb = probabilistic_embed(model, m, row.seed);
        const Estimate err = eps_direct(emb, *model, 0, 0);
        const double bound = *variance / static_cast<double>(m);
        row.measured_risk = err.value;
        row.se = err.se;
        row.bound_value = bound;
        row.verdict = coverage_verdict(err.value, err.se, bound);
        return TaskOutput{{row}, {}};
      });
    }
  }
}

void plan_factorize_exact(const ExperimentConfig& c, const LoadedModel& lm, Plan& plan) {
  const ModelPtr model = lm.model;
  plan.tasks.push_back([=, &c] {
    const std::string id = model->id();
    if (!model->discrete()) {
      return TaskOutput{{not_applicable_row(c, id, 0)}, {id + ": exact factorization needs a discrete hidden model"}};
    }
    const DiscreteHiddenModel& d = *model->discrete();
    TaskOutput out;
    ReportRow row = base_row(c, id, d.num_hidden(), 0);
    const FactorizedEmbedding emb = exact_factorization(*model);
    const WeightVector w = exact_linear_weights(*model, emb);
    const double table_err =
        (emb.eta_table() * emb.psi_table().transpose() - d.odds_table()).cwiseAbs().maxCoeff();
    const double mu_err = (emb.eta_table() * w.w - d.mu_table()).cwiseAbs().maxCoeff();
    const RiskReport risk = risk_R(emb, w.w, *model);
    row.measured_risk = risk.risk;
    row.bound_value = 0.0;
    try {
      row.eps_opt = *excess_losses(PairScorer::factorized(emb.eta_table(), emb.psi_table()), *model).direct;
    } catch (const NumericalError&) {
      row.eps_opt = std::nan("");
      out.notes.push_back(id + ": g* vanishes on part of the grid, excess loss undefined");
    }
    const bool ok = risk.risk < 1e-10 && table_err <= 1e-10 && mu_err <= 1e-10;
    row.verdict = ok ? Verdict::holds : Verdict::violated;
    std::ostringstream note;
    note << id << ": max|eta.psi - g*| = " << table_err << ", max|w.eta - mu| = " << mu_err;
    out.notes.push_back(note.str());
    out.rows.push_back(row);
    return out;
  });
}

Eigen::MatrixXd perturbed_log_odds(const FiniteModel& f, double level, double cap, std::uint64_t seed) {
  Eigen::MatrixXd t = f.odds_table().array().log().matrix();
  Rng rng(seed, 0);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = std::min(t(i, j) + level * rng.normal(), std::log(cap));
  return t;
}

void plan_error_propagation(const ExperimentConfig& c, const LoadedModel& lm, Plan& plan) {
  const ModelPtr model = lm.model;
  const std::string id = model->id();
  const std::optional<double> gmax = g_max(*model);
  if (!gmax || !model->finite()) {
    plan.tasks.push_back([=, &c] {
      TaskOutput out;
      for (double level : c.levels) {
        for (std::size_t m : c.m_grid) out.rows.push_back(not_applicable_row(c, id + "|lm=" + level_tag(level), m));
      }
      out.rows.push_back(not_applicable_row(c, id + "|direct", 0));
      out.notes.push_back(id + ": g* is unbounded, learned-scorer bounds not applicable");
      return out;
    });
    return;
  }
  const double variance = landmark_variance(*model).value;
  for (double level : c.levels) {
    const std::string vid = id + "|lm=" + level_tag(level);
    for (std::size_t m : c.m_grid) {
      plan.aggregates.push_back({vid, m, AggregateRule::coverage});
      for (std::size_t r = 0; r < c.replicates; ++r) {
        plan.tasks.push_back([=, &c] {
          const FiniteModel& f = *model->finite();
          ReportRow row = base_row(c, vid, m, static_cast<long>(r));
          // Scores are capped at g_max so the perturbed scorer satisfies the
          // premise sup g <= g_max.
          const PairScorer scorer =
              PairScorer::table(perturbed_log_odds(f, level, *gmax, derive_seed(row.seed, 3)), Scale::log_odds);
          const double eps_opt = std::max(0.0, *excess_losses(scorer, *model).lm);
          const LandmarkEmbedding emb(draw_landmarks(*model, m, row.seed), scorer, "p_Z", row.seed);
          const RiskReport risk = infimum_risk(emb, *model);
          const double eps_lm = landmark_block_bound(variance, m, c.delta);
          row.measured_risk = risk.risk;
          row.eps_opt = eps_opt;
          row.bound_value = learned_landmark_bound(eps_lm, eps_opt, gmax);
          row.verdict = coverage_verdict(risk.risk, 0.0, row.bound_value);
          return TaskOutput{{row}, {}};
        });
      }
    }
  }
  if (!model->discrete()) return;
  plan.tasks.push_back([=, &c] {
    const DiscreteHiddenModel& d = *model->discrete();
    TaskOutput out;
    const std::size_t m = d.num_hidden();
    ReportRow row = base_row(c, id + "|direct", m, 0);
    TrainConfig tc;
    tc.seed = row.seed;
    const DirectTrainResult trained = train_direct(d, m, tc);
    const double eps_opt = std::max(0.0, *excess_losses(trained.scorer, *model).direct);
    const FactorizedEmbedding emb = embedding_from_scorer(trained.scorer);
    const RiskReport risk = infimum_risk(emb, *model);
    // The bound needs a common cap on g* and on the trained scores.
    const double sup = (trained.scorer.eta() * trained.scorer.psi().transpose()).maxCoeff();
    const double cap = std::max(*gmax, sup);
    row.measured_risk = risk.risk;
    row.eps_opt = eps_opt;
    row.bound_value = direct_risk_bound(d.second_moment_y(), cap, eps_opt);
    row.verdict = exact_upper(risk.risk, *row.bound_value);
    std::ostringstream note;
    note << id << ": trained direct scorer, m = " << m << ", excess direct loss " << eps_opt;
    if (sup > *gmax) note << ", scores exceed g_max (" << sup << " > " << *gmax << "), bound uses the larger cap";
    if (eps_opt >= 1e-4) note << ", not realized to 1e-4";
    out.notes.push_back(note.str());
    out.rows.push_back(row);
    return out;
  });
}

void plan_transfer(const ExperimentConfig& c, const LoadedModel& lm, Plan& plan) {
  const ModelPtr model = lm.model;
  const std::string id = model->id();
  if (!model->discrete()) {
    plan.tasks.push_back([=, &c] {
      TaskOutput out;
      for (std::size_t m : c.m_grid) out.rows.push_back(not_applicable_row(c, id, m));
      out.notes.push_back(id + ": transfer needs a discrete hidden model");
      return out;
    });
    return;
  }
  const DiscreteHiddenModel& p = *model->discrete();
  std::vector<double> weight(p.num_x());
  for (std::size_t x = 0; x < weight.size(); ++x) {
    const double t = weight.size() > 1 ? static_cast<double>(x) / static_cast<double>(weight.size() - 1) : 0.0;
    weight[x] = std::exp(c.shift * t);
  }
  auto q = std::make_shared<DiscreteHiddenModel>(reweight_x(p, weight, id + "-shifted"));
  auto qz = std::make_shared<std::vector<double>>(q->pz().data(), q->pz().data() + q->pz().size());
  const double variance = transfer_variance(p, *q, *qz);
  for (std::size_t m : c.m_grid) {
    plan.aggregates.push_back({id, m, AggregateRule::coverage});
    for (std::size_t r = 0; r < c.replicates; ++r) {
      plan.tasks.push_back([=, &c] {
        ReportRow row = base_row(c, id, m, static_cast<long>(r));
        const LandmarkEmbedding emb(draw_landmarks(*qz, m, row.seed), PairScorer::oracle(model, Scale::odds), "q_Z",
                                    row.seed);
        const BlockChoice choice = transfer_landmark_weights(*model->discrete(), *q, emb, *qz, c.delta, c.validation,
                                                             derive_seed(row.seed, 1));
        const RiskReport risk = risk_R(emb, choice.weights.w, *q);
        const double bound = landmark_block_bound(variance, m, c.delta);
        row.measured_risk = risk.risk;
        row.bound_value = bound;
        row.verdict = coverage_verdict(risk.risk, 0.0, bound);
        return TaskOutput{{row}, {}};
      });
    }
  }
  plan.tasks.push_back([=, &c] {
    TaskOutput out;
    const std::string vid = id + "|variance";
    const double lhs = transfer_variance(*model->discrete(), *q, *qz);
    const double label_var = label_mean_variance(*q);
    for (std::size_t i = 0; i < c.alpha_draws; ++i) {
      ReportRow row = base_row(c, vid, 0, static_cast<long>(i));
      Rng rng(row.seed, 0);
      const std::vector<double> alpha = rng.dirichlet(1.0, q->num_z());
      row.measured_risk = lhs;
      row.bound_value = transfer_variance(*model->discrete(), *q, alpha) + label_var;
      row.verdict = exact_upper(lhs, *row.bound_value);
      out.rows.push_back(row);
    }
    return out;
  });
}

// ---------------------------------------------------------------------------

ReportRow equality_row(ReportRow row, const Estimate& est, double target) {
  row.measured_risk = est.value;
  row.se = est.se;
  row.bound_value = target;
  // Rounding allowance for degenerate estimates (g* constant gives se ~ 1e-19).
  const double rounding = 1e-12 * std::max(1.0, std::abs(target));
  row.verdict = judge_equal(est.value, est.se, target, est.se == 0.0 ? 1e-10 : rounding);
  return row;
}

void plan_topic_scaling(const ExperimentConfig& c, Plan& plan) {
  plan.tasks.push_back([&c] {
    TaskOutput out;
    const std::vector<std::size_t> ks = {8, 16, 32};
    for (std::size_t i = 1; i < ks.size(); ++i) {
      const double prev = topic_closed_forms(ks[i - 1], 1.0 / static_cast<double>(ks[i - 1])).fourth_moment_quantity;
      const double cur = topic_closed_forms(ks[i], 1.0 / static_cast<double>(ks[i])).fourth_moment_quantity;
      const double quad = std::pow(static_cast<double>(ks[i]) / static_cast<double>(ks[i - 1]), 2.0);
      ReportRow row = base_row(c, "topic-scaling", ks[i], 0);
      row.measured_risk = cur / prev;
      row.bound_value = quad;
      const double rel = row.measured_risk / quad;
      row.verdict = rel >= 0.5 && rel <= 2.0 ? Verdict::holds : Verdict::violated;
      out.rows.push_back(row);
    }
    return out;
  });
}

void plan_closed_forms(const ExperimentConfig& c, const LoadedModel& lm, Plan& plan) {
  if (!lm.model) {
    plan_topic_scaling(c, plan);
    return;
  }
  const ModelPtr model = lm.model;
  const std::string id = model->id();

  // Normalization of g* against p_Z, exact or by quadrature.
  plan.tasks.push_back([=, &c] {
    ReportRow row = base_row(c, id + "|normalization", 0, 0);
    double worst = 0.0;
    double tol = 1e-10;
    if (const FiniteModel* f = model->finite()) {
      worst = ((f->odds_table() * f->pz()).array() - 1.0).abs().maxCoeff();
    } else {
      const auto* g = dynamic_cast<const GaussianModel*>(model.get());
      tol = 1e-6;
      for (double x = -4.0; x <= 4.0; x += 0.5) {
        const double s =
            gaussian_expectation([&](double z) { return g->odds(x, z); }, 0.0, 1.0 + g->sigma2(), 64);
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
    row.measured_risk = worst;
    row.bound_value = tol;
    row.verdict = worst <= tol ? Verdict::holds : Verdict::violated;
    return TaskOutput{{row}, {}};
  });

  plan.tasks.push_back([=, &c] {
    ReportRow row = base_row(c, id + "|odds_mean", 0, 0);
    return TaskOutput{{equality_row(row, gstar_mean_mc(*model, c.n_mc, row.seed), 1.0)}, {}};
  });

  // Gap between mu and E[Y | X, Z], one Monte Carlo run per replicate.
  std::optional<double> eps_mu;
  try {
    const Redundancy red = redundancy(*model);
    eps_mu = mu_gap_bound(red.eps_x, red.eps_z);
  } catch (const NumericalError&) {
  }
  for (std::size_t r = 0; r < c.replicates; ++r) {
    plan.tasks.push_back([=, &c] {
      ReportRow row = base_row(c, id + "|mu_gap", 0, static_cast<long>(r));
      const Estimate gap = mu_bayes_gap_mc(*model, c.n_mc, row.seed);
      row.measured_risk = gap.value;
      row.se = gap.se;
      row.bound_value = eps_mu;
      row.verdict = judge_upper(gap.value, gap.se, eps_mu);
      return TaskOutput{{row}, {}};
    });
  }

  if (const auto* g = dynamic_cast<const GaussianModel*>(model.get())) {
    const GaussianClosedForms cf = gaussian_closed_forms(g->sigma2());
    plan.tasks.push_back([=, &c] {
      ReportRow row = base_row(c, id + "|second_moment", 0, 0);
      return TaskOutput{{equality_row(row, gstar_second_moment_mc(*model, c.n_mc, row.seed), cf.second_moment_gstar)},
                        {}};
    });
    plan.tasks.push_back([=, &c] {
      ReportRow row = base_row(c, id + "|direct_moment", 0, 0);
      if (!cf.direct_moment) {
        row.measured_risk = std::nan("");
        row.verdict = Verdict::not_applicable;
        return TaskOutput{{row}, {id + ": direct moment unavailable for sigma2 >= 1/2"}};
      }
      return TaskOutput{{equality_row(row, hidden_moment_mc(*model, c.n_mc, row.seed), *cf.direct_moment)}, {}};
    });
    return;
  }
  if (const auto* t = dynamic_cast<const TopicModel*>(model.get())) {
    const TopicClosedForms cf = topic_closed_forms(t->num_topics(), t->alpha());
    plan.tasks.push_back([=, &c] {
      ReportRow row = base_row(c, id + "|second_moment", 0, 0);
      return TaskOutput{{equality_row(row, gstar_second_moment_mc(*model, c.n_mc, row.seed), cf.second_moment_gstar)},
                        {}};
    });
    plan.tasks.push_back([=, &c] {
      ReportRow row = base_row(c, id + "|fourth_moment", 0, 0);
      return TaskOutput{
          {equality_row(row, hidden_moment_mc(*model, c.n_mc, row.seed), cf.fourth_moment_quantity)}, {}};
    });
    plan.tasks.push_back([=, &c] {
      // var(E[Y|Z1] g*) <= E[g*^2] for |Y| <= 1.
      ReportRow row = base_row(c, id + "|landmark_bridge", 0, 0);
      row.measured_risk = landmark_variance(*model).value;
      row.bound_value = cf.second_moment_gstar;
      row.verdict = exact_upper(row.measured_risk, *row.bound_value);
      return TaskOutput{{row}, {}};
    });
  }
}

void plan_mi_check(const ExperimentConfig& c, const LoadedModel& lm, Plan& plan) {
  const ModelPtr model = lm.model;
  plan.tasks.push_back([=, &c] {
    const std::string id = model->id();
    if (!model->discrete()) {
      return TaskOutput{{not_applicable_row(c, id, 0)}, {id + ": conditional mutual information needs a discrete model"}};
    }
    TaskOutput out;
    for (const BoundReport& b : mi_redundancy_check(*model)) {
      ReportRow row = base_row(c, id + "|" + b.name, 0, 0);
      row.measured_risk = b.estimate;
      row.bound_value = b.bound;
      row.verdict = b.verdict;
      out.rows.push_back(row);
    }
    return out;
  });
}

}  // namespace

std::uint64_t row_seed(std::uint64_t seed, const std::string& model_id, std::size_t m, long replicate) {
  std::uint64_t s = derive_seed(seed, fnv1a(model_id));
  s = derive_seed(s, static_cast<std::uint64_t>(m));
  return derive_seed(s, static_cast<std::uint64_t>(replicate));
}

Plan plan_scenario(const ExperimentConfig& config, const std::vector<LoadedModel>& models) {
  Plan plan;
  for (const auto& lm : models) {
    switch (config.scenario) {
      case Scenario::landmark_sweep:
        plan_landmark_sweep(config, lm, plan);
        break;
      case Scenario::direct_sweep:
        plan_direct_sweep(config, lm, plan);
        break;
      case Scenario::factorize_exact:
        plan_factorize_exact(config, lm, plan);
        break;
      case Scenario::error_propagation:
        plan_error_propagation(config, lm, plan);
        break;
      case Scenario::transfer:
        plan_transfer(config, lm, plan);
        break;
      case Scenario::closed_forms:
        plan_closed_forms(config, lm, plan);
        break;
      case Scenario::mi_check:
        plan_mi_check(config, lm, plan);
        break;
    }
  }
  return plan;
}

}  // namespace redlab::detail
