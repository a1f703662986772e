#include <gtest/gtest.h>

#include "redlab/bounds.hpp"
#include "redlab/downstream.hpp"
#include "redlab/model_io.hpp"
#include "test_oracles.hpp"

using namespace redlab;

namespace {

ModelPtr discrete(DiscreteSpec s) { return std::make_shared<DiscreteHiddenModel>(std::move(s)); }

// Objective sum_x p_x (w^T phi(x) - mu(x))^2, cell by cell.
double objective(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w, const FiniteModel& m) {
  double total = 0.0;
  for (Eigen::Index x = 0; x < phi.rows(); ++x) {
    double pred = 0.0;
    for (Eigen::Index i = 0; i < phi.cols(); ++i) pred += phi(x, i) * w(i);
    total += m.px()(x) * (pred - m.mu_table()(x)) * (pred - m.mu_table()(x));
  }
  return total;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Eigen::MatrixXd t(r, c);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

}  // namespace

TEST(FitRidge, OneDimensional) {
  Eigen::MatrixXd phi(4, 1);
  phi << 1, 2, 3, 4;
  const LinearFit fit = fit_ridge(phi, 2.0 * phi.col(0), Eigen::VectorXd(), 0.0);
  EXPECT_NEAR(fit.w(0), 2.0, 1e-12);
  EXPECT_FALSE(fit.warning.has_value());
}

TEST(FitRidge, MuFeatureGivesUnitWeight) {
  const auto m = builtin_model("mixture3");
  const auto* f = m->finite();
  const Eigen::MatrixXd phi = f->mu_table();
  const LinearFit fit = fit_ridge(phi, f->mu_table(), f->px(), 0.0);
  EXPECT_NEAR(fit.w(0), 1.0, 1e-12);
  EXPECT_LT(objective(phi, fit.w, *f), 1e-24);
}

TEST(FitRidge, DuplicateColumnsGiveMinimumNorm) {
  Eigen::MatrixXd phi(3, 2);
  phi << 1, 1, 2, 2, -1, -1;
  const LinearFit fit = fit_ridge(phi, 2.0 * phi.col(0), Eigen::VectorXd(), 0.0);
  EXPECT_NEAR(fit.w(0), 1.0, 1e-12);
  EXPECT_NEAR(fit.w(1), 1.0, 1e-12);
  EXPECT_TRUE(fit.warning.has_value());
}

TEST(FitRidge, RidgeShrinksTowardZero) {
  Eigen::MatrixXd phi(2, 1);
  phi << 1, 1;
  // (2 + lambda) w = 2 * 3
  const LinearFit fit = fit_ridge(phi, Eigen::Vector2d(3, 3), Eigen::VectorXd(), 1.0);
  EXPECT_NEAR(fit.w(0), 2.0, 1e-12);
}

TEST(FitRidge, Errors) {
  Eigen::MatrixXd phi(2, 1);
  phi << 1, 2;
  EXPECT_THROW(fit_ridge(phi, Eigen::Vector2d(1, 1), Eigen::VectorXd(), -1.0), std::invalid_argument);
  EXPECT_THROW(fit_ridge(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), Eigen::VectorXd(), 0.0), std::invalid_argument);
}

TEST(FitRidge, ExactTargetsAttainInfimum) {
  const auto m = builtin_model("topic-k5");
  const auto* f = m->finite();
  const LandmarkEmbedding emb(draw_landmarks(*m, 4, 3), PairScorer::oracle(m, Scale::odds));
  const Eigen::MatrixXd phi = feature_table(emb, f->num_x());
  const LinearFit fit = fit_oracle(emb, *m);
  const double best = objective(phi, fit.w, *f);
  Rng rng(2, 0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd dw = random_matrix(rng, 4, 1, 1e-3);
    EXPECT_GE(objective(phi, fit.w + dw, *f), best - 1e-15) << i;
  }
}

TEST(FitRidge, FromSamples) {
  const auto m = builtin_model("mixture3");
  const auto emb = exact_factorization(*m);
  const Dataset data = m->sample(20000, 5);
  const LinearFit on_mu = fit_ridge(emb, data, Target::mu_oracle, *m, 0.0);
  const WeightVector exact = exact_linear_weights(*m, emb);
  EXPECT_LT((on_mu.w - exact.w).cwiseAbs().maxCoeff(), 1e-8);
  const LinearFit on_y = fit_ridge(emb, data, Target::y_observed, *m, 0.0);
  EXPECT_EQ(on_y.target, Target::y_observed);
  EXPECT_EQ(on_y.train_count, 20000u);
  // Observed labels regress onto E[Y | X] rather than mu.
  const auto* f = m->finite();
  const LinearFit population = fit_ridge(emb.eta_table(), f->ey_x(), f->px(), 0.0);
  EXPECT_LT((on_y.w - population.w).cwiseAbs().maxCoeff(), 0.1);
}

// ---------------------------------------------------------------------------

TEST(Risk, ExactFactorizationWeightsAreExact) {
  for (const char* name : {"flip01", "mixture3", "independent"}) {
    const auto m = builtin_model(name);
    const auto emb = exact_factorization(*m);
    const RiskReport r = risk_R(emb, exact_linear_weights(*m, emb).w, *m);
    EXPECT_LT(r.risk, 1e-10) << name;
    EXPECT_TRUE(r.exact);
  }
}

TEST(Risk, BayesGapComposition) {
  Rng rng(8, 0);
  for (int seed = 0; seed < 10; ++seed) {
    const auto m = discrete(random_discrete_spec(seed, 4, 6, 6));
    const auto* f = m->finite();
    const auto emb = exact_factorization(*m);
    const Redundancy red = redundancy(*m);
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd w = random_matrix(rng, static_cast<Eigen::Index>(emb.dim()), 1);
      const RiskReport r = risk_R(emb, w, *m);
      EXPECT_LE(r.mse_vs_bayes, r.risk + red.eps_mu + 2.0 * std::sqrt(r.risk * red.eps_mu) + 1e-9);
      // mse_vs_bayes written out over (x, z)
      double mse = 0.0;
      const Eigen::VectorXd pred = emb.eta_table() * w;
      for (Eigen::Index x = 0; x < pred.size(); ++x)
        for (Eigen::Index z = 0; z < f->joint().cols(); ++z)
          mse += f->joint()(x, z) * std::pow(pred(x) - f->bayes_table()(x, z), 2);
      EXPECT_NEAR(r.mse_vs_bayes, mse, 1e-12);
    }
  }
}

TEST(Risk, ZeroEmbeddingOnSymmetricLabels) {
  DiscreteSpec s;
  s.prior = {0.5, 0.5};
  s.x_given_h.resize(2, 3);
  s.x_given_h << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
  s.z_given_h.resize(2, 2);
  s.z_given_h << 0.6, 0.4, 0.6, 0.4;
  s.label_of_h = {1.0, -1.0};
  const auto m = discrete(s);
  const FactorizedEmbedding zero(Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(2, 2));
  EXPECT_EQ(risk_R(zero, Eigen::VectorXd::Zero(2), *m).risk, 0.0);
}

TEST(Risk, InvariantUnderInvertibleMix) {
  const auto m = builtin_model("topic-k5");
  const LandmarkEmbedding emb(draw_landmarks(*m, 5, 19), PairScorer::oracle(m, Scale::odds));
  const auto* f = m->finite();
  const Eigen::MatrixXd phi = feature_table(emb, f->num_x());
  const LinearFit base = fit_ridge(phi, f->mu_table(), f->px(), 0.0);
  const double r0 = risk_R(phi, base.w, *f).risk;
  Rng rng(4, 0);
  for (int i = 0; i < 10; ++i) {
    const Eigen::MatrixXd mix = random_matrix(rng, 5, 5) + 3.0 * Eigen::MatrixXd::Identity(5, 5);
    const Eigen::MatrixXd mixed = phi * mix;
    const LinearFit fit = fit_ridge(mixed, f->mu_table(), f->px(), 0.0);
    EXPECT_NEAR(risk_R(mixed, fit.w, *f).risk, r0, 1e-8);
  }
}

TEST(Risk, GaussianMonteCarlo) {
  const auto m = builtin_model("gaussian", 0.25);
  const auto emb = probabilistic_embed(m, 8, 3);
  const WeightVector w = exact_linear_weights(*m, emb);
  const RiskReport r = risk_R(emb, w.w, *m, 20000, 1);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.n_eval, 20000u);
  EXPECT_GT(r.risk_se, 0.0);
  // Risk of the factorized weights is at most E[Y^2] eps_direct.
  const Estimate e = eps_direct(emb, *m);
  EXPECT_LE(r.risk, m->second_moment_y() * e.value + 3.0 * r.risk_se);
}

// ---------------------------------------------------------------------------

TEST(EpsDirect, ExactFactorizationIsZero) {
  for (int seed = 0; seed < 5; ++seed) {
    const auto m = discrete(random_discrete_spec(seed, 5, 8, 8));
    EXPECT_LT(eps_direct(exact_factorization(*m), *m).value, 1e-12);
  }
}

TEST(EpsDirect, OnesOnIndependenceModel) {
  const auto m = builtin_model("independent");
  const FactorizedEmbedding ones(Eigen::MatrixXd::Ones(3, 1), Eigen::MatrixXd::Ones(3, 1));
  EXPECT_LT(eps_direct(ones, *m).value, 1e-24);
}

TEST(EpsDirect, FactorizedRiskChain) {
  const auto m = builtin_model("mixture3");
  const double ey2 = m->second_moment_y();
  Rng rng(12, 0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::MatrixXd eta = random_matrix(rng, 4, 3).cwiseAbs();
    const Eigen::MatrixXd psi = random_matrix(rng, 5, 3).cwiseAbs();
    const FactorizedEmbedding emb(eta, psi);
    const Eigen::VectorXd w = exact_linear_weights(*m, emb).w;
    // both sides by explicit enumeration
    const auto* f = m->finite();
    double eps = 0.0;
    for (int x = 0; x < 4; ++x)
      for (int z = 0; z < 5; ++z)
        eps += f->px()(x) * f->pz()(z) * std::pow(eta.row(x).dot(psi.row(z)) - f->odds_table()(x, z), 2);
    EXPECT_NEAR(eps_direct(emb, *m).value, eps, 1e-12 * std::max(1.0, eps));
    EXPECT_LE(risk_R(emb, w, *m).risk, factorized_risk_bound(ey2, eps) + 1e-9) << i;
  }
}

TEST(EpsDirect, GaussianQuadratureAgainstGrid) {
  const double s2 = 0.25;
  const auto m = builtin_model("gaussian", s2);
  const auto emb = probabilistic_embed(m, 4, 9);
  // 2-D trapezoid of p_X p_Z (eta^T psi - g*)^2 from explicit densities
  auto score = [&](double x, double z) {
    double acc = 0.0;
    for (const Hidden& h : emb.hidden()) {
      acc += oracle::npdf(x, h[0], 1.0) * oracle::npdf(z, h[0], 1.0) /
             (oracle::npdf(x, 0.0, 1.0 + s2) * oracle::npdf(z, 0.0, 1.0 + s2));
    }
    return acc / 4.0;
  };
  const double lim = 14.0;
  const int n = 700;
  const double step = 2.0 * lim / n;
  double ref = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = -lim + i * step;
    for (int j = 0; j <= n; ++j) {
      const double z = -lim + j * step;
      const double w = (i == 0 || i == n ? 0.5 : 1.0) * (j == 0 || j == n ? 0.5 : 1.0);
      const double d = score(x, z) - std::exp(oracle::gaussian_log_odds(s2, x, z));
      ref += w * oracle::npdf(x, 0.0, 1.0 + s2) * oracle::npdf(z, 0.0, 1.0 + s2) * d * d;
    }
  }
  ref *= step * step;
  const Estimate quad = eps_direct(emb, *m);
  EXPECT_NEAR(quad.value, ref, 1e-6 * std::max(1.0, ref));
  const Estimate mc = eps_direct(emb, *m, 20000, 3);
  EXPECT_NEAR(mc.value, ref, 3.0 * mc.se);
}
