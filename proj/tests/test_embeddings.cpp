#include <gtest/gtest.h>

#include <algorithm>

#include "redlab/bounds.hpp"
#include "redlab/downstream.hpp"
#include "redlab/embeddings.hpp"
#include "redlab/model_io.hpp"
#include "test_oracles.hpp"

using namespace redlab;

namespace {

ModelPtr discrete(DiscreteSpec s) { return std::make_shared<DiscreteHiddenModel>(std::move(s)); }

LandmarkEmbedding oracle_landmarks(const ModelPtr& m, std::size_t count, std::uint64_t seed) {
  return LandmarkEmbedding(draw_landmarks(*m, count, seed), PairScorer::oracle(m, Scale::odds), "p_Z", seed);
}

// var of f(X, Z) under X ~ px, Z ~ pz, written out cell by cell.
double product_variance(const Eigen::VectorXd& px, const Eigen::VectorXd& pz,
                        const std::function<double(int, int)>& f) {
  double m1 = 0.0, m2 = 0.0;
  for (int x = 0; x < px.size(); ++x) {
    for (int z = 0; z < pz.size(); ++z) {
      const double w = px(x) * pz(z);
      m1 += w * f(x, z);
      m2 += w * f(x, z) * f(x, z);
    }
  }
  return m2 - m1 * m1;
}

DiscreteSpec constant_label_spec(double c) {
  DiscreteSpec s = builtin_model("mixture3")->discrete()->spec();
  s.id = "constant-label";
  s.label_of_h.assign(s.prior.size(), c);
  return s;
}

}  // namespace

TEST(Landmarks, PointMassGivesIdenticalLandmarks) {
  const std::vector<double> probs = {0.0, 1.0, 0.0};
  const auto zs = draw_landmarks(probs, 50, 3);
  EXPECT_TRUE(std::all_of(zs.begin(), zs.end(), [](View z) { return z == 1.0; }));
}

TEST(Landmarks, TopicMarginalFrequencies) {
  const auto m = builtin_model("topic-k5");
  const auto* f = m->finite();
  const std::size_t n = 100000;
  const auto zs = draw_landmarks(*m, n, 12);
  std::vector<double> counts(f->num_z(), 0.0);
  for (View z : zs) counts[static_cast<std::size_t>(z)] += 1.0;
  for (std::size_t z = 0; z < counts.size(); ++z) {
    const double p = f->pz()(static_cast<Eigen::Index>(z));
    const double se = std::sqrt(p * (1.0 - p) / n);
    EXPECT_NEAR(counts[z] / n, p, 3.0 * se) << "word " << z;
  }
}

TEST(Landmarks, RejectsZero) {
  const auto m = builtin_model("flip01");
  EXPECT_THROW(LandmarkEmbedding({}, PairScorer::oracle(m, Scale::odds)), std::invalid_argument);
  EXPECT_THROW(draw_landmarks(*m, 0, 1), std::invalid_argument);
}

TEST(Landmarks, IndependenceGivesOnes) {
  const auto m = builtin_model("independent");
  const auto emb = oracle_landmarks(m, 20, 5);
  for (int x = 0; x < 3; ++x) {
    const Eigen::VectorXd phi = emb.embed(x);
    EXPECT_LT((phi - Eigen::VectorXd::Ones(20)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Landmarks, TopicOddsValues) {
  // K = 2, alpha = 1: same-topic odds 4 E[T1^2] = 4/3, cross-topic 4 E[T1 T2] = 2/3.
  const auto m = builtin_model("topic-k2");
  LandmarkEmbedding emb({1.0, 2.0}, PairScorer::oracle(m, Scale::odds));
  const Eigen::VectorXd phi = emb.embed(0.0);
  EXPECT_NEAR(phi(0), 4.0 * oracle::dirichlet2_moment(1.0, 2, 0), 1e-10);
  EXPECT_NEAR(phi(1), 4.0 * oracle::dirichlet2_moment(1.0, 1, 1), 1e-10);
  EXPECT_NEAR(phi(0), 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(phi(1), 2.0 / 3.0, 1e-12);
}

TEST(Landmarks, ZMirrorMatchesTransposedScores) {
  const auto m = builtin_model("mixture3");
  const auto emb = oracle_landmarks(m, 6, 2);
  const std::vector<View> xs = {0.0, 3.0, 1.0};
  for (int z = 0; z < 5; ++z) {
    const Eigen::VectorXd v = emb.embed_z(z, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_DOUBLE_EQ(v(static_cast<Eigen::Index>(i)), m->odds(xs[i], z));
  }
}

// ---------------------------------------------------------------------------

TEST(Blocks, Layout) {
  const BlockLayout one = block_layout(37, 0.5);
  EXPECT_EQ(one.num_blocks, 1u);
  EXPECT_EQ(one.block_size, 37u);
  const BlockLayout l = block_layout(64, 0.1);  // log2(10) = 3.32
  EXPECT_EQ(l.block_size, 19u);
  EXPECT_EQ(l.num_blocks, 4u);
  EXPECT_EQ(l.start(0, 64), 0u);
  EXPECT_EQ(l.start(2, 64), 38u);
  EXPECT_EQ(l.start(3, 64), 45u);
  EXPECT_THROW(block_layout(3, 0.1), std::invalid_argument);
  EXPECT_THROW(block_layout(10, 1.0), std::invalid_argument);
}

TEST(Blocks, HalfDeltaUsesEveryLandmark) {
  const auto m = builtin_model("mixture3");
  const auto emb = oracle_landmarks(m, 40, 9);
  const BlockChoice c = oracle_landmark_weights(*m, emb, 0.5, 1000, 1);
  EXPECT_EQ(c.block, 0u);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_DOUBLE_EQ(c.weights.w(static_cast<Eigen::Index>(i)), m->cond_mean_y_given_z(emb.landmarks()[i]) / 40.0);
  }
}

TEST(Blocks, SelectsLowestValidationRisk) {
  const auto m = builtin_model("mixture3");
  const auto emb = oracle_landmarks(m, 64, 21);
  const BlockChoice c = oracle_landmark_weights(*m, emb, 0.1, 5000, 4);
  ASSERT_EQ(c.validation_risk.size(), 4u);
  const auto best = std::min_element(c.validation_risk.begin(), c.validation_risk.end());
  EXPECT_EQ(c.block, static_cast<std::size_t>(best - c.validation_risk.begin()));
  const std::size_t s = c.layout.start(c.block, 64);
  for (std::size_t i = 0; i < 64; ++i) {
    if (i < s || i >= s + c.layout.block_size) EXPECT_EQ(c.weights.w(static_cast<Eigen::Index>(i)), 0.0);
  }
}

TEST(Blocks, ConstantLabelRiskBelowTenVarianceOverN) {
  const double c = 0.5;
  const auto m = discrete(constant_label_spec(c));
  const auto* f = m->finite();
  const double var_g = product_variance(f->px(), f->pz(), [&](int x, int z) { return f->odds_table()(x, z); });
  const auto emb = oracle_landmarks(m, 4096, 77);
  const BlockChoice choice = oracle_landmark_weights(*m, emb, 0.1, 100000, 7);
  const RiskReport r = risk_R(emb, choice.weights.w, *m);
  EXPECT_LT(r.risk, 10.0 * c * c * var_g / choice.layout.block_size);
  // c times the block average of g*, which sums to c in expectation.
  const Eigen::VectorXd phi = emb.embed(1.0);
  const std::size_t s = choice.layout.start(choice.block, 4096);
  const double avg = phi.segment(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(choice.layout.block_size)).mean();
  EXPECT_NEAR(phi.dot(choice.weights.w), c * avg, 1e-12);
}

TEST(Blocks, FlipModelMeetsBoundInNinetyPercent) {
  const auto m = builtin_model("flip01");
  // V = E[Y|Z] g*(X, Z): values +-0.8 * 1.64 and +-0.8 * 0.36, mean 0.
  const double var = 0.64 * (1.64 * 1.64 + 0.36 * 0.36) / 2.0;
  EXPECT_NEAR(landmark_variance(*m).value, var, 1e-12);
  const std::size_t n = block_layout(1024, 0.1).block_size;
  int ok = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto emb = oracle_landmarks(m, 1024, derive_seed(100, rep));
    const BlockChoice choice = oracle_landmark_weights(*m, emb, 0.1, 100000, derive_seed(200, rep));
    if (risk_R(emb, choice.weights.w, *m).risk <= 2.0 * var / static_cast<double>(n)) ++ok;
  }
  EXPECT_GE(ok, 45);
}

// ---------------------------------------------------------------------------

TEST(ExactFactorization, IdentityOnRandomModels) {
  for (int seed = 0; seed < 20; ++seed) {
    const auto m = discrete(random_discrete_spec(seed, 5, 12, 12));
    const auto* f = m->finite();
    const auto emb = exact_factorization(*m);
    const Eigen::MatrixXd g = emb.eta_table() * emb.psi_table().transpose();
    EXPECT_LT((g - f->odds_table()).cwiseAbs().maxCoeff(), 1e-12) << seed;
    for (Eigen::Index x = 0; x < emb.eta_table().rows(); ++x) {
      EXPECT_GE(emb.eta_table().row(x).minCoeff(), 0.0);
      EXPECT_NEAR(emb.eta_table().row(x).sum(), 1.0, 1e-12);
    }
    const WeightVector w = exact_linear_weights(*m, emb);
    const Eigen::VectorXd pred = emb.eta_table() * w.w;
    EXPECT_LT((pred - f->mu_table()).cwiseAbs().maxCoeff(), 1e-10) << seed;
  }
}

TEST(ExactFactorization, SingleHiddenState) {
  const auto m = discrete(random_discrete_spec(3, 1, 6, 4));
  const auto emb = exact_factorization(*m);
  ASSERT_EQ(emb.dim(), 1u);
  EXPECT_LT((emb.eta_table().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_LT((emb.psi_table().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(ExactFactorization, RejectsOtherFamilies) {
  EXPECT_THROW(exact_factorization(*builtin_model("topic-k2")), UnsupportedModel);
  EXPECT_THROW(exact_factorization(*builtin_model("gaussian")), UnsupportedModel);
}

TEST(ExactLinearWeights, FlipModelByHand) {
  // w_h = sum_z E[Y|z] p(z|h); E[Y|z] = +-0.8.
  const auto m = builtin_model("flip01");
  const WeightVector w = exact_linear_weights(*m, exact_factorization(*m));
  EXPECT_NEAR(w.w(0), 0.9 * 0.8 - 0.1 * 0.8, 1e-12);
  EXPECT_NEAR(w.w(1), 0.1 * 0.8 - 0.9 * 0.8, 1e-12);
}

TEST(ExactLinearWeights, ZeroLabel) {
  const auto m = discrete(constant_label_spec(0.0));
  const WeightVector w = exact_linear_weights(*m, exact_factorization(*m));
  EXPECT_EQ(w.w.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ExactLinearWeights, GaussianAgainstIntegration) {
  const auto m = builtin_model("gaussian", 0.5);
  const auto emb = probabilistic_embed(m, 3, 8);
  const WeightVector w = exact_linear_weights(*m, emb);
  for (std::size_t i = 0; i < 3; ++i) {
    const double h = emb.hidden()[i].at(0);
    // sum over a z-grid of p_Z(z) E[Y|z] psi_i(z), psi_i = N(z; h, 1)/(p_Z(z) sqrt 3)
    const double ref = oracle::integrate(
        [&](double z) { return oracle::gaussian_cond_mean_z(0.5, z, 2000) * oracle::npdf(z, h, 1.0); }, h - 12.0,
        h + 12.0, 600) / std::sqrt(3.0);
    EXPECT_NEAR(w.w(static_cast<Eigen::Index>(i)), ref, 1e-7);
  }
}

// ---------------------------------------------------------------------------

TEST(ProbabilisticEmbed, SingleStateIsExact) {
  const auto m = discrete(random_discrete_spec(5, 1, 5, 5));
  for (std::size_t dim : {1u, 7u}) {
    const auto emb = probabilistic_embed(m, dim, 2);
    const Eigen::MatrixXd g = emb.eta_table() * emb.psi_table().transpose();
    EXPECT_LT((g.array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(ProbabilisticEmbed, UnbiasedAroundOdds) {
  const auto m = builtin_model("mixture3");
  const auto* f = m->finite();
  const int seeds = 3000;
  std::vector<std::vector<double>> cells(static_cast<std::size_t>(f->odds_table().size()));
  for (int s = 0; s < seeds; ++s) {
    const auto emb = probabilistic_embed(m, 4, derive_seed(31, s));
    const Eigen::MatrixXd g = emb.eta_table() * emb.psi_table().transpose();
    for (Eigen::Index i = 0; i < g.size(); ++i) cells[static_cast<std::size_t>(i)].push_back(g.data()[i]);
  }
  int misses = 0;
  for (Eigen::Index i = 0; i < f->odds_table().size(); ++i) {
    const Estimate e = mean_estimate(cells[static_cast<std::size_t>(i)]);
    if (std::abs(e.value - f->odds_table().data()[i]) > 3.0 * e.se) ++misses;
  }
  // 20 cells at 3 SE: expect about 0.05 misses.
  EXPECT_LE(misses, 1);
}

TEST(ProbabilisticEmbed, TopicUsesDirichletDraws) {
  const auto m = builtin_model("topic-k2");
  const auto emb = probabilistic_embed(m, 2, 6);
  Rng rng(6, 0);
  const Hidden theta = m->sample_hidden(rng);
  // word 0 is in topic 0: eta(0)_0 = K theta_0 / sqrt(m)
  EXPECT_NEAR(emb.eta_table()(0, 0), 2.0 * theta[0] / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(emb.psi_table()(3, 0), 2.0 * theta[1] / std::sqrt(2.0), 1e-12);
}

TEST(ProbabilisticEmbed, GaussianStillBuiltAboveHalf) {
  const auto m = builtin_model("gaussian", 0.5);
  const auto emb = probabilistic_embed(m, 5, 1);
  EXPECT_EQ(emb.dim(), 5u);
  EXPECT_FALSE(emb.tabular());
  EXPECT_FALSE(hidden_factor_variance(*m).has_value());
}

TEST(ProbabilisticEmbed, Deterministic) {
  const auto m = builtin_model("mixture3");
  const auto a = probabilistic_embed(m, 16, 44);
  const auto b = probabilistic_embed(m, 16, 44);
  EXPECT_EQ(a.eta_table(), b.eta_table());
  EXPECT_EQ(a.psi_table(), b.psi_table());
}

// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<DiscreteHiddenModel> reweighted(const DiscreteHiddenModel& p, std::vector<double> w) {
  return std::make_shared<DiscreteHiddenModel>(reweight_x(p, w, "q"));
}

// var over X ~ q_X, Z ~ alpha of (p_Z/alpha) E_q[Y|Z] g*_p, from the raw
// specifications.
double transfer_variance_oracle(const DiscreteSpec& p, const DiscreteSpec& q, const std::vector<double>& alpha) {
  const auto nh = static_cast<int>(p.prior.size());
  const auto nx = static_cast<int>(p.x_given_h.cols());
  const auto nz = static_cast<int>(p.z_given_h.cols());
  auto marg = [&](const DiscreteSpec& s, bool x_view, int v) {
    double t = 0.0;
    for (int h = 0; h < nh; ++h) t += s.prior[h] * (x_view ? s.x_given_h(h, v) : s.z_given_h(h, v));
    return t;
  };
  auto joint = [&](int x, int z) {
    double t = 0.0;
    for (int h = 0; h < nh; ++h) t += p.prior[h] * p.x_given_h(h, x) * p.z_given_h(h, z);
    return t;
  };
  auto ey_q = [&](int z) {
    double num = 0.0, den = 0.0;
    for (int h = 0; h < nh; ++h) {
      num += q.prior[h] * q.z_given_h(h, z) * q.label_of_h[h];
      den += q.prior[h] * q.z_given_h(h, z);
    }
    return num / den;
  };
  double m1 = 0.0, m2 = 0.0;
  for (int x = 0; x < nx; ++x) {
    for (int z = 0; z < nz; ++z) {
      const double v = marg(p, false, z) / alpha[z] * ey_q(z) * joint(x, z) / (marg(p, true, x) * marg(p, false, z));
      const double w = marg(q, true, x) * alpha[z];
      m1 += w * v;
      m2 += w * v * v;
    }
  }
  return m2 - m1 * m1;
}

}  // namespace

TEST(Transfer, ReducesToOracleWhenQEqualsP) {
  const auto p = builtin_model("mixture3");
  const auto* d = p->discrete();
  const auto emb = oracle_landmarks(p, 200, 3);
  const std::vector<double> pz(d->pz().data(), d->pz().data() + d->pz().size());
  const BlockChoice a = oracle_landmark_weights(*p, emb, 0.1, 20000, 8);
  const BlockChoice b = transfer_landmark_weights(*d, *d, emb, pz, 0.1, 20000, 8);
  EXPECT_EQ(a.block, b.block);
  EXPECT_EQ(a.weights.w, b.weights.w);
  EXPECT_EQ(b.weights.source, WeightSource::transfer_block);
}

TEST(Transfer, RejectsMismatchedConditionals) {
  const auto p = builtin_model("mixture3");
  DiscreteSpec other = p->discrete()->spec();
  other.prior = {0.2, 0.3, 0.5};
  const DiscreteHiddenModel q(other);
  const auto emb = oracle_landmarks(p, 20, 3);
  const std::vector<double> pz(q.pz().data(), q.pz().data() + q.pz().size());
  EXPECT_GT(conditional_mismatch(*p->finite(), q), 1e-3);
  EXPECT_THROW(transfer_landmark_weights(*p->discrete(), q, emb, pz, 0.1, 100, 1), ConfigError);
}

TEST(Transfer, VarianceMatchesOracle) {
  const auto p = builtin_model("mixture3");
  const auto q = reweighted(*p->discrete(), {3.0, 1.0, 0.5, 0.2});
  const std::vector<double> alpha = {0.1, 0.2, 0.3, 0.25, 0.15};
  EXPECT_NEAR(transfer_variance(*p->finite(), *q, alpha),
              transfer_variance_oracle(p->discrete()->spec(), q->spec(), alpha), 1e-12);
}

TEST(Transfer, BoundHoldsInNinetyPercent) {
  const auto p = builtin_model("mixture3");
  const auto q = reweighted(*p->discrete(), {3.0, 1.0, 0.5, 0.2});
  ASSERT_LT(conditional_mismatch(*p->finite(), *q), 1e-12);
  const std::vector<double> qz(q->pz().data(), q->pz().data() + q->pz().size());
  const std::vector<double> third = {0.3, 0.1, 0.2, 0.2, 0.2};
  for (const auto* alpha : {&qz, &third}) {
    const double var = transfer_variance_oracle(p->discrete()->spec(), q->spec(), *alpha);
    const double bound = landmark_block_bound(var, 1024, 0.1);
    int ok = 0;
    for (int rep = 0; rep < 50; ++rep) {
      LandmarkEmbedding emb(draw_landmarks(*alpha, 1024, derive_seed(5, rep)), PairScorer::oracle(p, Scale::odds));
      const BlockChoice c = transfer_landmark_weights(*p->discrete(), *q, emb, *alpha, 0.1, 100000, derive_seed(6, rep));
      if (risk_R(emb, c.weights.w, *q).risk <= bound) ++ok;
    }
    EXPECT_GE(ok, 45);
  }
}

TEST(Transfer, VarianceComparisonForRandomAlpha) {
  const auto p = builtin_model("mixture3");
  const auto q = reweighted(*p->discrete(), {0.2, 1.0, 2.0, 4.0});
  const std::vector<double> qz(q->pz().data(), q->pz().data() + q->pz().size());
  const double lhs = transfer_variance(*p->finite(), *q, qz);
  const double label_var = label_mean_variance(*q);
  Rng rng(17, 0);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> alpha = rng.dirichlet(1.0, 5);
    EXPECT_LE(lhs, transfer_variance(*p->finite(), *q, alpha) + label_var + 1e-12) << i;
  }
}
