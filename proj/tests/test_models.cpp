#include <gtest/gtest.h>

#include <cmath>

#include "redlab/model_io.hpp"
#include "redlab/models.hpp"
#include "test_oracles.hpp"

using namespace redlab;

namespace {

std::shared_ptr<const DiscreteHiddenModel> flip01() {
  return std::make_shared<DiscreteHiddenModel>(flip_spec(0.1));
}

}  // namespace

TEST(Sample, IdentityChannelsGiveEqualViews) {
  const auto model = builtin_model("identity2");
  const Dataset data = model->sample(1000, 7);
  for (const Row& r : data.rows) EXPECT_EQ(r.x, r.z);
}

TEST(Sample, BitIdenticalUnderSeed) {
  const auto model = builtin_model("topic-k5");
  const Dataset a = model->sample(500, 99);
  const Dataset b = model->sample(500, 99);
  const Dataset c = model->sample(500, 100);
  bool differs = false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].x, b.rows[i].x);
    EXPECT_EQ(a.rows[i].z, b.rows[i].z);
    EXPECT_EQ(a.rows[i].y, b.rows[i].y);
    differs = differs || a.rows[i].x != c.rows[i].x || a.rows[i].y != c.rows[i].y;
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(model->sample(0, 1), std::invalid_argument);
}

TEST(Sample, GaussianCorrelation) {
  GaussianModel model(1.0);
  const std::size_t n = 1000000;
  const Dataset data = model.sample(n, 3);
  double sx = 0, sz = 0, sxx = 0, szz = 0, sxz = 0;
  for (const Row& r : data.rows) {
    sx += r.x;
    sz += r.z;
    sxx += r.x * r.x;
    szz += r.z * r.z;
    sxz += r.x * r.z;
  }
  const double nd = static_cast<double>(n);
  const double cov = sxz / nd - sx * sz / (nd * nd);
  const double vx = sxx / nd - sx * sx / (nd * nd);
  const double vz = szz / nd - sz * sz / (nd * nd);
  const double rho = cov / std::sqrt(vx * vz);
  // Large-sample SE of a Pearson correlation.
  const double se = (1.0 - 0.25) / std::sqrt(nd);
  EXPECT_NEAR(rho, 0.5, 3.0 * se);
}

TEST(Sample, TopicSameTopicFraction) {
  const auto model = builtin_model("topic-k2");
  const auto* topic = dynamic_cast<const TopicModel*>(model.get());
  const std::size_t n = 1000000;
  const Dataset data = model->sample(n, 11);
  std::vector<double> same(n);
  for (std::size_t i = 0; i < n; ++i) {
    same[i] = topic->topic_of(static_cast<std::size_t>(data.rows[i].x)) ==
                      topic->topic_of(static_cast<std::size_t>(data.rows[i].z))
                  ? 1.0
                  : 0.0;
  }
  const Estimate e = mean_estimate(same);
  const double theta1_sq = oracle::dirichlet2_moment(1.0, 2, 0);
  EXPECT_NEAR(theta1_sq, 1.0 / 3.0, 1e-10);
  EXPECT_NEAR(e.value, 2.0 * theta1_sq, 3.0 * e.se);
}

// ---------------------------------------------------------------------------

TEST(Odds, IndependenceGivesOne) {
  const auto model = builtin_model("independent");
  const auto* f = model->finite();
  for (std::size_t x = 0; x < f->num_x(); ++x) {
    for (std::size_t z = 0; z < f->num_z(); ++z) {
      EXPECT_NEAR(model->odds(x, z), 1.0, 1e-12);
      EXPECT_NEAR(model->log_odds(x, z), 0.0, 1e-12);
    }
  }
}

TEST(Odds, GaussianMatchesBivariateDensity) {
  GaussianModel model(1.0);
  EXPECT_NEAR(model.odds(0.0, 0.0), 2.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(model.log_odds(0.0, 0.0), 0.14384103622589045, 1e-12);
  for (double x : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
    for (double z : {-2.0, 0.1, 2.5}) {
      for (double s2 : {0.25, 1.0, 3.0}) {
        GaussianModel m(s2);
        EXPECT_NEAR(m.log_odds(x, z), oracle::gaussian_log_odds(s2, x, z), 1e-10);
        EXPECT_NEAR(std::exp(m.log_odds(x, z)), m.odds(x, z), 1e-12 * m.odds(x, z));
      }
    }
  }
}

TEST(Odds, TopicSameAndCrossTopic) {
  const auto model = builtin_model("topic-k2");
  // Words 0,1 belong to topic 0; words 2,3 to topic 1.
  const double same = 4.0 * oracle::dirichlet2_moment(1.0, 2, 0);
  const double cross = 4.0 * oracle::dirichlet2_moment(1.0, 1, 1);
  EXPECT_NEAR(same, 4.0 / 3.0, 1e-10);
  EXPECT_NEAR(cross, 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(model->odds(0, 1), same, 1e-12);
  EXPECT_NEAR(model->odds(0, 3), cross, 1e-12);
  EXPECT_NEAR(model->odds(3, 2), same, 1e-12);
}

TEST(Odds, OutOfSupportIsDomainError) {
  const auto model = builtin_model("flip01");
  EXPECT_THROW(model->odds(2, 0), DomainError);
  EXPECT_THROW(model->odds(0, -1), DomainError);
  EXPECT_THROW(model->odds(0.5, 0), DomainError);
  EXPECT_THROW(model->mu(7), DomainError);
  EXPECT_THROW(model->cond_mean_y_given_z(NAN), DomainError);
  GaussianModel g(1.0);
  EXPECT_THROW(g.odds(INFINITY, 0.0), DomainError);
}

// ---------------------------------------------------------------------------

TEST(CondMean, ConstantLabel) {
  DiscreteSpec spec = random_discrete_spec(5, 3, 4, 4);
  for (auto& y : spec.label_of_h) y = 0.3;
  DiscreteHiddenModel model(spec);
  for (std::size_t z = 0; z < model.num_z(); ++z) EXPECT_NEAR(model.cond_mean_y_given_z(z), 0.3, 1e-12);
  for (std::size_t x = 0; x < model.num_x(); ++x) EXPECT_NEAR(model.mu(x), 0.3, 1e-12);
}

TEST(CondMean, TopicPosterior) {
  const auto model = builtin_model("topic-k2");
  // v = (1, -1); single topic-1 token gives posterior means (2/3, 1/3).
  const double post1 = oracle::dirichlet2_posterior_mean(1.0, 1, 0);
  EXPECT_NEAR(post1, 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(model->cond_mean_y_given_z(0), post1 - (1.0 - post1), 1e-12);
  EXPECT_NEAR(model->cond_mean_y_given_z(0), 1.0 / 3.0, 1e-12);
  const double post2 = oracle::dirichlet2_posterior_mean(1.0, 2, 0);
  EXPECT_NEAR(post2, 3.0 / 4.0, 1e-10);
  EXPECT_NEAR(model->cond_mean_y_given_xz(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(model->cond_mean_y_given_xz(2, 3), -0.5, 1e-12);
  EXPECT_NEAR(model->cond_mean_y_given_xz(0, 3), 0.0, 1e-12);
}

TEST(CondMean, DeterministicChannels) {
  const auto model = builtin_model("identity2");
  EXPECT_NEAR(model->cond_mean_y_given_xz(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(model->cond_mean_y_given_xz(1, 1), -1.0, 1e-12);
}

TEST(CondMean, GaussianSymmetryAndQuadrature) {
  for (double s2 : {0.1, 0.25, 1.0, 4.0}) {
    GaussianModel model(s2);
    EXPECT_FALSE(model.using_quadrature_fallback());
    EXPECT_NEAR(model.cond_mean_y_given_z(0.0), 0.0, 1e-14);
    EXPECT_NEAR(model.mu(0.0), 0.0, 1e-14);
    EXPECT_NEAR(model.cond_mean_y_given_xz(1.3, -1.3), 0.0, 1e-14);
    for (double x : {-6.0, -1.0, 0.4, 3.0, 8.0}) {
      EXPECT_NEAR(model.mu(x), model.mu_quadrature(x), 1e-8);
      EXPECT_NEAR(model.cond_mean_y_given_z(x), oracle::gaussian_cond_mean_z(s2, x), 1e-8);
      EXPECT_NEAR(model.mu(x), oracle::gaussian_mu(s2, x), 1e-8);
      EXPECT_NEAR(model.cond_mean_y_given_xz(x, 0.5), model.cond_mean_y_given_xz_quadrature(x, 0.5), 1e-8);
    }
    EXPECT_NEAR(model.second_moment_y(), oracle::gaussian_second_moment_y(s2), 1e-8);
  }
}

TEST(Mu, ChangeOfMeasureRoute) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DiscreteHiddenModel model(random_discrete_spec(seed, 5, 8, 8));
    for (std::size_t x = 0; x < model.num_x(); ++x) {
      double via_odds = 0.0;
      for (std::size_t z = 0; z < model.num_z(); ++z) {
        via_odds += model.cond_mean_y_given_z(z) * model.odds(x, z) * model.pz()(z);
      }
      EXPECT_NEAR(via_odds, model.mu(x), 1e-10);
    }
  }
  const auto topic = builtin_model("topic-k5");
  const auto* f = topic->finite();
  for (std::size_t x = 0; x < f->num_x(); ++x) {
    double via_odds = 0.0;
    for (std::size_t z = 0; z < f->num_z(); ++z) via_odds += f->ey_z()(z) * f->odds_table()(x, z) * f->pz()(z);
    EXPECT_NEAR(via_odds, topic->mu(x), 1e-10);
  }
}

// ---------------------------------------------------------------------------

TEST(Normalization, ChangeOfMeasureSumsToOne) {
  for (const auto& name : builtin_model_names()) {
    const auto model = builtin_model(name);
    if (const auto* f = model->finite()) {
      for (std::size_t x = 0; x < f->num_x(); ++x) {
        double total = 0.0;
        for (std::size_t z = 0; z < f->num_z(); ++z) total += f->pz()(z) * model->odds(x, z);
        EXPECT_NEAR(total, 1.0, 1e-10) << name;
      }
    } else {
      const auto* g = dynamic_cast<const GaussianModel*>(model.get());
      for (double x : {-3.0, 0.0, 1.7}) {
        const double total = gaussian_expectation([&](double z) { return g->odds(x, z); }, 0.0,
                                                  1.0 + g->sigma2(), 64);
        EXPECT_NEAR(total, 1.0, 1e-6) << name;
      }
    }
  }
}

TEST(Jensen, OddsSquaredBelowHiddenSecondMoment) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    DiscreteHiddenModel model(random_discrete_spec(seed, 4, 6, 6));
    const auto& s = model.spec();
    for (std::size_t x = 0; x < model.num_x(); ++x) {
      for (std::size_t z = 0; z < model.num_z(); ++z) {
        double rhs = 0.0;
        for (std::size_t h = 0; h < model.num_hidden(); ++h) {
          const double r = s.x_given_h(h, x) * s.z_given_h(h, z) / (model.px()(x) * model.pz()(z));
          rhs += s.prior[h] * r * r;
        }
        const double g = model.odds(x, z);
        EXPECT_LE(g * g, rhs * (1.0 + 1e-12));
      }
    }
  }
}

// ---------------------------------------------------------------------------

TEST(Redundancy, FlipModelMatchesEnumeration) {
  const auto model = flip01();
  const Redundancy r = redundancy(*model);
  const auto ref = oracle::brute_force_redundancy(model->spec());
  EXPECT_NEAR(r.eps_x, ref.eps_x, 1e-12);
  EXPECT_NEAR(r.eps_z, ref.eps_z, 1e-12);
  EXPECT_NEAR(r.eps_x, 5.76 / 41.0, 1e-12);
  EXPECT_NEAR(r.eps_mu, 4.0 * r.eps_x, 1e-12);
}

TEST(Redundancy, RandomModelsMatchEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DiscreteHiddenModel model(random_discrete_spec(seed, 5, 6, 7));
    const Redundancy r = redundancy(model);
    const auto ref = oracle::brute_force_redundancy(model.spec());
    EXPECT_NEAR(r.eps_x, ref.eps_x, 1e-12);
    EXPECT_NEAR(r.eps_z, ref.eps_z, 1e-12);
  }
}

TEST(Redundancy, ZeroWhenViewsDetermineLabel) {
  const Redundancy r = redundancy(*builtin_model("identity2"));
  EXPECT_NEAR(r.eps_x, 0.0, 1e-14);
  EXPECT_NEAR(r.eps_z, 0.0, 1e-14);
  EXPECT_NEAR(r.eps_mu, 0.0, 1e-14);
}

TEST(Redundancy, SymmetricModels) {
  const Redundancy t = redundancy(*builtin_model("topic-k5"));
  EXPECT_NEAR(t.eps_x, t.eps_z, 1e-10);
  for (double s2 : {0.25, 1.0}) {
    GaussianModel g(s2);
    const Redundancy r = redundancy(g);
    EXPECT_NEAR(r.eps_x, r.eps_z, 1e-10);
    EXPECT_LE(r.quadrature_error, 1e-6);
    // Monte Carlo oracle for eps_X.
    const Dataset data = g.sample(200000, 5);
    std::vector<double> sq;
    for (const Row& row : data.rows) {
      const double d = g.cond_mean_y_given_x(row.x) - g.cond_mean_y_given_xz(row.x, row.z);
      sq.push_back(d * d);
    }
    const Estimate e = mean_estimate(sq);
    EXPECT_NEAR(r.eps_x, e.value, 4.0 * e.se);
  }
}

// ---------------------------------------------------------------------------

TEST(ConditionalMI, ZeroWhenLabelIsFunctionOfX) {
  DiscreteSpec spec = random_discrete_spec(3, 3, 3, 5, 3);
  spec.x_given_h = Eigen::MatrixXd::Identity(3, 3);
  DiscreteHiddenModel model(spec);
  EXPECT_NEAR(model.conditional_mi().i_yz_given_x, 0.0, 1e-14);
  EXPECT_NEAR(redundancy(model).eps_x, 0.0, 1e-14);
}

TEST(ConditionalMI, ZeroWhenXEqualsZ) {
  DiscreteSpec spec = random_discrete_spec(8, 4, 4, 4, 2);
  // X = Z deterministically: both views copy the same coarse function of H.
  const auto s = static_cast<Eigen::Index>(spec.prior.size());
  spec.x_given_h = Eigen::MatrixXd::Zero(s, 2);
  for (Eigen::Index h = 0; h < s; ++h) spec.x_given_h(h, h % 2) = 1.0;
  spec.z_given_h = spec.x_given_h;
  DiscreteHiddenModel model(spec);
  EXPECT_NEAR(model.conditional_mi().i_yz_given_x, 0.0, 1e-14);
}

TEST(ConditionalMI, MatchesEnumerationAndBoundsRedundancy) {
  const auto model = flip01();
  const ConditionalMI mi = conditional_mi(*model);
  const ConditionalMI ref = oracle::brute_force_cmi(model->spec());
  EXPECT_NEAR(mi.i_yz_given_x, ref.i_yz_given_x, 1e-12);
  EXPECT_NEAR(mi.i_yx_given_z, ref.i_yx_given_z, 1e-12);
  // For labels in [-1, 1] Pinsker gives eps_X <= 2 I(Y;Z|X); the factor 1/2
  // only holds for labels in an interval of length 1. This model separates them.
  const double eps_x = redundancy(*model).eps_x;
  EXPECT_GT(eps_x, 0.5 * mi.i_yz_given_x);
  EXPECT_LE(eps_x, 2.0 * mi.i_yz_given_x);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DiscreteHiddenModel m(random_discrete_spec(seed, 5, 6, 6));
    const ConditionalMI c = m.conditional_mi();
    const ConditionalMI b = oracle::brute_force_cmi(m.spec());
    EXPECT_NEAR(c.i_yz_given_x, b.i_yz_given_x, 1e-12);
    const Redundancy r = redundancy(m);
    EXPECT_LE(r.eps_x, 2.0 * c.i_yz_given_x + 1e-15);
    EXPECT_LE(r.eps_z, 2.0 * c.i_yx_given_z + 1e-15);
  }
  EXPECT_THROW(conditional_mi(*builtin_model("topic-k2")), UnsupportedModel);
  EXPECT_THROW(conditional_mi(GaussianModel(1.0)), UnsupportedModel);
}

TEST(MuGap, MonteCarloGapBelowBound) {
  for (const auto& name : {"flip01", "mixture3", "topic-k5", "gaussian"}) {
    const auto model = builtin_model(name);
    const Redundancy r = redundancy(*model);
    const Estimate e = mu_bayes_gap_mc(*model, 100000, 17);
    EXPECT_LE(e.value, r.eps_mu + 3.0 * e.se) << name;
  }
}

// ---------------------------------------------------------------------------

TEST(Validate, ReportsEveryViolation) {
  const std::string text = R"({
    "kind": "discrete",
    // two problems in the prior, one bad row, one bad label
    "prior": [0.7, 0.7],
    "x_given_h": [[0.5, 0.6], [0.5, 0.5]],
    "z_given_h": [[1.0, 0.0], [0.0, 1.0]],
    "label_of_h": [1.0, -1.5]
  })";
  const auto v = validate_model_text(text);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].field, "prior");
  EXPECT_NEAR(v[0].slack, 0.4, 1e-9);
  EXPECT_EQ(v[1].field, "x_given_h");
  EXPECT_EQ(v[2].field, "label_of_h");
  EXPECT_NEAR(v[2].slack, 0.5, 1e-12);
  EXPECT_THROW(model_from_text(text), ModelError);
}

TEST(Validate, StructuralProblems) {
  EXPECT_FALSE(validate_model_text("{not json").empty());
  EXPECT_FALSE(validate_model_text(R"({"kind": "lda"})").empty());
  const auto ragged = validate_model_text(
      R"({"kind":"topic","num_topics":2,"alpha":1,"topic_word":[[1,0],[0]],"label_direction":[1,-1]})");
  ASSERT_EQ(ragged.size(), 1u);
  EXPECT_EQ(ragged[0].field, "topic_word");
  const auto overlap = validate_model_text(
      R"({"kind":"topic","num_topics":2,"alpha":1,"topic_word":[[0.5,0.5],[0,1]],"label_direction":[1,-1]})");
  EXPECT_FALSE(overlap.empty());
  EXPECT_FALSE(validate_model_text(R"({"kind":"gaussian","sigma2":0})").empty());
  const auto support = validate_model_text(
      R"({"kind":"discrete","prior":[1,0],"x_given_h":[[1,0],[0,1]],"z_given_h":[[1],[1]],"label_of_h":[1,1]})");
  ASSERT_EQ(support.size(), 1u);
  EXPECT_NE(support[0].message.find("support"), std::string::npos);
}

TEST(ModelJson, RoundTrip) {
  for (const auto& name : builtin_model_names()) {
    const auto model = builtin_model(name, 0.25);
    const auto back = model_from_json(model_to_json(*model));
    EXPECT_EQ(back->id(), model->id());
    EXPECT_EQ(back->kind(), model->kind());
    EXPECT_NEAR(back->odds(1, 0), model->odds(1, 0), 1e-15);
  }
}

TEST(Reweight, KeepsConditionalOfZGivenX) {
  const auto p = builtin_model("mixture3");
  const auto* pd = p->discrete();
  const std::vector<double> w = {3.0, 1.0, 0.5, 2.0};
  const DiscreteHiddenModel q = reweight_x(*pd, w, "q");
  double norm = 0.0;
  for (std::size_t x = 0; x < 4; ++x) norm += pd->px()(x) * w[x];
  for (std::size_t x = 0; x < 4; ++x) {
    EXPECT_NEAR(q.px()(x), pd->px()(x) * w[x] / norm, 1e-12);
    for (std::size_t z = 0; z < pd->num_z(); ++z) {
      EXPECT_NEAR(q.joint()(x, z) / q.px()(x), pd->joint()(x, z) / pd->px()(x), 1e-12);
    }
  }
}
