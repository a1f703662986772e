#include "redlab/bounds.hpp"

#include <sstream>

namespace redlab {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::not_applicable: return "not_applicable";
    case Verdict::exceeded: return "exceeded";
  }
  return "unknown";
}

Verdict judge_upper(double estimate, double se, const std::optional<double>& bound) {
  if (!bound) return Verdict::not_applicable;
  return estimate <= *bound + 3.0 * se ? Verdict::holds : Verdict::violated;
}

Verdict judge_equal(double estimate, double se, double target, double slack) {
  return std::abs(estimate - target) <= 3.0 * se + slack ? Verdict::holds : Verdict::violated;
}

// ---------------------------------------------------------------------------

namespace {

void require_nonnegative(std::initializer_list<double> xs, const char* what) {
  for (double x : xs) {
    if (!(x >= 0.0)) throw std::invalid_argument(std::string(what) + ": inputs must be non-negative");
  }
}

}  // namespace

double mu_gap_bound(double eps_x, double eps_z) {
  require_nonnegative({eps_x, eps_z}, "mu_gap_bound");
  return eps_x + 2.0 * std::sqrt(eps_x * eps_z) + eps_z;
}

double landmark_block_bound(double variance, std::size_t m, double delta) {
  require_nonnegative({variance}, "landmark_block_bound");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("landmark_block_bound: delta must lie in (0, 1)");
  const double n = std::floor(static_cast<double>(m) / std::log2(1.0 / delta));
  if (n < 1.0) {
    std::ostringstream os;
    os << "landmark_block_bound: floor(m / log2(1/delta)) is 0 for m=" << m << ", delta=" << delta
       << "; increase m or delta";
    throw std::invalid_argument(os.str());
  }
  return 2.0 * variance / n;
}

double landmark_risk_bound(double eps_mu, double eps_lm) { return mu_gap_bound(eps_mu, eps_lm); }

std::optional<double> learned_landmark_bound(double eps_lm, double eps_opt_lm, const std::optional<double>& g_max) {
  require_nonnegative({eps_lm, eps_opt_lm}, "learned_landmark_bound");
  if (!g_max) return std::nullopt;
  const double a = (1.0 + *g_max) * (1.0 + *g_max);
  return 2.0 * eps_lm + 4.0 * a * std::sqrt(2.0 * eps_opt_lm * eps_lm) + 16.0 * a * a * eps_opt_lm;
}

std::optional<double> direct_risk_bound(double ey2, const std::optional<double>& g_max, double eps_opt_direct) {
  require_nonnegative({ey2, eps_opt_direct}, "direct_risk_bound");
  if (!g_max) return std::nullopt;
  const double a = (1.0 + *g_max) * (1.0 + *g_max);
  return ey2 * a * a * eps_opt_direct;
}

double factorized_risk_bound(double ey2, double eps_direct) {
  require_nonnegative({ey2, eps_direct}, "factorized_risk_bound");
  return ey2 * eps_direct;
}

// ---------------------------------------------------------------------------

namespace {

const GaussianModel* as_gaussian(const MultiViewModel& model) {
  return dynamic_cast<const GaussianModel*>(&model);
}

// Conditional Monte Carlo for E_{p_X}[I(x)] on the Gaussian model: x is drawn
// from N(0, 2 (1+2s2)(1+s2)) and reweighted. The heavy g* tails sit in I.
Estimate widened_x_mc(const GaussianModel& g, std::size_t n, std::uint64_t seed,
                      const std::function<double(double)>& inner) {
  if (n < 2) throw std::invalid_argument("Monte Carlo needs at least 2 draws");
  const double s2 = g.sigma2();
  const double var_p = 1.0 + s2;
  const double proposal = 2.0 * (1.0 + 2.0 * s2) * (1.0 + s2);
  std::vector<double> terms(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(seed, i);
    const double x = std::sqrt(proposal) * rng.normal();
    const double w = std::exp(log_normal_pdf(x, 0.0, var_p) - log_normal_pdf(x, 0.0, proposal));
    terms[i] = w * inner(x);
  });
  return mean_estimate(terms);
}

// E_{z ~ p_Z}[f(z) g*(x, z)^k] with the rule centred on p(z | x).
double z_given_x_moment(const GaussianModel& g, double x, int k, const std::function<double(double)>& f) {
  const double s2 = g.sigma2();
  const double var_p = 1.0 + s2;
  const double mean = s2 / (1.0 + s2) * x;
  return gaussian_expectation(
      [&](double z) {
        const double ratio = std::exp(log_normal_pdf(z, 0.0, var_p) - log_normal_pdf(z, mean, var_p));
        return ratio * f(z) * std::pow(g.odds(x, z), k);
      },
      mean, var_p, 64);
}

}  // namespace

Estimate landmark_variance(const MultiViewModel& model, std::size_t n_mc, std::uint64_t seed) {
  if (const FiniteModel* f = model.finite()) {
    // mean is E[E[Y | Z]] because sum_x p_x g*(x, z) = 1
    const Eigen::MatrixXd v = f->odds_table() * f->ey_z().asDiagonal();
    const double second = (f->px().transpose() * v.cwiseAbs2() * f->pz())(0, 0);
    const double mean = (f->px().transpose() * v * f->pz())(0, 0);
    return Estimate{std::max(0.0, second - mean * mean), 0.0, 0};
  }
  const GaussianModel* g = as_gaussian(model);
  if (g == nullptr) throw UnsupportedModel("landmark_variance: unsupported model");
  auto ey = [g](double z) { return g->cond_mean_y_given_z(z); };
  auto ey2 = [g](double z) {
    const double e = g->cond_mean_y_given_z(z);
    return e * e;
  };
  const Estimate second = widened_x_mc(*g, n_mc, seed, [&](double x) { return z_given_x_moment(*g, x, 2, ey2); });
  const Estimate mean = widened_x_mc(*g, n_mc, seed, [&](double x) { return z_given_x_moment(*g, x, 1, ey); });
  Estimate out;
  out.value = std::max(0.0, second.value - mean.value * mean.value);
  out.se = std::sqrt(second.se * second.se + 4.0 * mean.value * mean.value * mean.se * mean.se);
  out.n = n_mc;
  return out;
}

std::optional<double> g_max(const MultiViewModel& model) {
  const FiniteModel* f = model.finite();
  if (f == nullptr) return std::nullopt;
  double best = 0.0;
  for (Eigen::Index x = 0; x < f->joint().rows(); ++x) {
    if (f->px()(x) == 0.0) continue;
    for (Eigen::Index z = 0; z < f->joint().cols(); ++z) {
      if (f->pz()(z) > 0.0) best = std::max(best, f->odds_table()(x, z));
    }
  }
  return best;
}

GaussianClosedForms gaussian_closed_forms(double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian_closed_forms: sigma2 must be positive");
  GaussianClosedForms out;
  const double a = (1.0 + sigma2) * (1.0 + sigma2);
  out.second_moment_gstar = a / (1.0 + 2.0 * sigma2);
  if (sigma2 < 0.5) out.direct_moment = a / std::sqrt(1.0 - 4.0 * sigma2 * sigma2);
  return out;
}

TopicClosedForms topic_closed_forms(std::size_t k, double alpha) {
  if (k == 0 || !(alpha > 0.0)) throw std::invalid_argument("topic_closed_forms: need K >= 1 and alpha > 0");
  const double kd = static_cast<double>(k);
  const double ka = kd * alpha;
  // E[prod T_j^{a_j}] = Gamma(K alpha) prod Gamma(alpha + a_j) / (Gamma(alpha)^.. Gamma(K alpha + sum a))
  auto moment = [&](std::initializer_list<int> powers) {
    double lg = std::lgamma(ka);
    int total = 0;
    for (int p : powers) {
      lg += std::lgamma(alpha + p) - std::lgamma(alpha);
      total += p;
    }
    return std::exp(lg - std::lgamma(ka + total));
  };
  TopicClosedForms out;
  const double same = moment({2});
  const double cross = k > 1 ? moment({1, 1}) : 0.0;
  out.second_moment_gstar = kd * kd * (kd * same * same + kd * (kd - 1.0) * cross * cross);
  const double t4 = moment({4});
  const double t22 = k > 1 ? moment({2, 2}) : 0.0;
  out.fourth_moment_quantity = kd * kd * kd * (t4 + (kd - 1.0) * t22);
  return out;
}

std::optional<double> hidden_factor_variance(const MultiViewModel& model) {
  if (const DiscreteHiddenModel* d = model.discrete()) {
    const DiscreteSpec& s = d->spec();
    double total = 0.0;
    for (std::size_t h = 0; h < d->num_hidden(); ++h) {
      const auto hi = static_cast<Eigen::Index>(h);
      double ax = 0.0, bz = 0.0;
      for (Eigen::Index x = 0; x < d->px().size(); ++x) {
        if (d->px()(x) > 0.0) ax += s.x_given_h(hi, x) * s.x_given_h(hi, x) / d->px()(x);
      }
      for (Eigen::Index z = 0; z < d->pz().size(); ++z) {
        if (d->pz()(z) > 0.0) bz += s.z_given_h(hi, z) * s.z_given_h(hi, z) / d->pz()(z);
      }
      total += s.prior[h] * ax * bz;
    }
    return std::max(0.0, total - 1.0);
  }
  if (const auto* t = dynamic_cast<const TopicModel*>(&model)) {
    return std::max(0.0, topic_closed_forms(t->num_topics(), t->alpha()).fourth_moment_quantity - 1.0);
  }
  if (const GaussianModel* g = as_gaussian(model)) {
    const auto cf = gaussian_closed_forms(g->sigma2());
    if (!cf.direct_moment) return std::nullopt;
    return *cf.direct_moment - 1.0;
  }
  throw UnsupportedModel("hidden_factor_variance: unsupported model");
}

// ---------------------------------------------------------------------------

namespace {

Estimate plain_product_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed,
                          const std::function<double(View, View, Rng&)>& term) {
  if (n < 2) throw std::invalid_argument("Monte Carlo needs at least 2 draws");
  std::vector<double> terms(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(seed, i);
    const View x = model.sample_x(rng);
    const View z = model.sample_z(rng);
    terms[i] = term(x, z, rng);
  });
  return mean_estimate(terms);
}

}  // namespace

Estimate gstar_second_moment_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed) {
  if (model.kind() == ModelKind::discrete) {
    const FiniteModel* f = model.finite();
    return Estimate{(f->px().transpose() * f->odds_table().cwiseAbs2() * f->pz())(0, 0), 0.0, 0};
  }
  if (const GaussianModel* g = as_gaussian(model)) {
    return widened_x_mc(*g, n, seed, [g](double x) { return z_given_x_moment(*g, x, 2, [](double) { return 1.0; }); });
  }
  return plain_product_mc(model, n, seed, [&](View x, View z, Rng&) {
    const double v = model.odds(x, z);
    return v * v;
  });
}

Estimate hidden_moment_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed) {
  if (const GaussianModel* g = as_gaussian(model)) {
    const double s2 = g->sigma2();
    if (s2 >= 0.5) throw NumericalError("hidden moment is infinite for sigma2 >= 1/2");
    // E_z[z_ratio(z, h)^2] = E_{z ~ N(h, 1)}[N(z; h, 1) / p_Z(z)]
    const HermiteRule& rule = hermite_rule(48);
    std::vector<double> hs, hw, jz;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double h = std::sqrt(2.0 * s2) * rule.nodes[i];
      hs.push_back(h);
      hw.push_back(rule.weights[i] / std::sqrt(M_PI));
      jz.push_back(gaussian_expectation([&](double z) { return g->z_ratio(z, {h}); }, h, 1.0, 64));
    }
    return widened_x_mc(*g, n, seed, [&](double x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < hs.size(); ++i) {
        const double r = g->x_ratio(x, {hs[i]});
        acc += hw[i] * r * r * jz[i];
      }
      return acc;
    });
  }
  if (const DiscreteHiddenModel* d = model.discrete()) {
    const auto v = hidden_factor_variance(*d);
    return Estimate{*v + 1.0, 0.0, 0};
  }
  return plain_product_mc(model, n, seed, [&](View x, View z, Rng& rng) {
    const Hidden h = model.sample_hidden(rng);
    const double v = model.x_ratio(x, h) * model.z_ratio(z, h);
    return v * v;
  });
}

Estimate gstar_mean_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed) {
  return plain_product_mc(model, n, seed, [&](View x, View z, Rng&) { return model.odds(x, z); });
}

// ---------------------------------------------------------------------------

double transfer_variance(const FiniteModel& p, const FiniteModel& q, std::span<const double> alpha) {
  if (alpha.size() != p.num_z() || q.num_x() != p.num_x() || q.num_z() != p.num_z()) {
    throw std::invalid_argument("transfer_variance: sizes disagree");
  }
  double first = 0.0, second = 0.0;
  for (Eigen::Index z = 0; z < p.pz().size(); ++z) {
    const double a = alpha[static_cast<std::size_t>(z)];
    if (a <= 0.0) {
      if (p.pz()(z) * q.pz()(z) > 0.0 && q.ey_z()(z) != 0.0) {
        throw DomainError("transfer_variance: alpha misses part of the z-support");
      }
      continue;
    }
    const double c = p.pz()(z) / a * q.ey_z()(z);
    for (Eigen::Index x = 0; x < p.px().size(); ++x) {
      if (q.px()(x) == 0.0) continue;
      const double v = c * p.odds_table()(x, z);
      first += q.px()(x) * a * v;
      second += q.px()(x) * a * v * v;
    }
  }
  return std::max(0.0, second - first * first);
}

double label_mean_variance(const FiniteModel& q) {
  std::vector<double> v(q.ey_z().data(), q.ey_z().data() + q.ey_z().size());
  std::vector<double> w(q.pz().data(), q.pz().data() + q.pz().size());
  return weighted_variance(v, w);
}

// ---------------------------------------------------------------------------

std::vector<BoundReport> mi_redundancy_check(const MultiViewModel& model) {
  const Redundancy r = redundancy(model);
  const ConditionalMI mi = conditional_mi(model);
  std::vector<BoundReport> out;
  auto add = [&](const char* name, double eps, double info, double c) {
    BoundReport b;
    b.name = name;
    b.bound = c * info;
    b.estimate = eps;
    b.inputs = {{"constant", c}, {"conditional_mi", info}};
    b.verdict = eps <= *b.bound + 1e-12 ? Verdict::holds : Verdict::violated;
    out.push_back(b);
  };
  add("mi_half_x", r.eps_x, mi.i_yz_given_x, 0.5);
  add("mi_half_z", r.eps_z, mi.i_yx_given_z, 0.5);
  add("mi_two_x", r.eps_x, mi.i_yz_given_x, 2.0);
  add("mi_two_z", r.eps_z, mi.i_yx_given_z, 2.0);
  return out;
}

}  // namespace redlab
