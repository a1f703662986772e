#pragma once

// Closed-form theoretical quantities and bound/estimate comparisons.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "redlab/models.hpp"

namespace redlab {

enum class Verdict { holds, violated, not_applicable, exceeded };

std::string to_string(Verdict v);

struct BoundReport {
  std::string name;
  std::optional<double> bound;  // nullopt means unbounded
  double estimate = 0.0;
  double estimate_se = 0.0;
  std::map<std::string, double> inputs;
  Verdict verdict = Verdict::not_applicable;
};

/// holds iff estimate <= bound + 3 se; not_applicable for an unbounded bound.
Verdict judge_upper(double estimate, double se, const std::optional<double>& bound);
/// holds iff |estimate - target| <= 3 se (plus `slack` for deterministic values).
Verdict judge_equal(double estimate, double se, double target, double slack = 0.0);

// ---------------------------------------------------------------------------
// Bound formulas
// ---------------------------------------------------------------------------

/// eps_X + 2 sqrt(eps_X eps_Z) + eps_Z: the gap between mu and E[Y | X, Z].
double mu_gap_bound(double eps_x, double eps_z);

/// 2 variance / floor(m / log2(1/delta)). Throws when the floor is 0.
double landmark_block_bound(double variance, std::size_t m, double delta);

/// eps_mu + 2 sqrt(eps_mu eps_lm) + eps_lm.
double landmark_risk_bound(double eps_mu, double eps_lm);

/// 2 eps_lm + 4 (1+g)^2 sqrt(2 eps_opt eps_lm) + 16 (1+g)^4 eps_opt; nullopt
/// for unbounded g_max.
std::optional<double> learned_landmark_bound(double eps_lm, double eps_opt_lm, const std::optional<double>& g_max);

/// E[Y^2] (1+g)^4 eps_opt; nullopt for unbounded g_max.
std::optional<double> direct_risk_bound(double ey2, const std::optional<double>& g_max, double eps_opt_direct);

/// E[Y^2] eps_direct: risk of eta with the weights E[E[Y|Z] psi(Z)].
double factorized_risk_bound(double ey2, double eps_direct);

// ---------------------------------------------------------------------------
// Model quantities
// ---------------------------------------------------------------------------

/// var(E[Y | Z1] g*(X, Z1)) with X, Z1 independent. Exact on finite models;
/// importance-sampled Monte Carlo with n_mc draws for the Gaussian model.
Estimate landmark_variance(const MultiViewModel& model, std::size_t n_mc = 100000, std::uint64_t seed = 0);

/// sup g*; nullopt (unbounded) for the Gaussian model.
std::optional<double> g_max(const MultiViewModel& model);

struct GaussianClosedForms {
  double second_moment_gstar = 0.0;     // (1+s2)^2 / (1+2 s2)
  std::optional<double> direct_moment;  // (1+s2)^2 / sqrt(1 - 4 s2^2), only for s2 < 1/2
};

GaussianClosedForms gaussian_closed_forms(double sigma2);

struct TopicClosedForms {
  double second_moment_gstar = 0.0;      // E[g*(X, Z~)^2]
  double fourth_moment_quantity = 0.0;   // K^3 (E[T1^4] + (K-1) E[T1^2 T2^2])
};

/// Dirichlet moments through log-Gamma differences.
TopicClosedForms topic_closed_forms(std::size_t k, double alpha);

/// var of x_ratio(X, H) z_ratio(Z~, H) under p_X x p_Z x p_H. Exact sum for
/// discrete models; closed form minus 1 for topic and Gaussian models;
/// nullopt for the Gaussian model at s2 >= 1/2, where it is infinite.
std::optional<double> hidden_factor_variance(const MultiViewModel& model);

// ---------------------------------------------------------------------------
// Monte Carlo cross-checks
// ---------------------------------------------------------------------------

/// E[g*(X, Z~)^2] under p_X x p_Z. Topic: plain Monte Carlo. Gaussian:
/// x importance-sampled from a widened normal, inner z-integral by
/// Gauss-Hermite. Exact (se 0) on discrete models.
Estimate gstar_second_moment_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed);

/// E[(x_ratio(X, H) z_ratio(Z~, H))^2] under p_X x p_Z x p_H, same routes.
Estimate hidden_moment_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed);

/// E[g*(X, Z~)] under p_X x p_Z (should be 1), plain Monte Carlo.
Estimate gstar_mean_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Transfer
// ---------------------------------------------------------------------------

/// var over X ~ q_X, Z ~ alpha of (p_Z/alpha)(Z) E_q[Y | Z] g*_p(X, Z). The
/// transfer bound is landmark_block_bound of this variance.
double transfer_variance(const FiniteModel& p, const FiniteModel& q, std::span<const double> alpha);

/// var over Z ~ q_Z of E_q[Y | Z].
double label_mean_variance(const FiniteModel& q);

// ---------------------------------------------------------------------------
// Redundancy versus conditional mutual information
// ---------------------------------------------------------------------------

/// Four rows, all exact: eps_X <= c I(Y;Z|X) and eps_Z <= c I(Y;X|Z) for the
/// stated constant c = 1/2 (names mi_half_x, mi_half_z) and for c = 2
/// (mi_two_x, mi_two_z). Only the c = 2 form holds in general for Y in
/// [-1, 1].
std::vector<BoundReport> mi_redundancy_check(const MultiViewModel& model);

}  // namespace redlab
