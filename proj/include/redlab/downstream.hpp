#pragma once

// Linear prediction on embeddings and the risk functionals measured against
// the exact oracles.

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "redlab/embeddings.hpp"

namespace redlab {

enum class Target { y_observed, mu_oracle };

std::string to_string(Target t);

struct LinearFit {
  Eigen::VectorXd w;
  double ridge = 0.0;
  std::size_t train_count = 0;
  Target target = Target::mu_oracle;
  /// Set when lambda = 0 and the Gram matrix was rank deficient.
  std::optional<std::string> warning;
};

/// Minimizes sum_i r_i (w^T phi_i - t_i)^2 + lambda |w|^2 through the normal
/// equations. Eigenvalues below solver_tol * largest are dropped, which gives
/// the minimum-norm solution when lambda = 0. `row_weight` may be empty
/// (unit weights).
LinearFit fit_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                    const Eigen::VectorXd& row_weight, double lambda, double solver_tol = 1e-12);

/// lambda = scale * trace(G) / m for the weighted Gram matrix G.
double trace_normalized_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& row_weight, double scale);

/// Fit on sampled rows, against observed y or the oracle mu.
LinearFit fit_ridge(const Embedding& emb, const Dataset& data, Target target, const MultiViewModel& model,
                    double lambda, double solver_tol = 1e-12);

/// Population fit against mu: exact p_X weights on finite models, otherwise
/// an i.i.d. sample of `n_fit` x-draws.
LinearFit fit_oracle(const Embedding& emb, const MultiViewModel& model, double lambda = 0.0,
                     std::size_t n_fit = 100000, std::uint64_t seed = 0, double solver_tol = 1e-12);

struct RiskReport {
  double risk = 0.0;          // E[(w^T phi(X) - mu(X))^2]
  double mse_vs_bayes = 0.0;  // E[(w^T phi(X) - E[Y | X, Z])^2]
  double risk_se = 0.0;
  double mse_se = 0.0;
  std::size_t n_eval = 0;     // 0 for exact evaluation
  bool exact = true;
};

/// Exact on finite models; Monte Carlo with `n_eval` rows otherwise.
RiskReport risk_R(const Embedding& emb, const Eigen::VectorXd& w, const MultiViewModel& model,
                  std::size_t n_eval = 100000, std::uint64_t seed = 0);

/// Same risk with the features already tabulated (rows = x).
RiskReport risk_R(const Eigen::MatrixXd& features, const Eigen::VectorXd& w, const FiniteModel& model);

/// inf_w of the risk: the lambda = 0 oracle fit, evaluated.
RiskReport infimum_risk(const Embedding& emb, const MultiViewModel& model, std::size_t n_eval = 100000,
                        std::uint64_t seed = 0);

/// E[(eta(X)^T psi(Z~) - g*(X, Z~))^2] under p_X x p_Z. Exact on finite
/// models. For the Gaussian model the x-integral is importance-sampled from a
/// widened normal and the inner z-integral uses Gauss-Hermite quadrature;
/// n_eval = 0 switches the outer integral to quadrature as well.
Estimate eps_direct(const FactorizedEmbedding& emb, const MultiViewModel& model, std::size_t n_eval = 0,
                    std::uint64_t seed = 0);

}  // namespace redlab
