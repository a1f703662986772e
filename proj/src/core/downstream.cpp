#include "redlab/downstream.hpp"

#include <sstream>

namespace redlab {

std::string to_string(Target t) { return t == Target::mu_oracle ? "mu_oracle" : "y_observed"; }

LinearFit fit_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                    const Eigen::VectorXd& row_weight, double lambda, double solver_tol) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("fit_ridge: lambda must be non-negative");
  if (features.rows() == 0) throw std::invalid_argument("fit_ridge: need at least one row");
  if (targets.size() != features.rows() || (row_weight.size() != 0 && row_weight.size() != features.rows())) {
    throw std::invalid_argument("fit_ridge: features, targets and row weights disagree in length");
  }
  const Eigen::VectorXd r = row_weight.size() == 0 ? Eigen::VectorXd::Ones(features.rows()) : row_weight;
  const Eigen::MatrixXd weighted = r.asDiagonal() * features;
  const Eigen::MatrixXd gram = features.transpose() * weighted;
  const Eigen::VectorXd rhs = weighted.transpose() * targets;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_ridge: eigen-decomposition failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 0.0) + lambda;
  Eigen::VectorXd proj = eig.eigenvectors().transpose() * rhs;
  std::size_t dropped = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double d = ev(i) + lambda;
    if (d > solver_tol * top && d > 0.0) {
      proj(i) /= d;
    } else {
      proj(i) = 0.0;
      ++dropped;
    }
  }
  LinearFit out;
  out.w = eig.eigenvectors() * proj;
  out.ridge = lambda;
  out.train_count = static_cast<std::size_t>(features.rows());
  if (!out.w.allFinite()) throw NumericalError("fit_ridge: non-finite weights");
  if (dropped > 0 && lambda == 0.0) {
    std::ostringstream os;
    os << "Gram matrix is rank deficient (" << dropped << " of " << ev.size()
       << " directions below tolerance); returned the minimum-norm solution";
    out.warning = os.str();
  }
  return out;
}

double trace_normalized_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& row_weight, double scale) {
  const Eigen::VectorXd r = row_weight.size() == 0 ? Eigen::VectorXd::Ones(features.rows()) : row_weight;
  const double trace = (r.asDiagonal() * features.cwiseAbs2()).sum();
  return scale * trace / static_cast<double>(std::max<Eigen::Index>(features.cols(), 1));
}

LinearFit fit_ridge(const Embedding& emb, const Dataset& data, Target target, const MultiViewModel& model,
                    double lambda, double solver_tol) {
  if (data.rows.empty()) throw std::invalid_argument("fit_ridge: empty dataset");
  const auto n = static_cast<Eigen::Index>(data.rows.size());
  Eigen::MatrixXd features(n, static_cast<Eigen::Index>(emb.dim()));
  Eigen::VectorXd t(n);
  parallel_for(data.rows.size(), [&](std::size_t i) {
    const Row& row = data.rows[i];
    features.row(static_cast<Eigen::Index>(i)) = emb.embed(row.x).transpose();
    t(static_cast<Eigen::Index>(i)) = target == Target::mu_oracle ? model.mu(row.x) : row.y;
  });
  LinearFit out = fit_ridge(features, t, Eigen::VectorXd(), lambda, solver_tol);
  out.target = target;
  return out;
}

LinearFit fit_oracle(const Embedding& emb, const MultiViewModel& model, double lambda, std::size_t n_fit,
                     std::uint64_t seed, double solver_tol) {
  if (const FiniteModel* f = model.finite()) {
    LinearFit out = fit_ridge(feature_table(emb, f->num_x()), f->mu_table(), f->px(), lambda, solver_tol);
    out.target = Target::mu_oracle;
    out.train_count = 0;
    return out;
  }
  if (n_fit == 0) throw std::invalid_argument("fit_oracle: n_fit must be positive");
  Dataset data;
  data.rows.resize(n_fit);
  for (std::size_t i = 0; i < n_fit; ++i) {
    Rng rng(seed, i);
    data.rows[i].x = model.sample_x(rng);
  }
  return fit_ridge(emb, data, Target::mu_oracle, model, lambda, solver_tol);
}

// ---------------------------------------------------------------------------

RiskReport risk_R(const Eigen::MatrixXd& features, const Eigen::VectorXd& w, const FiniteModel& model) {
  if (features.cols() != w.size()) throw std::invalid_argument("risk_R: weight dimension does not match");
  if (static_cast<std::size_t>(features.rows()) != model.num_x()) {
    throw std::invalid_argument("risk_R: feature table does not cover the x-space");
  }
  const Eigen::VectorXd pred = features * w;
  RiskReport out;
  for (Eigen::Index x = 0; x < pred.size(); ++x) {
    const double px = model.px()(x);
    if (px == 0.0) continue;
    const double d = pred(x) - model.mu_table()(x);
    out.risk += px * d * d;
    for (Eigen::Index z = 0; z < model.joint().cols(); ++z) {
      const double b = pred(x) - model.bayes_table()(x, z);
      out.mse_vs_bayes += model.joint()(x, z) * b * b;
    }
  }
  return out;
}

RiskReport risk_R(const Embedding& emb, const Eigen::VectorXd& w, const MultiViewModel& model,
                  std::size_t n_eval, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(emb.dim()) != w.size()) {
    throw std::invalid_argument("risk_R: weight dimension does not match the embedding");
  }
  if (const FiniteModel* f = model.finite()) return risk_R(feature_table(emb, f->num_x()), w, *f);
  if (n_eval < 2) throw std::invalid_argument("risk_R: Monte Carlo evaluation needs n_eval >= 2");
  std::vector<double> risk(n_eval), mse(n_eval);
  parallel_for(n_eval, [&](std::size_t i) {
    Rng rng(seed, i);
    const Row row = model.sample_row(rng);
    const double pred = emb.embed(row.x).dot(w);
    const double d = pred - model.mu(row.x);
    const double b = pred - model.cond_mean_y_given_xz(row.x, row.z);
    risk[i] = d * d;
    mse[i] = b * b;
  });
  const Estimate r = mean_estimate(risk);
  const Estimate m = mean_estimate(mse);
  RiskReport out;
  out.risk = r.value;
  out.risk_se = r.se;
  out.mse_vs_bayes = m.value;
  out.mse_se = m.se;
  out.n_eval = n_eval;
  out.exact = false;
  return out;
}

RiskReport infimum_risk(const Embedding& emb, const MultiViewModel& model, std::size_t n_eval,
                        std::uint64_t seed) {
  const LinearFit fit = fit_oracle(emb, model, 0.0, n_eval, derive_seed(seed, 1));
  return risk_R(emb, fit.w, model, n_eval, derive_seed(seed, 2));
}

// ---------------------------------------------------------------------------

namespace {

struct Nodes {
  std::vector<double> at;
  std::vector<double> weight;  // already includes p/q
};

// Gauss-Hermite nodes for E_{N(0, var_p)}[f] written as E_{N(0, var_q)}[f p/q].
Nodes widened_nodes(double var_p, double var_q, std::size_t n) {
  const HermiteRule& rule = hermite_rule(n);
  Nodes out;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double t = std::sqrt(2.0 * var_q) * rule.nodes[i];
    const double ratio = std::exp(log_normal_pdf(t, 0.0, var_p) - log_normal_pdf(t, 0.0, var_q));
    out.at.push_back(t);
    out.weight.push_back(rule.weights[i] / std::sqrt(M_PI) * ratio);
  }
  return out;
}

Eigen::MatrixXd eta_rows(const FactorizedEmbedding& emb, const std::vector<double>& xs) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(emb.dim()));
  parallel_for(xs.size(), [&](std::size_t i) { out.row(static_cast<Eigen::Index>(i)) = emb.eta(xs[i]).transpose(); });
  return out;
}

Eigen::MatrixXd psi_rows(const FactorizedEmbedding& emb, const std::vector<double>& zs) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(zs.size()), static_cast<Eigen::Index>(emb.dim()));
  parallel_for(zs.size(), [&](std::size_t i) { out.row(static_cast<Eigen::Index>(i)) = emb.psi(zs[i]).transpose(); });
  return out;
}

constexpr std::size_t kNodes = 96;

}  // namespace

Estimate eps_direct(const FactorizedEmbedding& emb, const MultiViewModel& model, std::size_t n_eval,
                    std::uint64_t seed) {
  if (const FiniteModel* f = model.finite()) {
    Eigen::MatrixXd scores;
    if (emb.tabular()) {
      if (static_cast<std::size_t>(emb.eta_table().rows()) != f->num_x() ||
          static_cast<std::size_t>(emb.psi_table().rows()) != f->num_z()) {
        throw std::invalid_argument("eps_direct: embedding tables do not match the model");
      }
      scores = emb.eta_table() * emb.psi_table().transpose();
    } else {
      std::vector<double> xs(f->num_x()), zs(f->num_z());
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
      for (std::size_t i = 0; i < zs.size(); ++i) zs[i] = static_cast<double>(i);
      scores = eta_rows(emb, xs) * psi_rows(emb, zs).transpose();
    }
    const Eigen::MatrixXd diff = scores - f->odds_table();
    Estimate out;
    out.value = (f->px().transpose() * diff.cwiseAbs2() * f->pz())(0, 0);
    return out;
  }
  const auto* g = dynamic_cast<const GaussianModel*>(&model);
  if (g == nullptr || emb.tabular()) throw UnsupportedModel("eps_direct: no integration route for this model");

  // g*^2 p_X p_Z is widest along x + z, with variance (1+2s2)(1+s2) per
  // axis; the base rule is widened to that.
  const double s2 = g->sigma2();
  const double var_p = 1.0 + s2;
  const double var_q = (1.0 + 2.0 * s2) * (1.0 + s2);
  const Nodes zn = widened_nodes(var_p, var_q, kNodes);
  const Eigen::MatrixXd psi = psi_rows(emb, zn.at);
  const Eigen::Map<const Eigen::VectorXd> zw(zn.weight.data(), static_cast<Eigen::Index>(zn.weight.size()));

  auto inner = [&](const std::vector<double>& xs) {
    const Eigen::MatrixXd scores = eta_rows(emb, xs) * psi.transpose();
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < zn.at.size(); ++j) {
        const double d = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - g->odds(xs[i], zn.at[j]);
        acc += zw(static_cast<Eigen::Index>(j)) * d * d;
      }
      out(static_cast<Eigen::Index>(i)) = acc;
    }
    return out;
  };

  Estimate out;
  if (n_eval == 0) {
    const Nodes xn = widened_nodes(var_p, var_q, kNodes);
    const Eigen::VectorXd vals = inner(xn.at);
    for (std::size_t i = 0; i < xn.at.size(); ++i) out.value += xn.weight[i] * vals(static_cast<Eigen::Index>(i));
    return out;
  }
  if (n_eval < 2) throw std::invalid_argument("eps_direct: Monte Carlo needs n_eval >= 2");
  const double proposal = 2.0 * var_q;
  std::vector<double> xs(n_eval), iw(n_eval);
  for (std::size_t i = 0; i < n_eval; ++i) {
    Rng rng(seed, i);
    xs[i] = std::sqrt(proposal) * rng.normal();
    iw[i] = std::exp(log_normal_pdf(xs[i], 0.0, var_p) - log_normal_pdf(xs[i], 0.0, proposal));
  }
  std::vector<double> terms(n_eval);
  constexpr std::size_t chunk = 2048;
  for (std::size_t from = 0; from < n_eval; from += chunk) {
    const std::size_t to = std::min(n_eval, from + chunk);
    const Eigen::VectorXd vals = inner(std::vector<double>(xs.begin() + from, xs.begin() + to));
    for (std::size_t i = from; i < to; ++i) terms[i] = iw[i] * vals(static_cast<Eigen::Index>(i - from));
  }
  out = mean_estimate(terms);
  return out;
}

}  // namespace redlab
