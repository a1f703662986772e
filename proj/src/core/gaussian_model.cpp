#include <array>
#include <cmath>
#include <sstream>

#include "redlab/models.hpp"

namespace redlab {

namespace {

double label_of(double h) { return 2.0 * normal_cdf(h) - 1.0; }

// E[2 Phi(W) - 1] for W ~ N(mean, var).
double mean_label(double mean, double var) { return 2.0 * normal_cdf(mean / std::sqrt(1.0 + var)) - 1.0; }

}  // namespace

std::vector<Violation> GaussianModel::validate(double sigma2) {
  std::vector<Violation> out;
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    std::ostringstream os;
    os << "sigma2 = " << sigma2 << " must be positive and finite";
    out.push_back({"sigma2", os.str(), std::isfinite(sigma2) ? -sigma2 : 0.0});
  }
  return out;
}

GaussianModel::GaussianModel(double sigma2, std::string id)
    : MultiViewModel(std::move(id)), sigma2_(sigma2) {
  auto violations = validate(sigma2);
  if (!violations.empty()) throw ModelError(std::move(violations));

  // Cross-check every closed form against quadrature before trusting it.
  constexpr double kTol = 1e-8;
  constexpr std::array<double, 7> grid = {-4.0, -1.5, -0.3, 0.0, 0.7, 2.0, 5.0};
  double worst = 0.0;
  for (double a : grid) {
    worst = std::max(worst, std::abs(cond_mean_y_given_z(a) - cond_mean_y_given_z_quadrature(a)));
    worst = std::max(worst, std::abs(mu(a) - mu_quadrature(a)));
    for (double b : grid) {
      worst = std::max(worst, std::abs(cond_mean_y_given_xz(a, b) - cond_mean_y_given_xz_quadrature(a, b)));
    }
  }
  fallback_ = !(worst <= kTol);
}

double GaussianModel::log_marginal(View v) const { return log_normal_pdf(v, 0.0, 1.0 + sigma2_); }

double GaussianModel::log_odds(View x, View z) const {
  if (!std::isfinite(x) || !std::isfinite(z)) throw DomainError("gaussian view must be finite");
  const double s = sigma2_;
  const double det = 1.0 + 2.0 * s;
  const double quad = ((1.0 + s) * (x * x + z * z) - 2.0 * s * x * z) / det;
  const double log_joint = -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
  return log_joint - log_marginal(x) - log_marginal(z);
}

double GaussianModel::cond_mean_y_given_z(View z) const {
  if (!std::isfinite(z)) throw DomainError("gaussian view must be finite");
  if (fallback_) return cond_mean_y_given_z_quadrature(z);
  const double c = sigma2_ / (1.0 + sigma2_);
  return mean_label(c * z, c);
}

double GaussianModel::cond_mean_y_given_x(View x) const { return cond_mean_y_given_z(x); }

double GaussianModel::cond_mean_y_given_xz(View x, View z) const {
  if (!std::isfinite(x) || !std::isfinite(z)) throw DomainError("gaussian view must be finite");
  if (fallback_) return cond_mean_y_given_xz_quadrature(x, z);
  const double det = 1.0 + 2.0 * sigma2_;
  return mean_label(sigma2_ * (x + z) / det, sigma2_ / det);
}

double GaussianModel::mu(View x) const {
  if (!std::isfinite(x)) throw DomainError("gaussian view must be finite");
  if (fallback_) return mu_quadrature(x);
  // E[Y | Z = z] = 2 Phi(a z) - 1 and Z | X = x ~ N(c x, 1 + c).
  const double c = sigma2_ / (1.0 + sigma2_);
  const double a = c / std::sqrt(1.0 + c);
  return 2.0 * normal_cdf(a * c * x / std::sqrt(1.0 + a * a * (1.0 + c))) - 1.0;
}

double GaussianModel::second_moment_y() const {
  // E[Phi(H)^2] = P(U1 < H, U2 < H), a bivariate orthant probability.
  return 2.0 / M_PI * std::asin(sigma2_ / (1.0 + sigma2_));
}

double GaussianModel::cond_mean_y_given_z_quadrature(View z, std::size_t nodes) const {
  const double c = sigma2_ / (1.0 + sigma2_);
  return gaussian_expectation(label_of, c * z, c, nodes);
}

double GaussianModel::cond_mean_y_given_xz_quadrature(View x, View z, std::size_t nodes) const {
  const double det = 1.0 + 2.0 * sigma2_;
  return gaussian_expectation(label_of, sigma2_ * (x + z) / det, sigma2_ / det, nodes);
}

double GaussianModel::mu_quadrature(View x, std::size_t nodes) const {
  const double c = sigma2_ / (1.0 + sigma2_);
  return gaussian_expectation([this](double z) { return cond_mean_y_given_z_quadrature(z); },
                              c * x, 1.0 + c, nodes);
}

Redundancy GaussianModel::redundancy_quadrature(std::size_t nodes) const {
  // s = (x+z)/sqrt2 ~ N(0, 1+2 sigma2) and d = (x-z)/sqrt2 ~ N(0, 1) are independent.
  const HermiteRule& rule = hermite_rule(nodes);
  const double ss = std::sqrt(2.0 * (1.0 + 2.0 * sigma2_));
  const double sd = std::sqrt(2.0);
  Redundancy r;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double s = ss * rule.nodes[i];
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double d = sd * rule.nodes[j];
      const double x = (s + d) / std::sqrt(2.0);
      const double z = (s - d) / std::sqrt(2.0);
      const double w = rule.weights[i] * rule.weights[j] / M_PI;
      const double bayes = cond_mean_y_given_xz(x, z);
      const double dx = cond_mean_y_given_x(x) - bayes;
      const double dz = cond_mean_y_given_z(z) - bayes;
      r.eps_x += w * dx * dx;
      r.eps_z += w * dz * dz;
    }
  }
  r.eps_mu = r.eps_x + 2.0 * std::sqrt(r.eps_x * r.eps_z) + r.eps_z;
  return r;
}

Row GaussianModel::sample_row(Rng& rng) const {
  const double h = std::sqrt(sigma2_) * rng.normal();
  Row row;
  row.x = h + rng.normal();
  row.z = h + rng.normal();
  row.y = label_of(h);
  return row;
}

View GaussianModel::sample_x(Rng& rng) const { return std::sqrt(1.0 + sigma2_) * rng.normal(); }
View GaussianModel::sample_z(Rng& rng) const { return std::sqrt(1.0 + sigma2_) * rng.normal(); }

Hidden GaussianModel::sample_hidden(Rng& rng) const { return {std::sqrt(sigma2_) * rng.normal()}; }

double GaussianModel::x_ratio(View x, const Hidden& h) const {
  return std::exp(log_normal_pdf(x, h.at(0), 1.0) - log_marginal(x));
}

double GaussianModel::z_ratio(View z, const Hidden& h) const { return x_ratio(z, h); }

}  // namespace redlab
