#pragma once

// Reference computations used only by tests. Each one takes a different
// route from the library code: brute-force enumeration over (h, x, z),
// direct numerical integration, or explicit matrix algebra.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>

#include "redlab/models.hpp"

namespace oracle {

/// Trapezoid rule on [lo, hi] with n intervals.
inline double integrate(const std::function<double(double)>& f, double lo, double hi, int n = 40000) {
  const double h = (hi - lo) / n;
  double acc = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < n; ++i) acc += f(lo + i * h);
  return acc * h;
}

/// Composite Simpson rule on [lo, hi] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 2000) {
  const double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + i * h);
  return acc * h / 3.0;
}

inline double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double npdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}

/// E[theta_1^a theta_2^b] for (theta_1, theta_2) ~ Dirichlet(alpha, alpha), alpha >= 1.
inline double dirichlet2_moment(double alpha, int a, int b) {
  auto dens = [&](double t) { return std::pow(t, alpha - 1.0) * std::pow(1.0 - t, alpha - 1.0); };
  const double z = simpson(dens, 0.0, 1.0);
  return simpson([&](double t) { return std::pow(t, a) * std::pow(1.0 - t, b) * dens(t); }, 0.0, 1.0) / z;
}

/// E[theta_1 | n1 tokens from topic 1, n2 from topic 2] for K = 2.
inline double dirichlet2_posterior_mean(double alpha, int n1, int n2) {
  return dirichlet2_moment(alpha, n1 + 1, n2) / dirichlet2_moment(alpha, n1, n2);
}

inline double gaussian_log_odds(double s2, double x, double z) {
  Eigen::Matrix2d sigma;
  sigma << 1.0 + s2, s2, s2, 1.0 + s2;
  const Eigen::Vector2d v(x, z);
  const double log_joint =
      -std::log(2.0 * M_PI) - 0.5 * std::log(sigma.determinant()) - 0.5 * v.dot(sigma.inverse() * v);
  auto log_marg = [&](double t) { return -0.5 * std::log(2.0 * M_PI * (1.0 + s2)) - t * t / (2.0 * (1.0 + s2)); };
  return log_joint - log_marg(x) - log_marg(z);
}

/// E[2 Phi(H) - 1 | Z = z] by integrating over the unnormalized posterior of H.
inline double gaussian_cond_mean_z(double s2, double z, int n = 40000) {
  const double lim = 12.0 * std::sqrt(s2) + std::abs(z) + 12.0;
  auto post = [&](double h) { return npdf(h, 0.0, s2) * npdf(z, h, 1.0); };
  const double num = integrate([&](double h) { return (2.0 * phi(h) - 1.0) * post(h); }, -lim, lim, n);
  return num / integrate(post, -lim, lim, n);
}

/// mu(x) = integral of E[Y | Z = z] p(z | x) dz.
inline double gaussian_mu(double s2, double x) {
  const double lim = 12.0 * std::sqrt(1.0 + s2) + std::abs(x);
  auto cond = [&](double z) {
    return std::exp(gaussian_log_odds(s2, x, z)) * npdf(z, 0.0, 1.0 + s2);
  };
  return integrate([&](double z) { return gaussian_cond_mean_z(s2, z, 1500) * cond(z); }, -lim, lim, 1500);
}

inline double gaussian_second_moment_y(double s2) {
  const double lim = 14.0 * std::sqrt(s2);
  return integrate([&](double h) { return std::pow(2.0 * phi(h) - 1.0, 2) * npdf(h, 0.0, s2); }, -lim, lim);
}

struct Eps {
  double eps_x = 0.0;
  double eps_z = 0.0;
};

/// Enumerates every (h, x, z) triple of a discrete spec.
inline Eps brute_force_redundancy(const redlab::DiscreteSpec& s) {
  const auto nh = static_cast<int>(s.prior.size());
  const auto nx = static_cast<int>(s.x_given_h.cols());
  const auto nz = static_cast<int>(s.z_given_h.cols());
  auto p = [&](int h, int x, int z) { return s.prior[h] * s.x_given_h(h, x) * s.z_given_h(h, z); };
  Eps e;
  for (int x = 0; x < nx; ++x) {
    for (int z = 0; z < nz; ++z) {
      double pxz = 0, yxz = 0, px = 0, yx = 0, pz = 0, yz = 0;
      for (int h = 0; h < nh; ++h) {
        pxz += p(h, x, z);
        yxz += p(h, x, z) * s.label_of_h[h];
        for (int t = 0; t < nz; ++t) {
          px += p(h, x, t);
          yx += p(h, x, t) * s.label_of_h[h];
        }
        for (int t = 0; t < nx; ++t) {
          pz += p(h, t, z);
          yz += p(h, t, z) * s.label_of_h[h];
        }
      }
      if (pxz <= 0.0) continue;
      const double bayes = yxz / pxz;
      e.eps_x += pxz * std::pow(yx / px - bayes, 2);
      e.eps_z += pxz * std::pow(yz / pz - bayes, 2);
    }
  }
  return e;
}

/// I(Y; Z | X) = H(Y | X) - H(Y | X, Z), and symmetrically.
inline redlab::ConditionalMI brute_force_cmi(const redlab::DiscreteSpec& s) {
  const auto nh = static_cast<int>(s.prior.size());
  const auto nx = static_cast<int>(s.x_given_h.cols());
  const auto nz = static_cast<int>(s.z_given_h.cols());
  std::map<double, Eigen::MatrixXd> pxzy;
  for (int h = 0; h < nh; ++h) {
    auto& m = pxzy[s.label_of_h[h]];
    if (m.size() == 0) m = Eigen::MatrixXd::Zero(nx, nz);
    for (int x = 0; x < nx; ++x)
      for (int z = 0; z < nz; ++z) m(x, z) += s.prior[h] * s.x_given_h(h, x) * s.z_given_h(h, z);
  }
  Eigen::MatrixXd pxz = Eigen::MatrixXd::Zero(nx, nz);
  for (auto& [y, m] : pxzy) pxz += m;
  auto xlogx = [](double p, double q) { return p > 0.0 ? -p * std::log(p / q) : 0.0; };
  double h_y_xz = 0, h_y_x = 0, h_y_z = 0;
  for (auto& [y, m] : pxzy) {
    for (int x = 0; x < nx; ++x)
      for (int z = 0; z < nz; ++z) h_y_xz += xlogx(m(x, z), pxz(x, z));
    for (int x = 0; x < nx; ++x) h_y_x += xlogx(m.row(x).sum(), pxz.row(x).sum());
    for (int z = 0; z < nz; ++z) h_y_z += xlogx(m.col(z).sum(), pxz.col(z).sum());
  }
  return {h_y_x - h_y_xz, h_y_z - h_y_xz};
}

}  // namespace oracle
