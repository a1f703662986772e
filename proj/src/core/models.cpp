#include "redlab/models.hpp"

#include <cmath>
#include <sstream>

namespace redlab {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::discrete: return "discrete";
    case ModelKind::topic: return "topic";
    case ModelKind::gaussian: return "gaussian";
  }
  return "unknown";
}

namespace {

std::string describe(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "invalid model (" << v.size() << " violation" << (v.size() == 1 ? "" : "s") << ")";
  for (const auto& item : v) {
    os << "; " << item.field << ": " << item.message;
    if (item.slack > 0.0) os << " [slack " << item.slack << "]";
  }
  return os.str();
}

}  // namespace

ModelError::ModelError(std::vector<Violation> v) : Error(describe(v)), violations(std::move(v)) {}

Dataset MultiViewModel::sample(std::size_t n, std::uint64_t seed) const {
  if (n == 0) throw std::invalid_argument("sample: n must be at least 1");
  Dataset data;
  data.seed = seed;
  data.model_id = id();
  data.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, i);
    data.rows[i] = sample_row(rng);
  }
  return data;
}

double MultiViewModel::odds(View x, View z) const { return std::exp(log_odds(x, z)); }

// ---------------------------------------------------------------------------

FiniteModel::FiniteModel(FiniteParts parts)
    : MultiViewModel(std::move(parts.id)),
      joint_(std::move(parts.joint)),
      bayes_(std::move(parts.bayes)),
      ey2_(parts.ey2) {
  px_ = joint_.rowwise().sum();
  pz_ = joint_.colwise().sum().transpose();
  const auto nx = joint_.rows();
  const auto nz = joint_.cols();
  odds_.resize(nx, nz);
  ey_x_ = Eigen::VectorXd::Zero(nx);
  ey_z_ = Eigen::VectorXd::Zero(nz);
  for (Eigen::Index x = 0; x < nx; ++x) {
    for (Eigen::Index z = 0; z < nz; ++z) {
      odds_(x, z) = joint_(x, z) / (px_(x) * pz_(z));
      ey_x_(x) += joint_(x, z) * bayes_(x, z);
      ey_z_(z) += joint_(x, z) * bayes_(x, z);
    }
  }
  ey_x_.array() /= px_.array();
  ey_z_.array() /= pz_.array();
  mu_ = Eigen::VectorXd::Zero(nx);
  for (Eigen::Index x = 0; x < nx; ++x) {
    for (Eigen::Index z = 0; z < nz; ++z) mu_(x) += joint_(x, z) * ey_z_(z);
    mu_(x) /= px_(x);
  }
}

namespace {

std::size_t checked_index(View v, std::size_t size, const char* which) {
  if (!std::isfinite(v) || v != std::floor(v) || v < 0.0 || v >= static_cast<double>(size)) {
    std::ostringstream os;
    os << which << " view " << v << " outside support {0.." << size - 1 << "}";
    throw DomainError(os.str());
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::size_t FiniteModel::x_index(View x) const { return checked_index(x, num_x(), "x"); }
std::size_t FiniteModel::z_index(View z) const { return checked_index(z, num_z(), "z"); }

View FiniteModel::sample_x(Rng& rng) const {
  return static_cast<View>(rng.categorical({px_.data(), static_cast<std::size_t>(px_.size())}));
}

View FiniteModel::sample_z(Rng& rng) const {
  return static_cast<View>(rng.categorical({pz_.data(), static_cast<std::size_t>(pz_.size())}));
}

double FiniteModel::log_odds(View x, View z) const {
  return std::log(odds_(x_index(x), z_index(z)));
}

double FiniteModel::cond_mean_y_given_x(View x) const { return ey_x_(x_index(x)); }
double FiniteModel::cond_mean_y_given_z(View z) const { return ey_z_(z_index(z)); }
double FiniteModel::cond_mean_y_given_xz(View x, View z) const {
  return bayes_(x_index(x), z_index(z));
}
double FiniteModel::mu(View x) const { return mu_(x_index(x)); }

// ---------------------------------------------------------------------------

Redundancy redundancy(const MultiViewModel& model) {
  if (const auto* g = dynamic_cast<const GaussianModel*>(&model)) {
    const Redundancy low = g->redundancy_quadrature(64);
    Redundancy high = g->redundancy_quadrature(128);
    const double diff = std::max(std::abs(high.eps_x - low.eps_x), std::abs(high.eps_z - low.eps_z));
    high.quadrature_error = diff;
    if (!(diff <= 1e-6)) {
      std::ostringstream os;
      os << "redundancy quadrature did not converge for sigma2=" << g->sigma2()
         << ": eps_x(64)=" << low.eps_x << " eps_x(128)=" << high.eps_x << " |diff|=" << diff;
      throw NumericalError(os.str());
    }
    return high;
  }
  const FiniteModel* f = model.finite();
  if (f == nullptr) throw UnsupportedModel("redundancy: unsupported model kind");
  Redundancy r;
  const auto& joint = f->joint();
  const auto& bayes = f->bayes_table();
  for (Eigen::Index x = 0; x < joint.rows(); ++x) {
    for (Eigen::Index z = 0; z < joint.cols(); ++z) {
      const double dx = f->ey_x()(x) - bayes(x, z);
      const double dz = f->ey_z()(z) - bayes(x, z);
      r.eps_x += joint(x, z) * dx * dx;
      r.eps_z += joint(x, z) * dz * dz;
    }
  }
  r.eps_mu = r.eps_x + 2.0 * std::sqrt(r.eps_x * r.eps_z) + r.eps_z;
  return r;
}

ConditionalMI conditional_mi(const MultiViewModel& model) {
  const DiscreteHiddenModel* d = model.discrete();
  if (d == nullptr) {
    throw UnsupportedModel("conditional_mi is only defined for discrete hidden-variable models, got " +
                           to_string(model.kind()));
  }
  return d->conditional_mi();
}

Estimate mu_bayes_gap_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed) {
  const Dataset data = model.sample(n, seed);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Row& r = data.rows[i];
    const double d = model.mu(r.x) - model.cond_mean_y_given_xz(r.x, r.z);
    sq[i] = d * d;
  }
  return mean_estimate(sq);
}

}  // namespace redlab
