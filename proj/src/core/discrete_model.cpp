#include <cmath>
#include <map>
#include <sstream>

#include "redlab/models.hpp"

namespace redlab {

namespace {

constexpr double kSumTol = 1e-12;

void check_stochastic_rows(const Eigen::MatrixXd& m, const std::string& name,
                           std::vector<Violation>& out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c)) || m(r, c) < 0.0) {
        std::ostringstream os;
        os << "entry (" << r << "," << c << ") = " << m(r, c) << " is negative or non-finite";
        out.push_back({name, os.str(), std::isfinite(m(r, c)) ? -m(r, c) : 0.0});
      }
    }
    const double sum = m.row(r).sum();
    if (!(std::abs(sum - 1.0) <= kSumTol)) {
      std::ostringstream os;
      os << "row " << r << " sums to " << sum << ", expected 1 within " << kSumTol;
      out.push_back({name, os.str(), std::abs(sum - 1.0) - kSumTol});
    }
  }
}

FiniteParts discrete_parts(const DiscreteSpec& spec) {
  auto violations = DiscreteHiddenModel::validate(spec);
  if (!violations.empty()) throw ModelError(std::move(violations));
  const auto s = static_cast<Eigen::Index>(spec.prior.size());
  const auto nx = spec.x_given_h.cols();
  const auto nz = spec.z_given_h.cols();
  FiniteParts parts;
  parts.id = spec.id;
  parts.joint = Eigen::MatrixXd::Zero(nx, nz);
  Eigen::MatrixXd weighted_y = Eigen::MatrixXd::Zero(nx, nz);
  for (Eigen::Index h = 0; h < s; ++h) {
    const double ph = spec.prior[static_cast<std::size_t>(h)];
    const Eigen::MatrixXd cell =
        ph * spec.x_given_h.row(h).transpose() * spec.z_given_h.row(h);
    parts.joint += cell;
    weighted_y += spec.label_of_h[static_cast<std::size_t>(h)] * cell;
    parts.ey2 += ph * spec.label_of_h[static_cast<std::size_t>(h)] *
                 spec.label_of_h[static_cast<std::size_t>(h)];
  }
  parts.bayes = Eigen::MatrixXd::Zero(nx, nz);
  for (Eigen::Index x = 0; x < nx; ++x) {
    for (Eigen::Index z = 0; z < nz; ++z) {
      // Cells with zero joint mass are never evaluated under any expectation;
      // 0 keeps the table finite.
      if (parts.joint(x, z) > 0.0) parts.bayes(x, z) = weighted_y(x, z) / parts.joint(x, z);
    }
  }
  return parts;
}

}  // namespace

std::vector<Violation> DiscreteHiddenModel::validate(const DiscreteSpec& spec) {
  std::vector<Violation> out;
  const std::size_t s = spec.prior.size();
  if (s == 0) out.push_back({"prior", "num_hidden must be positive", 0.0});
  if (spec.x_given_h.cols() == 0) out.push_back({"x_given_h", "num_x must be positive", 0.0});
  if (spec.z_given_h.cols() == 0) out.push_back({"z_given_h", "num_z must be positive", 0.0});
  if (static_cast<std::size_t>(spec.x_given_h.rows()) != s) {
    out.push_back({"x_given_h", "has " + std::to_string(spec.x_given_h.rows()) +
                                    " rows, expected num_hidden = " + std::to_string(s), 0.0});
  }
  if (static_cast<std::size_t>(spec.z_given_h.rows()) != s) {
    out.push_back({"z_given_h", "has " + std::to_string(spec.z_given_h.rows()) +
                                    " rows, expected num_hidden = " + std::to_string(s), 0.0});
  }
  if (spec.label_of_h.size() != s) {
    out.push_back({"label_of_h", "has " + std::to_string(spec.label_of_h.size()) +
                                     " entries, expected num_hidden = " + std::to_string(s), 0.0});
  }
  if (!out.empty()) return out;

  double total = 0.0;
  for (std::size_t h = 0; h < s; ++h) {
    const double p = spec.prior[h];
    if (!std::isfinite(p) || p < 0.0) {
      out.push_back({"prior", "entry " + std::to_string(h) + " is negative or non-finite",
                     std::isfinite(p) ? -p : 0.0});
    }
    total += p;
  }
  if (!(std::abs(total - 1.0) <= kSumTol)) {
    std::ostringstream os;
    os << "sums to " << total << ", expected 1 within " << kSumTol;
    out.push_back({"prior", os.str(), std::abs(total - 1.0) - kSumTol});
  }
  check_stochastic_rows(spec.x_given_h, "x_given_h", out);
  check_stochastic_rows(spec.z_given_h, "z_given_h", out);
  for (std::size_t h = 0; h < s; ++h) {
    const double y = spec.label_of_h[h];
    if (!(std::abs(y) <= 1.0)) {
      std::ostringstream os;
      os << "entry " << h << " = " << y << " outside [-1, 1]";
      out.push_back({"label_of_h", os.str(), std::isfinite(y) ? std::abs(y) - 1.0 : 0.0});
    }
  }
  if (!out.empty()) return out;

  Eigen::VectorXd prior(static_cast<Eigen::Index>(s));
  for (std::size_t h = 0; h < s; ++h) prior(static_cast<Eigen::Index>(h)) = spec.prior[h];
  const Eigen::VectorXd px = spec.x_given_h.transpose() * prior;
  const Eigen::VectorXd pz = spec.z_given_h.transpose() * prior;
  for (Eigen::Index x = 0; x < px.size(); ++x) {
    if (!(px(x) > 0.0)) {
      out.push_back({"x_given_h", "marginal p_X(" + std::to_string(x) + ") = 0 (support condition)", 0.0});
    }
  }
  for (Eigen::Index z = 0; z < pz.size(); ++z) {
    if (!(pz(z) > 0.0)) {
      out.push_back({"z_given_h", "marginal p_Z(" + std::to_string(z) + ") = 0 (support condition)", 0.0});
    }
  }
  return out;
}

DiscreteHiddenModel::DiscreteHiddenModel(DiscreteSpec spec)
    : FiniteModel(discrete_parts(spec)), spec_(std::move(spec)) {
  x_rows_ = spec_.x_given_h;
  z_rows_ = spec_.z_given_h;
}

Row DiscreteHiddenModel::sample_row(Rng& rng) const {
  const std::size_t h = rng.categorical(spec_.prior);
  const auto hi = static_cast<Eigen::Index>(h);
  const auto nx = static_cast<std::size_t>(x_rows_.cols());
  const auto nz = static_cast<std::size_t>(z_rows_.cols());
  Row row;
  row.x = static_cast<View>(rng.categorical({x_rows_.row(hi).data(), nx}));
  row.z = static_cast<View>(rng.categorical({z_rows_.row(hi).data(), nz}));
  row.y = spec_.label_of_h[h];
  return row;
}

Hidden DiscreteHiddenModel::sample_hidden(Rng& rng) const {
  return {static_cast<double>(rng.categorical(spec_.prior))};
}

double DiscreteHiddenModel::x_ratio(View x, const Hidden& h) const {
  const std::size_t xi = x_index(x);
  return spec_.x_given_h(static_cast<Eigen::Index>(h.at(0)), static_cast<Eigen::Index>(xi)) /
         px()(static_cast<Eigen::Index>(xi));
}

double DiscreteHiddenModel::z_ratio(View z, const Hidden& h) const {
  const std::size_t zi = z_index(z);
  return spec_.z_given_h(static_cast<Eigen::Index>(h.at(0)), static_cast<Eigen::Index>(zi)) /
         pz()(static_cast<Eigen::Index>(zi));
}

ConditionalMI DiscreteHiddenModel::conditional_mi() const {
  // Group hidden states by label value: Y is a function of H.
  std::map<double, std::vector<std::size_t>> by_label;
  for (std::size_t h = 0; h < spec_.prior.size(); ++h) by_label[spec_.label_of_h[h]].push_back(h);

  const auto nx = static_cast<Eigen::Index>(num_x());
  const auto nz = static_cast<Eigen::Index>(num_z());
  std::vector<Eigen::MatrixXd> pxzy;
  pxzy.reserve(by_label.size());
  for (const auto& [label, states] : by_label) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nx, nz);
    for (std::size_t h : states) {
      const auto hi = static_cast<Eigen::Index>(h);
      m += spec_.prior[h] * spec_.x_given_h.row(hi).transpose() * spec_.z_given_h.row(hi);
    }
    pxzy.push_back(std::move(m));
  }

  ConditionalMI mi;
  const auto& pj = joint();
  for (const auto& m : pxzy) {
    const Eigen::VectorXd pxy = m.rowwise().sum();
    const Eigen::VectorXd pzy = m.colwise().sum().transpose();
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index z = 0; z < nz; ++z) {
        const double p = m(x, z);
        if (p <= 0.0) continue;
        const double y_given_xz = p / pj(x, z);
        mi.i_yz_given_x += p * std::log(y_given_xz / (pxy(x) / px()(x)));
        mi.i_yx_given_z += p * std::log(y_given_xz / (pzy(z) / pz()(z)));
      }
    }
  }
  // Exact zero can come out as -1e-17.
  mi.i_yz_given_x = std::max(0.0, mi.i_yz_given_x);
  mi.i_yx_given_z = std::max(0.0, mi.i_yx_given_z);
  return mi;
}

DiscreteHiddenModel reweight_x(const DiscreteHiddenModel& p, std::span<const double> weight,
                               std::string id) {
  const DiscreteSpec& ps = p.spec();
  if (weight.size() != p.num_x()) {
    throw std::invalid_argument("reweight_x: need one weight per x view");
  }
  for (double w : weight) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("reweight_x: weights must be positive and finite");
    }
  }
  // q(h, x, z) is proportional to p(h) p(x|h) w(x) p(z|h): the z-channel is untouched,
  // so q_{Z|X} = p_{Z|X} while q_X is proportional to p_X * w.
  DiscreteSpec qs;
  qs.id = std::move(id);
  qs.label_of_h = ps.label_of_h;
  qs.z_given_h = ps.z_given_h;
  qs.x_given_h = ps.x_given_h;
  const auto s = static_cast<Eigen::Index>(ps.prior.size());
  qs.prior.resize(ps.prior.size());
  double total = 0.0;
  for (Eigen::Index h = 0; h < s; ++h) {
    double mass = 0.0;
    for (Eigen::Index x = 0; x < qs.x_given_h.cols(); ++x) {
      qs.x_given_h(h, x) *= weight[static_cast<std::size_t>(x)];
      mass += qs.x_given_h(h, x);
    }
    qs.x_given_h.row(h) /= mass;
    qs.prior[static_cast<std::size_t>(h)] = ps.prior[static_cast<std::size_t>(h)] * mass;
    total += qs.prior[static_cast<std::size_t>(h)];
  }
  for (auto& v : qs.prior) v /= total;
  return DiscreteHiddenModel(std::move(qs));
}

}  // namespace redlab
