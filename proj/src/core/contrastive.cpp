#include "redlab/contrastive.hpp"

#include <sstream>

namespace redlab {

std::vector<ContrastiveTriple> sample_contrastive(const MultiViewModel& model, std::size_t n,
                                                  std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_contrastive: n must be at least 1");
  std::vector<ContrastiveTriple> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, i);
    const Row row = model.sample_row(rng);
    const bool positive = rng.uniform() < 0.5;
    out[i].x = row.x;
    out[i].z = positive ? row.z : model.sample_z(rng);
    out[i].label = positive ? 1 : -1;
  }
  return out;
}

std::string to_string(Scale s) { return s == Scale::odds ? "odds" : "log_odds"; }

// ---------------------------------------------------------------------------

namespace {

Eigen::Index cell(View v, Eigen::Index size, const char* which) {
  if (!std::isfinite(v) || v != std::floor(v) || v < 0.0 || v >= static_cast<double>(size)) {
    std::ostringstream os;
    os << which << " view " << v << " outside scorer table {0.." << size - 1 << "}";
    throw DomainError(os.str());
  }
  return static_cast<Eigen::Index>(v);
}

}  // namespace

PairScorer PairScorer::oracle(ModelPtr model, Scale scale) {
  if (!model) throw std::invalid_argument("oracle scorer needs a model");
  PairScorer s;
  s.form_ = Form::oracle;
  s.scale_ = scale;
  s.model_ = std::move(model);
  s.info.trainer = "oracle";
  return s;
}

PairScorer PairScorer::table(Eigen::MatrixXd values, Scale scale) {
  if (values.size() == 0) throw std::invalid_argument("table scorer must be non-empty");
  PairScorer s;
  s.form_ = Form::table;
  s.scale_ = scale;
  s.values_ = std::move(values);
  return s;
}

PairScorer PairScorer::factorized(Eigen::MatrixXd eta, Eigen::MatrixXd psi) {
  if (eta.cols() != psi.cols() || eta.cols() == 0 || eta.rows() == 0 || psi.rows() == 0) {
    throw std::invalid_argument("factorized scorer: eta and psi need the same positive width");
  }
  PairScorer s;
  s.form_ = Form::factorized;
  s.scale_ = Scale::odds;
  s.eta_ = std::move(eta);
  s.psi_ = std::move(psi);
  return s;
}

double PairScorer::operator()(View x, View z) const {
  switch (form_) {
    case Form::oracle: return scale_ == Scale::odds ? model_->odds(x, z) : model_->log_odds(x, z);
    case Form::table: return values_(cell(x, values_.rows(), "x"), cell(z, values_.cols(), "z"));
    case Form::factorized:
      return eta_.row(cell(x, eta_.rows(), "x")).dot(psi_.row(cell(z, psi_.rows(), "z")));
  }
  return 0.0;
}

double PairScorer::log_score(View x, View z) const {
  if (form_ == Form::oracle) return model_->log_odds(x, z);
  const double v = (*this)(x, z);
  return scale_ == Scale::log_odds ? v : std::log(v);
}

double PairScorer::odds_score(View x, View z) const {
  if (form_ == Form::oracle) return model_->odds(x, z);
  const double v = (*this)(x, z);
  return scale_ == Scale::odds ? v : std::exp(v);
}

Eigen::MatrixXd PairScorer::grid(std::size_t nx, std::size_t nz) const {
  if (form_ == Form::factorized) {
    if (static_cast<std::size_t>(eta_.rows()) != nx || static_cast<std::size_t>(psi_.rows()) != nz) {
      throw DomainError("factorized scorer does not cover the requested grid");
    }
    return eta_ * psi_.transpose();
  }
  if (form_ == Form::table) {
    if (static_cast<std::size_t>(values_.rows()) != nx || static_cast<std::size_t>(values_.cols()) != nz) {
      throw DomainError("table scorer does not cover the requested grid");
    }
    return values_;
  }
  Eigen::MatrixXd out(nx, nz);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t z = 0; z < nz; ++z) {
      out(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z)) =
          (*this)(static_cast<View>(x), static_cast<View>(z));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kChunk = 8192;

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

// Chunk partials are filled in parallel, then added in index order, so the
// result does not depend on scheduling.
template <class F>
double chunked_mean(std::size_t n, F term) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<CompensatedSum> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    CompensatedSum acc;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) acc.add(term(i));
    partial[c] = acc;
  });
  CompensatedSum total;
  for (const auto& p : partial) {
    total.add(p.sum);
    total.add(p.carry);
  }
  return total.value() / static_cast<double>(n);
}

[[noreturn]] void bad_score(const char* what, const ContrastiveTriple& t, double v) {
  std::ostringstream os;
  os << what << " at (x=" << t.x << ", z=" << t.z << "): score " << v;
  throw NumericalError(os.str());
}

}  // namespace

double loss_lm(const PairScorer& f, const std::vector<ContrastiveTriple>& data) {
  if (f.scale() != Scale::log_odds) throw std::invalid_argument("loss_lm needs a log-odds scorer");
  if (data.empty()) throw std::invalid_argument("loss_lm: empty data");
  return chunked_mean(data.size(), [&](std::size_t i) {
    const auto& t = data[i];
    const double v = f.log_score(t.x, t.z);
    if (!std::isfinite(v)) bad_score("non-finite log-odds score", t, v);
    return log1p_exp(-t.label * v);
  });
}

double loss_direct(const PairScorer& g, const std::vector<ContrastiveTriple>& data) {
  if (g.scale() != Scale::odds) throw std::invalid_argument("loss_direct needs an odds-scale scorer");
  if (data.empty()) throw std::invalid_argument("loss_direct: empty data");
  return chunked_mean(data.size(), [&](std::size_t i) {
    const auto& t = data[i];
    const double v = g.odds_score(t.x, t.z);
    if (!(v > 0.0) || !std::isfinite(v)) bad_score("direct loss needs a positive finite score", t, v);
    // log(1 + g^-y) = log1p_exp(-y ln g)
    return log1p_exp(-t.label * std::log(v));
  });
}

double population_loss(const Eigen::MatrixXd& scores, Scale scale, const FiniteModel& model, LossKind which) {
  const auto& joint = model.joint();
  if (scores.rows() != joint.rows() || scores.cols() != joint.cols()) {
    throw std::invalid_argument("population_loss: score grid does not match the model");
  }
  double total = 0.0;
  for (Eigen::Index x = 0; x < joint.rows(); ++x) {
    for (Eigen::Index z = 0; z < joint.cols(); ++z) {
      const double v = scores(x, z);
      double f = 0.0;
      if (scale == Scale::log_odds) {
        f = v;
        if (!std::isfinite(f) || (which == LossKind::direct && !std::isfinite(std::exp(f)))) {
          std::ostringstream os;
          os << "non-finite score at (x=" << x << ", z=" << z << "): " << v;
          throw NumericalError(os.str());
        }
      } else {
        if (!(v > 0.0) || !std::isfinite(v)) {
          std::ostringstream os;
          os << "odds-scale score must be positive and finite at (x=" << x << ", z=" << z << "): " << v;
          throw NumericalError(os.str());
        }
        f = std::log(v);
      }
      total += 0.5 * joint(x, z) * log1p_exp(-f) + 0.5 * model.px()(x) * model.pz()(z) * log1p_exp(f);
    }
  }
  return total;
}

double population_loss(const PairScorer& s, const MultiViewModel& model, LossKind which) {
  const FiniteModel* f = model.finite();
  if (f == nullptr) {
    throw UnsupportedModel("population_loss needs a finite view space; use Monte Carlo losses for " +
                           to_string(model.kind()));
  }
  if (s.form() == PairScorer::Form::oracle) {
    Eigen::MatrixXd g = f->odds_table();
    return population_loss(g.array().log().matrix(), Scale::log_odds, *f, which);
  }
  return population_loss(s.grid(f->num_x(), f->num_z()), s.scale(), *f, which);
}

ExcessLosses excess_losses(const PairScorer& s, const MultiViewModel& model) {
  ExcessLosses out;
  const FiniteModel* f = model.finite();
  if (f == nullptr) return out;
  const Eigen::MatrixXd log_gstar = f->odds_table().array().log().matrix();
  const double best = population_loss(log_gstar, Scale::log_odds, *f, LossKind::lm);
  const double lm = population_loss(s, model, LossKind::lm) - best;
  const double direct = population_loss(s, model, LossKind::direct) - best;
  for (double v : {lm, direct}) {
    if (v < -1e-10) {
      std::ostringstream os;
      os << "excess loss " << v << " below zero: the oracle scorer is not optimal (internal inconsistency)";
      throw NumericalError(os.str());
    }
  }
  out.lm = std::max(0.0, lm);
  out.direct = std::max(0.0, direct);
  return out;
}

double contrastive_kl(const PairScorer& s, const FiniteModel& model) {
  const Eigen::MatrixXd g = s.form() == PairScorer::Form::oracle
                                ? model.odds_table()
                                : (s.scale() == Scale::odds
                                       ? s.grid(model.num_x(), model.num_z())
                                       : Eigen::MatrixXd(s.grid(model.num_x(), model.num_z()).array().exp()));
  double total = 0.0;
  for (Eigen::Index x = 0; x < g.rows(); ++x) {
    for (Eigen::Index z = 0; z < g.cols(); ++z) {
      const double weight = 0.5 * model.joint()(x, z) + 0.5 * model.px()(x) * model.pz()(z);
      const double gs = model.odds_table()(x, z);
      const double p = gs / (1.0 + gs);
      const double q = g(x, z) / (1.0 + g(x, z));
      double kl = 0.0;
      if (p > 0.0) kl += p * std::log(p / q);
      if (p < 1.0) kl += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
      total += weight * kl;
    }
  }
  return total;
}

}  // namespace redlab
