#include "redlab/embeddings.hpp"

#include <sstream>

namespace redlab {

Eigen::MatrixXd feature_table(const Embedding& emb, std::size_t nx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(emb.dim()));
  parallel_for(nx, [&](std::size_t x) {
    out.row(static_cast<Eigen::Index>(x)) = emb.embed(static_cast<View>(x)).transpose();
  });
  return out;
}

std::vector<View> draw_landmarks(const MultiViewModel& model, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("draw_landmarks: m must be at least 1");
  std::vector<View> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    Rng rng(seed, i);
    out[i] = model.sample_z(rng);
  }
  return out;
}

std::vector<View> draw_landmarks(std::span<const double> probs, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("draw_landmarks: m must be at least 1");
  if (probs.empty()) throw std::invalid_argument("draw_landmarks: empty distribution");
  std::vector<View> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    Rng rng(seed, i);
    out[i] = static_cast<View>(rng.categorical(probs));
  }
  return out;
}

// ---------------------------------------------------------------------------

LandmarkEmbedding::LandmarkEmbedding(std::vector<View> landmarks, PairScorer scorer, std::string source,
                                     std::uint64_t seed)
    : landmarks_(std::move(landmarks)), scorer_(std::move(scorer)), source_(std::move(source)), seed_(seed) {
  if (landmarks_.empty()) throw std::invalid_argument("landmark embedding needs at least one landmark (m = 0)");
}

Eigen::VectorXd LandmarkEmbedding::embed(View x) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(landmarks_.size()));
  for (std::size_t i = 0; i < landmarks_.size(); ++i) {
    const double v = scorer_.odds_score(x, landmarks_[i]);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "landmark feature " << i << " is not finite at x=" << x;
      throw NumericalError(os.str());
    }
    out(static_cast<Eigen::Index>(i)) = v;
  }
  return out;
}

Eigen::VectorXd LandmarkEmbedding::embed_z(View z, const std::vector<View>& x_landmarks) const {
  if (x_landmarks.empty()) throw std::invalid_argument("embed_z: no landmarks");
  Eigen::VectorXd out(static_cast<Eigen::Index>(x_landmarks.size()));
  for (std::size_t i = 0; i < x_landmarks.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = scorer_.odds_score(x_landmarks[i], z);
  }
  return out;
}

// ---------------------------------------------------------------------------

FactorizedEmbedding::FactorizedEmbedding(Eigen::MatrixXd eta, Eigen::MatrixXd psi, std::string source,
                                         std::uint64_t seed)
    : dim_(static_cast<std::size_t>(eta.cols())),
      eta_(std::move(eta)),
      psi_(std::move(psi)),
      source_(std::move(source)),
      seed_(seed) {
  if (eta_.cols() != psi_.cols() || eta_.cols() == 0 || eta_.rows() == 0 || psi_.rows() == 0) {
    throw std::invalid_argument("factorized embedding: eta and psi need the same positive dimension");
  }
  if (!eta_.allFinite() || !psi_.allFinite()) throw NumericalError("factorized embedding has non-finite entries");
}

FactorizedEmbedding::FactorizedEmbedding(ModelPtr model, std::vector<Hidden> hidden, std::uint64_t seed)
    : dim_(hidden.size()), model_(std::move(model)), hidden_(std::move(hidden)), source_("p_H"), seed_(seed) {
  if (!model_) throw std::invalid_argument("factorized embedding needs a model");
  if (hidden_.empty()) throw std::invalid_argument("factorized embedding: m must be at least 1");
}

namespace {

Eigen::Index table_row(View v, const Eigen::MatrixXd& t, const char* which) {
  if (!std::isfinite(v) || v != std::floor(v) || v < 0.0 || v >= static_cast<double>(t.rows())) {
    std::ostringstream os;
    os << which << " view " << v << " outside the embedding table {0.." << t.rows() - 1 << "}";
    throw DomainError(os.str());
  }
  return static_cast<Eigen::Index>(v);
}

}  // namespace

Eigen::VectorXd FactorizedEmbedding::eta(View x) const {
  if (tabular()) return eta_.row(table_row(x, eta_, "x")).transpose();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) out(static_cast<Eigen::Index>(i)) = scale * model_->x_ratio(x, hidden_[i]);
  return out;
}

Eigen::VectorXd FactorizedEmbedding::psi(View z) const {
  if (tabular()) return psi_.row(table_row(z, psi_, "z")).transpose();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) out(static_cast<Eigen::Index>(i)) = scale * model_->z_ratio(z, hidden_[i]);
  return out;
}

FactorizedEmbedding exact_factorization(const MultiViewModel& model) {
  const DiscreteHiddenModel* d = model.discrete();
  if (d == nullptr) {
    throw UnsupportedModel("exact factorization needs a discrete hidden model, got " + to_string(model.kind()));
  }
  const DiscreteSpec& s = d->spec();
  const auto k = static_cast<Eigen::Index>(d->num_hidden());
  const auto nx = static_cast<Eigen::Index>(d->num_x());
  const auto nz = static_cast<Eigen::Index>(d->num_z());
  Eigen::MatrixXd eta(nx, k), psi(nz, k);
  for (Eigen::Index h = 0; h < k; ++h) {
    const double prior = s.prior[static_cast<std::size_t>(h)];
    for (Eigen::Index x = 0; x < nx; ++x) eta(x, h) = prior * s.x_given_h(h, x) / d->px()(x);
    for (Eigen::Index z = 0; z < nz; ++z) psi(z, h) = s.z_given_h(h, z) / d->pz()(z);
  }
  return FactorizedEmbedding(std::move(eta), std::move(psi), "exact_posterior");
}

FactorizedEmbedding probabilistic_embed(ModelPtr model, std::size_t m, std::uint64_t seed) {
  if (!model) throw std::invalid_argument("probabilistic_embed needs a model");
  if (m == 0) throw std::invalid_argument("probabilistic_embed: m must be at least 1");
  std::vector<Hidden> hidden(m);
  for (std::size_t i = 0; i < m; ++i) {
    Rng rng(seed, i);
    hidden[i] = model->sample_hidden(rng);
  }
  const FiniteModel* f = model->finite();
  FactorizedEmbedding sampled(model, hidden, seed);
  if (f == nullptr) return sampled;
  Eigen::MatrixXd eta(static_cast<Eigen::Index>(f->num_x()), static_cast<Eigen::Index>(m));
  Eigen::MatrixXd psi(static_cast<Eigen::Index>(f->num_z()), static_cast<Eigen::Index>(m));
  for (Eigen::Index x = 0; x < eta.rows(); ++x) eta.row(x) = sampled.eta(static_cast<View>(x)).transpose();
  for (Eigen::Index z = 0; z < psi.rows(); ++z) psi.row(z) = sampled.psi(static_cast<View>(z)).transpose();
  return FactorizedEmbedding(std::move(eta), std::move(psi), "p_H", seed);
}

FactorizedEmbedding embedding_from_scorer(const PairScorer& scorer) {
  if (scorer.form() != PairScorer::Form::factorized) {
    throw std::invalid_argument("embedding_from_scorer needs a factorized scorer");
  }
  return FactorizedEmbedding(scorer.eta(), scorer.psi(), scorer.info.trainer, scorer.info.seed);
}

// ---------------------------------------------------------------------------

std::string to_string(WeightSource s) {
  switch (s) {
    case WeightSource::landmark_block: return "landmark_block";
    case WeightSource::exact_factorization: return "exact_factorization";
    case WeightSource::ridge_fit: return "ridge_fit";
    case WeightSource::transfer_block: return "transfer_block";
  }
  return "unknown";
}

WeightVector exact_linear_weights(const MultiViewModel& model, const FactorizedEmbedding& emb) {
  WeightVector out;
  out.source = WeightSource::exact_factorization;
  if (const FiniteModel* f = model.finite()) {
    out.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.dim()));
    for (std::size_t z = 0; z < f->num_z(); ++z) {
      const auto zi = static_cast<Eigen::Index>(z);
      const double c = f->pz()(zi) * f->ey_z()(zi);
      if (c != 0.0) out.w += c * emb.psi(static_cast<View>(z));
    }
    return out;
  }
  const auto* g = dynamic_cast<const GaussianModel*>(&model);
  if (g == nullptr || emb.tabular()) {
    throw UnsupportedModel("exact_linear_weights: no expectation route for this model/embedding pair");
  }
  // p_Z(z) z_ratio(z, h) is the N(h, 1) density, so each coordinate is
  // E[E[Y | Z] | H = h_i] / sqrt(m).
  const double scale = 1.0 / std::sqrt(static_cast<double>(emb.dim()));
  out.w.resize(static_cast<Eigen::Index>(emb.dim()));
  for (std::size_t i = 0; i < emb.dim(); ++i) {
    out.w(static_cast<Eigen::Index>(i)) =
        scale * gaussian_expectation([g](double z) { return g->cond_mean_y_given_z(z); }, emb.hidden()[i].at(0),
                                     1.0, 64);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t BlockLayout::start(std::size_t b, std::size_t m) const {
  return std::min(b * block_size, m - block_size);
}

BlockLayout block_layout(std::size_t m, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const double bits = std::log2(1.0 / delta);
  BlockLayout out;
  out.block_size = static_cast<std::size_t>(std::floor(static_cast<double>(m) / bits));
  out.num_blocks = static_cast<std::size_t>(std::ceil(bits - 1e-12));
  if (out.block_size == 0) {
    std::ostringstream os;
    os << "block size floor(m / log2(1/delta)) is 0 for m=" << m << ", delta=" << delta
       << "; use m >= " << std::ceil(bits) << " or a larger delta";
    throw std::invalid_argument(os.str());
  }
  return out;
}

namespace {

// Validation risk of each block candidate. `entries` holds the per-landmark
// weight before the 1/n factor.
BlockChoice select_block(const MultiViewModel& target, const Embedding& emb, const Eigen::VectorXd& entries,
                         double delta, std::size_t validation, std::uint64_t seed, WeightSource source) {
  if (validation == 0) throw std::invalid_argument("validation sample must be non-empty");
  const std::size_t m = emb.dim();
  BlockChoice out;
  out.layout = block_layout(m, delta);
  const std::size_t n = out.layout.block_size;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<View> xs(validation);
  for (std::size_t j = 0; j < validation; ++j) {
    Rng rng(seed, j);
    xs[j] = target.sample_x(rng);
  }

  // Finite x-spaces collapse the validation sample into a histogram.
  std::vector<View> points;
  std::vector<double> weight;
  if (const FiniteModel* f = target.finite()) {
    std::vector<double> counts(f->num_x(), 0.0);
    for (View x : xs) counts[f->x_index(x)] += 1.0;
    for (std::size_t x = 0; x < counts.size(); ++x) {
      if (counts[x] > 0.0) {
        points.push_back(static_cast<View>(x));
        weight.push_back(counts[x] / static_cast<double>(validation));
      }
    }
  } else {
    points = xs;
    weight.assign(validation, 1.0 / static_cast<double>(validation));
  }

  Eigen::MatrixXd features(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(m));
  Eigen::VectorXd mu(static_cast<Eigen::Index>(points.size()));
  parallel_for(points.size(), [&](std::size_t j) {
    features.row(static_cast<Eigen::Index>(j)) = emb.embed(points[j]).transpose();
    mu(static_cast<Eigen::Index>(j)) = target.mu(points[j]);
  });

  out.validation_risk.resize(out.layout.num_blocks);
  for (std::size_t b = 0; b < out.layout.num_blocks; ++b) {
    const auto s = static_cast<Eigen::Index>(out.layout.start(b, m));
    const auto len = static_cast<Eigen::Index>(n);
    const Eigen::VectorXd pred = inv_n * (features.middleCols(s, len) * entries.segment(s, len));
    double risk = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      const double d = pred(static_cast<Eigen::Index>(j)) - mu(static_cast<Eigen::Index>(j));
      risk += weight[j] * d * d;
    }
    out.validation_risk[b] = risk;
    if (risk < out.validation_risk[out.block]) out.block = b;
  }

  const auto s = static_cast<Eigen::Index>(out.layout.start(out.block, m));
  out.weights.source = source;
  out.weights.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  out.weights.w.segment(s, static_cast<Eigen::Index>(n)) = inv_n * entries.segment(s, static_cast<Eigen::Index>(n));
  return out;
}

}  // namespace

BlockChoice oracle_landmark_weights(const MultiViewModel& model, const LandmarkEmbedding& emb, double delta,
                                    std::size_t validation, std::uint64_t seed) {
  const auto& zs = emb.landmarks();
  Eigen::VectorXd entries(static_cast<Eigen::Index>(zs.size()));
  for (std::size_t i = 0; i < zs.size(); ++i) entries(static_cast<Eigen::Index>(i)) = model.cond_mean_y_given_z(zs[i]);
  return select_block(model, emb, entries, delta, validation, seed, WeightSource::landmark_block);
}

double conditional_mismatch(const FiniteModel& p, const FiniteModel& q) {
  if (p.num_x() != q.num_x() || p.num_z() != q.num_z()) {
    throw ConfigError("transfer: p and q must share the view spaces");
  }
  double worst = 0.0;
  for (Eigen::Index x = 0; x < p.joint().rows(); ++x) {
    for (Eigen::Index z = 0; z < p.joint().cols(); ++z) {
      const double a = p.joint()(x, z) / p.px()(x);
      const double b = q.px()(x) > 0.0 ? q.joint()(x, z) / q.px()(x) : a;
      worst = std::max(worst, std::abs(a - b));
    }
  }
  return worst;
}

BlockChoice transfer_landmark_weights(const DiscreteHiddenModel& p, const DiscreteHiddenModel& q,
                                      const LandmarkEmbedding& emb, std::span<const double> landmark_probs,
                                      double delta, std::size_t validation, std::uint64_t seed) {
  const double mismatch = conditional_mismatch(p, q);
  if (mismatch > 1e-10) {
    std::ostringstream os;
    os << "transfer needs q(z|x) = p(z|x); largest difference is " << mismatch;
    throw ConfigError(os.str());
  }
  if (landmark_probs.size() != p.num_z()) throw ConfigError("transfer: landmark distribution has the wrong size");
  const auto& zs = emb.landmarks();
  Eigen::VectorXd entries(static_cast<Eigen::Index>(zs.size()));
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const std::size_t z = p.z_index(zs[i]);
    const double alpha = landmark_probs[z];
    if (!(alpha > 0.0)) throw DomainError("transfer: landmark outside the support of its distribution");
    entries(static_cast<Eigen::Index>(i)) = p.pz()(static_cast<Eigen::Index>(z)) / alpha * q.cond_mean_y_given_z(zs[i]);
  }
  return select_block(q, emb, entries, delta, validation, seed, WeightSource::transfer_block);
}

}  // namespace redlab
