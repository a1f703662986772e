#pragma once

// Embeddings of the x-view: landmark features, exact and sampled hidden-
// variable factorizations, and the linear weights built on top of them.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "redlab/contrastive.hpp"
#include "redlab/models.hpp"

namespace redlab {

class Embedding {
 public:
  virtual ~Embedding() = default;
  virtual std::size_t dim() const = 0;
  virtual Eigen::VectorXd embed(View x) const = 0;
};

/// Rows phi(x) for x = 0 .. nx-1.
Eigen::MatrixXd feature_table(const Embedding& emb, std::size_t nx);

// ---------------------------------------------------------------------------
// Landmarks
// ---------------------------------------------------------------------------

/// m i.i.d. draws from the model's z-marginal. Draw i uses stream (seed, i).
std::vector<View> draw_landmarks(const MultiViewModel& model, std::size_t m, std::uint64_t seed);
/// m i.i.d. indices from an explicit probability vector.
std::vector<View> draw_landmarks(std::span<const double> probs, std::size_t m, std::uint64_t seed);

class LandmarkEmbedding final : public Embedding {
 public:
  /// phi(x)_i = scorer(x, z_i) on the odds scale. Rejects m = 0.
  LandmarkEmbedding(std::vector<View> landmarks, PairScorer scorer, std::string source = "p_Z",
                    std::uint64_t seed = 0);

  std::size_t dim() const override { return landmarks_.size(); }
  Eigen::VectorXd embed(View x) const override;

  /// The mirror embedding of a z-view against x-landmarks.
  Eigen::VectorXd embed_z(View z, const std::vector<View>& x_landmarks) const;

  const std::vector<View>& landmarks() const { return landmarks_; }
  const PairScorer& scorer() const { return scorer_; }
  const std::string& source() const { return source_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<View> landmarks_;
  PairScorer scorer_;
  std::string source_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Factorized embeddings eta(x)^T psi(z)
// ---------------------------------------------------------------------------

class FactorizedEmbedding final : public Embedding {
 public:
  /// Tabular: row x of `eta` is eta(x), row z of `psi` is psi(z).
  FactorizedEmbedding(Eigen::MatrixXd eta, Eigen::MatrixXd psi, std::string source = "table",
                      std::uint64_t seed = 0);
  /// Sampled hidden states: eta(x)_i = x_ratio(x, H_i)/sqrt(m), psi likewise.
  FactorizedEmbedding(ModelPtr model, std::vector<Hidden> hidden, std::uint64_t seed);

  std::size_t dim() const override { return dim_; }
  Eigen::VectorXd embed(View x) const override { return eta(x); }
  Eigen::VectorXd eta(View x) const;
  Eigen::VectorXd psi(View z) const;
  double score(View x, View z) const { return eta(x).dot(psi(z)); }

  bool tabular() const { return model_ == nullptr; }
  const Eigen::MatrixXd& eta_table() const { return eta_; }
  const Eigen::MatrixXd& psi_table() const { return psi_; }
  const std::vector<Hidden>& hidden() const { return hidden_; }
  const std::string& source() const { return source_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t dim_ = 0;
  Eigen::MatrixXd eta_, psi_;
  ModelPtr model_;
  std::vector<Hidden> hidden_;
  std::string source_;
  std::uint64_t seed_ = 0;
};

/// eta*(x) = posterior over H, psi*(z) = (p(z|h)/p_Z(z))_h.
FactorizedEmbedding exact_factorization(const MultiViewModel& model);

/// H_1..H_m i.i.d. from p_H; H_i drawn from stream (seed, i). Finite
/// models get tabulated eta/psi.
FactorizedEmbedding probabilistic_embed(ModelPtr model, std::size_t m, std::uint64_t seed);

/// The factorized scorer carried by a trained direct model, as an embedding.
FactorizedEmbedding embedding_from_scorer(const PairScorer& scorer);

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

enum class WeightSource { landmark_block, exact_factorization, ridge_fit, transfer_block };

std::string to_string(WeightSource s);

struct WeightVector {
  Eigen::VectorXd w;
  WeightSource source = WeightSource::ridge_fit;
};

/// w = E[E[Y | Z] psi(Z)]: exact sum on finite z-spaces, Gauss-Hermite
/// quadrature for the Gaussian model.
WeightVector exact_linear_weights(const MultiViewModel& model, const FactorizedEmbedding& emb);

struct BlockLayout {
  std::size_t block_size = 0;  // n = floor(m / log2(1/delta))
  std::size_t num_blocks = 0;  // ceil(log2(1/delta))
  /// First coordinate of block b. Blocks that would run past m are shifted
  /// back to end at m.
  std::size_t start(std::size_t b, std::size_t m) const;
};

/// Throws std::invalid_argument when delta is outside (0, 1) or n = 0.
BlockLayout block_layout(std::size_t m, double delta);

struct BlockChoice {
  WeightVector weights;
  BlockLayout layout;
  std::size_t block = 0;
  std::vector<double> validation_risk;  // one per block
};

/// Candidate b puts (1/n) E[Y | Z = z_i] on block b and zero elsewhere; the
/// block with the lowest validation risk against mu wins (ties: lowest b).
BlockChoice oracle_landmark_weights(const MultiViewModel& model, const LandmarkEmbedding& emb, double delta,
                                    std::size_t validation, std::uint64_t seed);

/// Landmarks drawn from `landmark_probs` (q_Z, or any alpha_Z) with
/// weights (1/n) (p_Z/alpha_Z)(z_i) E_q[Y | Z = z_i] and validation under q.
/// Requires q_{Z|X} = p_{Z|X} to 1e-10, otherwise ConfigError.
BlockChoice transfer_landmark_weights(const DiscreteHiddenModel& p, const DiscreteHiddenModel& q,
                                      const LandmarkEmbedding& emb, std::span<const double> landmark_probs,
                                      double delta, std::size_t validation, std::uint64_t seed);

/// Largest |q(z|x) - p(z|x)| over the grid.
double conditional_mismatch(const FiniteModel& p, const FiniteModel& q);

}  // namespace redlab
