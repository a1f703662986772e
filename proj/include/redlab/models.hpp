#pragma once

// Synthetic multi-view models over (X, Z, Y) with exact probabilistic oracles.
//
// Three families are provided:
//   DiscreteHiddenModel  H finite, X | H and Z | H tabular, Y = label_of_h(H)
//   TopicModel           Theta ~ Dirichlet(alpha), X, Z single tokens, Y = v . Theta
//   GaussianModel        H ~ N(0, s2), X, Z ~ N(H, 1), Y = 2 Phi(H) - 1
//
// Views are carried as doubles. For the two finite families a view is an
// integral index into the vocabulary; anything else is a DomainError.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "redlab/numerics.hpp"

namespace redlab {

using View = double;
using Hidden = std::vector<double>;

enum class ModelKind { discrete, topic, gaussian };

std::string to_string(ModelKind kind);

struct Row {
  View x = 0.0;
  View z = 0.0;
  double y = 0.0;
};

struct Dataset {
  std::vector<Row> rows;
  std::uint64_t seed = 0;
  std::string model_id;
};

/// One violated model invariant. `slack` is how far the value is outside its
/// tolerance (0 when the violation is structural).
struct Violation {
  std::string field;
  std::string message;
  double slack = 0.0;
};

struct ModelError : Error {
  explicit ModelError(std::vector<Violation> v);
  std::vector<Violation> violations;
};

struct Redundancy {
  double eps_x = 0.0;
  double eps_z = 0.0;
  double eps_mu = 0.0;
  /// Absolute change between the two quadrature orders (0 for exact paths).
  double quadrature_error = 0.0;
};

struct ConditionalMI {
  double i_yz_given_x = 0.0;  // nats
  double i_yx_given_z = 0.0;
};

class FiniteModel;
class DiscreteHiddenModel;

class MultiViewModel {
 public:
  virtual ~MultiViewModel() = default;

  virtual ModelKind kind() const = 0;
  const std::string& id() const { return id_; }

  /// n i.i.d. triples. Row i is drawn from the stream (seed, i) so the
  /// output does not depend on how rows are scheduled.
  Dataset sample(std::size_t n, std::uint64_t seed) const;
  virtual Row sample_row(Rng& rng) const = 0;
  virtual View sample_x(Rng& rng) const = 0;
  virtual View sample_z(Rng& rng) const = 0;

  /// Pointwise mutual information log g*(x, z).
  virtual double log_odds(View x, View z) const = 0;
  /// g*(x, z) = p_{X,Z}(x, z) / (p_X(x) p_Z(z)).
  double odds(View x, View z) const;

  virtual double cond_mean_y_given_x(View x) const = 0;
  virtual double cond_mean_y_given_z(View z) const = 0;
  virtual double cond_mean_y_given_xz(View x, View z) const = 0;
  /// mu(x) = E[E[Y | Z] | X = x].
  virtual double mu(View x) const = 0;
  virtual double second_moment_y() const = 0;

  // Hidden-variable structure, used by the probabilistic embedding.
  virtual Hidden sample_hidden(Rng& rng) const = 0;
  /// p_{X|H}(x | h) / p_X(x)
  virtual double x_ratio(View x, const Hidden& h) const = 0;
  /// p_{Z|H}(z | h) / p_Z(z)
  virtual double z_ratio(View z, const Hidden& h) const = 0;

  virtual const FiniteModel* finite() const { return nullptr; }
  virtual const DiscreteHiddenModel* discrete() const { return nullptr; }

 protected:
  explicit MultiViewModel(std::string id) : id_(std::move(id)) {}

 private:
  std::string id_;
};

using ModelPtr = std::shared_ptr<const MultiViewModel>;

// ---------------------------------------------------------------------------
// Finite view spaces: everything is precomputed into tables.
// ---------------------------------------------------------------------------

/// Tables a finite model is built from.
struct FiniteParts {
  std::string id;
  Eigen::MatrixXd joint;  // p_{X,Z}
  Eigen::MatrixXd bayes;  // E[Y | X, Z]
  double ey2 = 0.0;       // E[Y^2]
};

class FiniteModel : public MultiViewModel {
 public:
  std::size_t num_x() const { return static_cast<std::size_t>(joint_.rows()); }
  std::size_t num_z() const { return static_cast<std::size_t>(joint_.cols()); }

  const Eigen::MatrixXd& joint() const { return joint_; }
  const Eigen::VectorXd& px() const { return px_; }
  const Eigen::VectorXd& pz() const { return pz_; }
  /// g* on the full product grid.
  const Eigen::MatrixXd& odds_table() const { return odds_; }
  /// E[Y | X = x, Z = z] on the grid.
  const Eigen::MatrixXd& bayes_table() const { return bayes_; }
  const Eigen::VectorXd& ey_x() const { return ey_x_; }
  const Eigen::VectorXd& ey_z() const { return ey_z_; }
  const Eigen::VectorXd& mu_table() const { return mu_; }

  std::size_t x_index(View x) const;
  std::size_t z_index(View z) const;

  View sample_x(Rng& rng) const override;
  View sample_z(Rng& rng) const override;
  double log_odds(View x, View z) const override;
  double cond_mean_y_given_x(View x) const override;
  double cond_mean_y_given_z(View z) const override;
  double cond_mean_y_given_xz(View x, View z) const override;
  double mu(View x) const override;
  double second_moment_y() const override { return ey2_; }

  const FiniteModel* finite() const override { return this; }

 protected:
  explicit FiniteModel(FiniteParts parts);

 private:
  Eigen::MatrixXd joint_;
  Eigen::MatrixXd bayes_;
  Eigen::MatrixXd odds_;
  Eigen::VectorXd px_, pz_, ey_x_, ey_z_, mu_;
  double ey2_ = 0.0;
};

struct DiscreteSpec {
  std::string id = "discrete";
  std::vector<double> prior;       // p_H
  Eigen::MatrixXd x_given_h;       // |S| x |X|, row-stochastic
  Eigen::MatrixXd z_given_h;       // |S| x |Z|, row-stochastic
  std::vector<double> label_of_h;  // in [-1, 1]
};

class DiscreteHiddenModel final : public FiniteModel {
 public:
  /// Throws ModelError listing every violated invariant.
  explicit DiscreteHiddenModel(DiscreteSpec spec);

  static std::vector<Violation> validate(const DiscreteSpec& spec);

  const DiscreteSpec& spec() const { return spec_; }
  std::size_t num_hidden() const { return spec_.prior.size(); }

  ModelKind kind() const override { return ModelKind::discrete; }
  Row sample_row(Rng& rng) const override;
  Hidden sample_hidden(Rng& rng) const override;
  double x_ratio(View x, const Hidden& h) const override;
  double z_ratio(View z, const Hidden& h) const override;
  const DiscreteHiddenModel* discrete() const override { return this; }

  ConditionalMI conditional_mi() const;

 private:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  DiscreteSpec spec_;
  RowMajor x_rows_, z_rows_;
};

struct TopicSpec {
  std::string id = "topic";
  std::size_t num_topics = 0;
  double alpha = 1.0;
  Eigen::MatrixXd topic_word;           // K x V, disjoint supports
  std::vector<double> label_direction;  // v in [-1, 1]^K
};

class TopicModel final : public FiniteModel {
 public:
  explicit TopicModel(TopicSpec spec);

  static std::vector<Violation> validate(const TopicSpec& spec);

  const TopicSpec& spec() const { return spec_; }
  std::size_t num_topics() const { return spec_.num_topics; }
  double alpha() const { return spec_.alpha; }
  /// The unique topic whose distribution puts mass on `word`.
  std::size_t topic_of(std::size_t word) const { return topic_of_[word]; }

  ModelKind kind() const override { return ModelKind::topic; }
  Row sample_row(Rng& rng) const override;
  Hidden sample_hidden(Rng& rng) const override;
  double x_ratio(View x, const Hidden& theta) const override;
  double z_ratio(View z, const Hidden& theta) const override;

 private:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  TopicSpec spec_;
  RowMajor word_rows_;
  std::vector<std::size_t> topic_of_;
};

class GaussianModel final : public MultiViewModel {
 public:
  explicit GaussianModel(double sigma2, std::string id = "gaussian");

  static std::vector<Violation> validate(double sigma2);

  double sigma2() const { return sigma2_; }
  /// True when a closed-form path disagreed with its quadrature cross-check
  /// at construction and the quadrature path is in use.
  bool using_quadrature_fallback() const { return fallback_; }

  ModelKind kind() const override { return ModelKind::gaussian; }
  Row sample_row(Rng& rng) const override;
  View sample_x(Rng& rng) const override;
  View sample_z(Rng& rng) const override;
  double log_odds(View x, View z) const override;
  double cond_mean_y_given_x(View x) const override;
  double cond_mean_y_given_z(View z) const override;
  double cond_mean_y_given_xz(View x, View z) const override;
  double mu(View x) const override;
  double second_moment_y() const override;
  Hidden sample_hidden(Rng& rng) const override;
  double x_ratio(View x, const Hidden& h) const override;
  double z_ratio(View z, const Hidden& h) const override;

  double log_marginal(View v) const;

  // Quadrature routes, kept public for cross-checks.
  double cond_mean_y_given_z_quadrature(View z, std::size_t nodes = 64) const;
  double cond_mean_y_given_xz_quadrature(View x, View z, std::size_t nodes = 64) const;
  double mu_quadrature(View x, std::size_t nodes = 128) const;

  /// Redundancy terms by 2-D Gauss-Hermite quadrature with `nodes` per axis.
  Redundancy redundancy_quadrature(std::size_t nodes) const;

 private:
  double sigma2_;
  bool fallback_ = false;
};

// ---------------------------------------------------------------------------
// Oracle operations
// ---------------------------------------------------------------------------

/// eps_X, eps_Z and eps_mu = eps_X + 2 sqrt(eps_X eps_Z) + eps_Z. Exact on
/// finite models; 2-D quadrature for the Gaussian model, throwing
/// NumericalError when two quadrature orders disagree by more than 1e-6.
Redundancy redundancy(const MultiViewModel& model);

/// Exact I(Y; Z | X) and I(Y; X | Z). UnsupportedModel unless discrete.
ConditionalMI conditional_mi(const MultiViewModel& model);

/// Monte Carlo estimate of E[(mu(X) - E[Y | X, Z])^2].
Estimate mu_bayes_gap_mc(const MultiViewModel& model, std::size_t n, std::uint64_t seed);

/// Returns q with q_{Z|X} = p_{Z|X} and q_X proportional to p_X * weight.
DiscreteHiddenModel reweight_x(const DiscreteHiddenModel& p, std::span<const double> weight,
                               std::string id);

}  // namespace redlab
