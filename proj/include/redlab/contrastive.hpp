#pragma once

// Contrastive distribution, the two contrastive losses, pair scorers and
// the trainers that fit them on finite view spaces.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "redlab/models.hpp"

namespace redlab {

struct ContrastiveTriple {
  View x = 0.0;
  View z = 0.0;
  int label = 1;  // +1 for a joint pair, -1 for a product pair
};

/// Fair coin per draw: (x, z, +1) from p_{X,Z} or (x, z~, -1) with z~ drawn
/// independently from p_Z. Draw i uses the stream (seed, i).
std::vector<ContrastiveTriple> sample_contrastive(const MultiViewModel& model, std::size_t n,
                                                  std::uint64_t seed);

/// log-odds scale feeds the logistic landmark loss, odds scale the direct loss.
enum class Scale { log_odds, odds };

std::string to_string(Scale s);

/// Training metadata carried with a learned scorer.
struct TrainInfo {
  std::string trainer;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  std::size_t steps = 0;
  std::size_t restarts = 0;
  std::size_t train_count = 0;  // 0 for population training
};

class PairScorer {
 public:
  enum class Form { oracle, table, factorized };

  static PairScorer oracle(ModelPtr model, Scale scale);
  /// Dense |X| x |Z| table of scores on `scale`.
  static PairScorer table(Eigen::MatrixXd values, Scale scale);
  /// g(x, z) = eta(x)^T psi(z), always on the odds scale.
  static PairScorer factorized(Eigen::MatrixXd eta, Eigen::MatrixXd psi);

  Form form() const { return form_; }
  Scale scale() const { return scale_; }

  /// Score on the scorer's own scale.
  double operator()(View x, View z) const;
  double log_score(View x, View z) const;
  double odds_score(View x, View z) const;

  /// Scores on the full nx x nz grid, on the scorer's own scale.
  Eigen::MatrixXd grid(std::size_t nx, std::size_t nz) const;

  const ModelPtr& model() const { return model_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const Eigen::MatrixXd& eta() const { return eta_; }
  const Eigen::MatrixXd& psi() const { return psi_; }
  std::size_t dim() const { return static_cast<std::size_t>(eta_.cols()); }

  TrainInfo info;

 private:
  PairScorer() = default;
  Form form_ = Form::table;
  Scale scale_ = Scale::log_odds;
  ModelPtr model_;
  Eigen::MatrixXd values_;
  Eigen::MatrixXd eta_, psi_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean of log(1 + exp(-y f(x, z))). Scorer must be on the log-odds scale.
double loss_lm(const PairScorer& f, const std::vector<ContrastiveTriple>& data);

/// Mean of log(1 + g(x, z)^(-y)). Scorer must be on the odds scale and positive.
double loss_direct(const PairScorer& g, const std::vector<ContrastiveTriple>& data);

enum class LossKind { lm, direct };

/// Exact expectation under (1/2) p_{X,Z} + (1/2) p_X p_Z, split by label.
/// Any scorer is accepted: lm converts odds to log-odds, direct the reverse.
double population_loss(const PairScorer& s, const MultiViewModel& model, LossKind which);

/// Same, on an explicit score grid given on `scale`.
double population_loss(const Eigen::MatrixXd& scores, Scale scale, const FiniteModel& model, LossKind which);

struct ExcessLosses {
  std::optional<double> lm;
  std::optional<double> direct;
};

/// Population excess over the oracle for both losses. Both are absent on
/// infinite view spaces. A value below -1e-10 throws NumericalError.
ExcessLosses excess_losses(const PairScorer& s, const MultiViewModel& model);

/// E over the contrastive pair distribution of KL(p*(y|x,z) || p(y|x,z)),
/// where p(+1|x,z) = g/(1+g).
double contrastive_kl(const PairScorer& s, const FiniteModel& model);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 2.0;
  std::size_t steps = 200000;  // per restart
  std::size_t batch = 0;       // 0 means population gradients
  std::uint64_t seed = 0;
  double positivity_floor = 1e-6;
  double smoothing = 0.5;
  std::size_t restarts = 8;
  double tolerance = 1e-10;  // relative loss change over `window` steps
  std::size_t window = 100;
};

/// Per-cell minimizer ln((n+ + s)/(n- + s)).
PairScorer train_lm_table(const std::vector<ContrastiveTriple>& data, std::size_t nx, std::size_t nz,
                          const TrainConfig& config);
/// Population input: exactly log g*.
PairScorer train_lm_table(const FiniteModel& model);

struct DirectTrainResult {
  PairScorer scorer;
  std::vector<double> trace;  // loss every `window` steps of the selected restart
  double final_loss = 0.0;
  std::size_t best_restart = 0;
};

/// Full-batch gradient descent on eta = exp(A) + floor, psi = exp(B) + floor
/// with multi-start. Population weights when `data` is empty.
DirectTrainResult train_direct(const FiniteModel& model, std::size_t m, const TrainConfig& config);
DirectTrainResult train_direct(const std::vector<ContrastiveTriple>& data, std::size_t nx, std::size_t nz,
                               std::size_t m, const TrainConfig& config);

/// Direct-loss fit of given pair weights (w_plus for label +1, w_minus for -1).
DirectTrainResult train_direct_weights(const Eigen::MatrixXd& w_plus, const Eigen::MatrixXd& w_minus,
                                       std::size_t m, const TrainConfig& config);

}  // namespace redlab
