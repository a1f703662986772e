#include <sstream>

#include "redlab/contrastive.hpp"

namespace redlab {

namespace {

void check_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || c.steps == 0 || !(c.positivity_floor > 0.0) || !(c.smoothing > 0.0) ||
      c.restarts == 0 || !(c.tolerance > 0.0) || c.window == 0) {
    throw ConfigError("train config: learning_rate, steps, positivity_floor, smoothing, restarts, "
                      "tolerance and window must all be positive");
  }
}

void count_pairs(const std::vector<ContrastiveTriple>& data, std::size_t nx, std::size_t nz,
                 Eigen::MatrixXd& pos, Eigen::MatrixXd& neg) {
  pos = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nz));
  neg = pos;
  for (const auto& t : data) {
    if (t.x < 0 || t.z < 0 || t.x >= static_cast<double>(nx) || t.z >= static_cast<double>(nz) ||
        t.x != std::floor(t.x) || t.z != std::floor(t.z)) {
      std::ostringstream os;
      os << "training pair (" << t.x << ", " << t.z << ") outside the " << nx << " x " << nz << " grid";
      throw DomainError(os.str());
    }
    auto& target = t.label > 0 ? pos : neg;
    target(static_cast<Eigen::Index>(t.x), static_cast<Eigen::Index>(t.z)) += 1.0;
  }
}

}  // namespace

PairScorer train_lm_table(const std::vector<ContrastiveTriple>& data, std::size_t nx, std::size_t nz,
                          const TrainConfig& config) {
  check_config(config);
  if (data.empty()) throw std::invalid_argument("train_lm_table: empty data");
  Eigen::MatrixXd pos, neg;
  count_pairs(data, nx, nz, pos, neg);
  const double s = config.smoothing;
  Eigen::MatrixXd f = ((pos.array() + s) / (neg.array() + s)).log().matrix();
  PairScorer out = PairScorer::table(std::move(f), Scale::log_odds);
  out.info.trainer = "lm_table";
  out.info.seed = config.seed;
  out.info.train_count = data.size();
  out.info.final_loss = loss_lm(out, data);
  return out;
}

PairScorer train_lm_table(const FiniteModel& model) {
  PairScorer out = PairScorer::table(model.odds_table().array().log().matrix(), Scale::log_odds);
  out.info.trainer = "lm_table";
  out.info.final_loss = population_loss(out.values(), Scale::log_odds, model, LossKind::lm);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Run {
  Eigen::MatrixXd eta, psi;
  std::vector<double> trace;
  double loss = 0.0;
  std::size_t steps = 0;
};

double direct_objective(const Eigen::MatrixXd& g, const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wm) {
  return (wp.array() * (1.0 / g.array()).log1p() + wm.array() * g.array().log1p()).sum();
}

Run descend(const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wm, std::size_t m, const TrainConfig& c,
            std::size_t restart) {
  const auto nx = wp.rows();
  const auto nz = wp.cols();
  const auto md = static_cast<Eigen::Index>(m);
  Rng rng(c.seed, restart);
  // Start near g = 1: each of the m products exp(A) exp(B) is about 1/m.
  const double base = -0.5 * std::log(static_cast<double>(m));
  Eigen::MatrixXd a(nx, md), b(nz, md);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = base + 0.3 * rng.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = base + 0.3 * rng.normal();

  Run run;
  double last = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t step = 0; step <= c.steps; ++step) {
    const Eigen::MatrixXd ea = a.array().exp();
    const Eigen::MatrixXd eb = b.array().exp();
    const Eigen::MatrixXd eta = ea.array() + c.positivity_floor;
    const Eigen::MatrixXd psi = eb.array() + c.positivity_floor;
    const Eigen::MatrixXd g = eta * psi.transpose();
    if (step % c.window == 0 || step == c.steps) {
      const double loss = direct_objective(g, wp, wm);
      run.trace.push_back(loss);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "direct trainer diverged at step " << step << " (restart " << restart << "); loss trace:";
        const std::size_t from = run.trace.size() > 8 ? run.trace.size() - 8 : 0;
        for (std::size_t i = from; i < run.trace.size(); ++i) os << ' ' << run.trace[i];
        throw NumericalError(os.str());
      }
      run.eta = eta;
      run.psi = psi;
      run.loss = loss;
      run.steps = step;
      if (std::isfinite(last) && std::abs(last - loss) <= c.tolerance * std::abs(loss)) break;
      last = loss;
      if (step == c.steps) break;
    }
    // dL/dg = (w- g - w+) / (g (1 + g))
    const Eigen::MatrixXd grad_g = (wm.array() * g.array() - wp.array()) / (g.array() * (1.0 + g.array()));
    const Eigen::MatrixXd grad_a = (grad_g * psi).array() * ea.array();
    const Eigen::MatrixXd grad_b = (grad_g.transpose() * eta).array() * eb.array();
    a -= c.learning_rate * grad_a;
    b -= c.learning_rate * grad_b;
  }
  return run;
}

}  // namespace

DirectTrainResult train_direct_weights(const Eigen::MatrixXd& w_plus, const Eigen::MatrixXd& w_minus,
                                       std::size_t m, const TrainConfig& config) {
  check_config(config);
  if (m == 0) throw std::invalid_argument("train_direct: m must be at least 1");
  if (w_plus.rows() != w_minus.rows() || w_plus.cols() != w_minus.cols() || w_plus.size() == 0) {
    throw std::invalid_argument("train_direct: weight tables must match and be non-empty");
  }
  std::vector<Run> runs(config.restarts);
  parallel_for(config.restarts, [&](std::size_t r) { runs[r] = descend(w_plus, w_minus, m, config, r); });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].loss < runs[best].loss) best = r;
  }
  DirectTrainResult out{PairScorer::factorized(runs[best].eta, runs[best].psi), std::move(runs[best].trace),
                        runs[best].loss, best};
  out.scorer.info.trainer = "direct";
  out.scorer.info.seed = config.seed;
  out.scorer.info.final_loss = out.final_loss;
  out.scorer.info.steps = runs[best].steps;
  out.scorer.info.restarts = config.restarts;
  return out;
}

DirectTrainResult train_direct(const FiniteModel& model, std::size_t m, const TrainConfig& config) {
  const Eigen::MatrixXd wp = 0.5 * model.joint();
  const Eigen::MatrixXd wm = 0.5 * model.px() * model.pz().transpose();
  return train_direct_weights(wp, wm, m, config);
}

DirectTrainResult train_direct(const std::vector<ContrastiveTriple>& data, std::size_t nx, std::size_t nz,
                               std::size_t m, const TrainConfig& config) {
  if (data.empty()) throw std::invalid_argument("train_direct: empty data");
  if (config.batch != 0 && config.batch < data.size()) {
    throw ConfigError("train_direct is full-batch only; set batch to 0 or at least the data size");
  }
  Eigen::MatrixXd pos, neg;
  count_pairs(data, nx, nz, pos, neg);
  const double n = static_cast<double>(data.size());
  DirectTrainResult out = train_direct_weights(pos / n, neg / n, m, config);
  out.scorer.info.train_count = data.size();
  return out;
}

}  // namespace redlab
