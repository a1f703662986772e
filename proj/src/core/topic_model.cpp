#include <cmath>
#include <sstream>

#include "redlab/models.hpp"

namespace redlab {

namespace {

constexpr double kSumTol = 1e-12;

// E[theta_j theta_k] under Dirichlet(alpha, ..., alpha) with K coordinates.
double dirichlet_pair_moment(std::size_t k, double alpha, bool same) {
  const double ka = static_cast<double>(k) * alpha;
  return alpha * (alpha + (same ? 1.0 : 0.0)) / (ka * (ka + 1.0));
}

std::vector<std::size_t> word_topics(const TopicSpec& spec) {
  std::vector<std::size_t> topic_of(static_cast<std::size_t>(spec.topic_word.cols()), 0);
  for (Eigen::Index w = 0; w < spec.topic_word.cols(); ++w) {
    for (Eigen::Index t = 0; t < spec.topic_word.rows(); ++t) {
      if (spec.topic_word(t, w) > 0.0) topic_of[static_cast<std::size_t>(w)] = static_cast<std::size_t>(t);
    }
  }
  return topic_of;
}

FiniteParts topic_parts(const TopicSpec& spec) {
  auto violations = TopicModel::validate(spec);
  if (!violations.empty()) throw ModelError(std::move(violations));
  const std::size_t k = spec.num_topics;
  const auto v = spec.topic_word.cols();
  const double alpha = spec.alpha;
  const double ka = static_cast<double>(k) * alpha;

  const std::vector<std::size_t> topic_of = word_topics(spec);
  Eigen::VectorXd word_mass(v);
  for (Eigen::Index w = 0; w < v; ++w) {
    word_mass(w) = spec.topic_word(static_cast<Eigen::Index>(topic_of[static_cast<std::size_t>(w)]), w);
  }

  FiniteParts parts;
  parts.id = spec.id;
  parts.joint.resize(v, v);
  parts.bayes.resize(v, v);
  for (Eigen::Index x = 0; x < v; ++x) {
    const std::size_t kx = topic_of[static_cast<std::size_t>(x)];
    for (Eigen::Index z = 0; z < v; ++z) {
      const std::size_t kz = topic_of[static_cast<std::size_t>(z)];
      parts.joint(x, z) = dirichlet_pair_moment(k, alpha, kx == kz) * word_mass(x) * word_mass(z);
      // Posterior of theta given the two tokens is Dirichlet(alpha + counts).
      double y = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double count = (j == kx ? 1.0 : 0.0) + (j == kz ? 1.0 : 0.0);
        y += spec.label_direction[j] * (alpha + count) / (ka + 2.0);
      }
      parts.bayes(x, z) = y;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      parts.ey2 += spec.label_direction[i] * spec.label_direction[j] *
                   dirichlet_pair_moment(k, alpha, i == j);
    }
  }
  return parts;
}

}  // namespace

std::vector<Violation> TopicModel::validate(const TopicSpec& spec) {
  std::vector<Violation> out;
  const std::size_t k = spec.num_topics;
  if (k == 0) out.push_back({"num_topics", "must be positive", 0.0});
  if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha)) {
    std::ostringstream os;
    os << "alpha = " << spec.alpha << " must be positive and finite";
    out.push_back({"alpha", os.str(), std::isfinite(spec.alpha) ? -spec.alpha : 0.0});
  }
  if (static_cast<std::size_t>(spec.topic_word.rows()) != k) {
    out.push_back({"topic_word", "has " + std::to_string(spec.topic_word.rows()) +
                                     " rows, expected num_topics = " + std::to_string(k), 0.0});
  }
  if (spec.topic_word.cols() == 0) out.push_back({"topic_word", "vocabulary is empty", 0.0});
  if (spec.label_direction.size() != k) {
    out.push_back({"label_direction", "has " + std::to_string(spec.label_direction.size()) +
                                          " entries, expected num_topics = " + std::to_string(k), 0.0});
  }
  if (!out.empty()) return out;

  for (Eigen::Index t = 0; t < spec.topic_word.rows(); ++t) {
    double sum = 0.0;
    for (Eigen::Index w = 0; w < spec.topic_word.cols(); ++w) {
      const double p = spec.topic_word(t, w);
      if (!std::isfinite(p) || p < 0.0) {
        std::ostringstream os;
        os << "entry (" << t << "," << w << ") = " << p << " is negative or non-finite";
        out.push_back({"topic_word", os.str(), std::isfinite(p) ? -p : 0.0});
      }
      sum += p;
    }
    if (!(std::abs(sum - 1.0) <= kSumTol)) {
      std::ostringstream os;
      os << "topic " << t << " sums to " << sum << ", expected 1 within " << kSumTol;
      out.push_back({"topic_word", os.str(), std::abs(sum - 1.0) - kSumTol});
    }
  }
  for (Eigen::Index w = 0; w < spec.topic_word.cols(); ++w) {
    int owners = 0;
    for (Eigen::Index t = 0; t < spec.topic_word.rows(); ++t) {
      if (spec.topic_word(t, w) > 0.0) ++owners;
    }
    if (owners != 1) {
      out.push_back({"topic_word", "word " + std::to_string(w) + " has positive mass under " +
                                       std::to_string(owners) + " topics, expected exactly 1", 0.0});
    }
  }
  for (std::size_t t = 0; t < k; ++t) {
    const double v = spec.label_direction[t];
    if (!(std::abs(v) <= 1.0)) {
      std::ostringstream os;
      os << "entry " << t << " = " << v << " outside [-1, 1]";
      out.push_back({"label_direction", os.str(), std::isfinite(v) ? std::abs(v) - 1.0 : 0.0});
    }
  }
  return out;
}

TopicModel::TopicModel(TopicSpec spec) : FiniteModel(topic_parts(spec)), spec_(std::move(spec)) {
  word_rows_ = spec_.topic_word;
  topic_of_ = word_topics(spec_);
}

Hidden TopicModel::sample_hidden(Rng& rng) const {
  return rng.dirichlet(spec_.alpha, spec_.num_topics);
}

Row TopicModel::sample_row(Rng& rng) const {
  const Hidden theta = sample_hidden(rng);
  const auto v = static_cast<std::size_t>(word_rows_.cols());
  Row row;
  const auto kx = static_cast<Eigen::Index>(rng.categorical(theta));
  row.x = static_cast<View>(rng.categorical({word_rows_.row(kx).data(), v}));
  const auto kz = static_cast<Eigen::Index>(rng.categorical(theta));
  row.z = static_cast<View>(rng.categorical({word_rows_.row(kz).data(), v}));
  for (std::size_t j = 0; j < theta.size(); ++j) row.y += spec_.label_direction[j] * theta[j];
  return row;
}

double TopicModel::x_ratio(View x, const Hidden& theta) const {
  // p(x | theta) = theta_k P_k(x) and p_X(x) = P_k(x) / K.
  return static_cast<double>(spec_.num_topics) * theta.at(topic_of_[x_index(x)]);
}

double TopicModel::z_ratio(View z, const Hidden& theta) const {
  return static_cast<double>(spec_.num_topics) * theta.at(topic_of_[z_index(z)]);
}

}  // namespace redlab
