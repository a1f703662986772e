#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace redlab {

// ---------------------------------------------------------------------------
// Error types. Every public operation reports failure by throwing one of
// these; the C API maps them onto status codes.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A view outside the support of its marginal.
struct DomainError : Error {
  using Error::Error;
};

/// Operation not defined for this model family.
struct UnsupportedModel : Error {
  using Error::Error;
};

/// Non-finite values, divergence, failed quadrature.
struct NumericalError : Error {
  using Error::Error;
};

/// Malformed experiment configuration or CLI input.
struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Counter-based generator: the stream (seed, stream_id) is a pure function of
/// its key, so draw i of a dataset can be produced independently of draws
/// 0..i-1. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double gamma(double shape);
  /// Index drawn from a probability vector (need not be exactly normalized).
  std::size_t categorical(std::span<const double> probs);
  std::vector<double> dirichlet(double alpha, std::size_t k);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Derives an independent 64-bit seed from a parent seed and a tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
}

/// log(1 + exp(t)) without overflow.
inline double log1p_exp(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature
// ---------------------------------------------------------------------------

/// Nodes and weights for integrals against exp(-t^2) on the real line.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached n-point rule. Thread safe.
const HermiteRule& hermite_rule(std::size_t n);

/// E[f(W)] for W ~ N(mean, var) using an n-point rule re-centered at `mean`.
double gaussian_expectation(const std::function<double(double)>& f, double mean, double var,
                            std::size_t nodes);

// ---------------------------------------------------------------------------
// Monte Carlo summaries
// ---------------------------------------------------------------------------

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean with its standard error.
Estimate mean_estimate(std::span<const double> xs);

/// Sample variance with a delete-one jackknife standard error.
Estimate variance_estimate(std::span<const double> xs);

/// Weighted mean and variance of a finite distribution (weights sum to 1).
double weighted_mean(std::span<const double> values, std::span<const double> weights);
double weighted_variance(std::span<const double> values, std::span<const double> weights);

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Worker count: REDLAB_THREADS if set, otherwise hardware concurrency.
std::size_t thread_budget();

/// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
/// the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Least squares fit y = slope * x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace redlab
