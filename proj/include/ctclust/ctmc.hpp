#pragma once

#include <complex>
#include <cstdint>
#include <mutex>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace ctclust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Infinitesimal generator of a finite-state continuous-time Markov chain.
/// Off-diagonal rates are non-negative; the diagonal is always recomputed as
/// the negated off-diagonal row sum, so rows sum to zero by construction.
class GeneratorMatrix {
 public:
  GeneratorMatrix() = default;

  /// The 1x1 zero generator (a chain with a single state). Only useful for
  /// degenerate smoothing; validate_generator still requires K >= 2.
  static GeneratorMatrix single_state() { return GeneratorMatrix(Matrix::Zero(1, 1)); }

  int dim() const { return static_cast<int>(rates_.rows()); }
  const Matrix& rates() const { return rates_; }
  double rate(int from, int to) const { return rates_(from, to); }
  double exit_rate(int state) const { return -rates_(state, state); }
  double max_exit_rate() const;

  friend GeneratorMatrix validate_generator(const Matrix& raw);

 private:
  explicit GeneratorMatrix(Matrix rates) : rates_(std::move(rates)) {}
  Matrix rates_;
};

/// Validates a raw K x K rate matrix (K >= 2) and rebuilds its diagonal.
/// Throws NonSquare, DimensionTooSmall, NegativeRate or NonFiniteInput.
GeneratorMatrix validate_generator(const Matrix& raw);

/// Row-stochastic matrix, e.g. expm(delta * Q).
class StochasticMatrix {
 public:
  StochasticMatrix() = default;
  explicit StochasticMatrix(Matrix probs) : probs_(std::move(probs)) {}

  int dim() const { return static_cast<int>(probs_.rows()); }
  const Matrix& probs() const { return probs_; }
  double operator()(int from, int to) const { return probs_(from, to); }

 private:
  Matrix probs_;
};

class InitialDistribution {
 public:
  InitialDistribution() = default;

  /// Throws InvalidArgument for negative entries or a sum away from one.
  static InitialDistribution from_probs(const Vector& probs);
  static InitialDistribution uniform(int dim);
  /// Wraps stored probabilities unchanged (snapshot restore).
  static InitialDistribution restore(Vector probs) { return InitialDistribution(std::move(probs)); }

  int dim() const { return static_cast<int>(probs_.size()); }
  const Vector& probs() const { return probs_; }
  double operator[](int k) const { return probs_(k); }

 private:
  explicit InitialDistribution(Vector probs) : probs_(std::move(probs)) {}
  Vector probs_;
};

/// expm(delta * Q) by scaling and squaring with Pade approximants. Tiny
/// negative round-off is clipped and rows renormalised.
StochasticMatrix transition_matrix(const GeneratorMatrix& q, double delta);

/// Eigenvalues sorted by descending real part, then descending imaginary part.
std::vector<std::complex<double>> generator_eigenvalues(const GeneratorMatrix& q);

/// Solves pi Q = 0, sum(pi) = 1 (least squares; unique for irreducible Q).
Vector stationary_distribution(const GeneratorMatrix& q);

/// Thread-safe memo of transition matrices for one generator, keyed by the
/// interval length quantised at 1e-12.
class TransitionCache {
 public:
  explicit TransitionCache(GeneratorMatrix q) : q_(std::move(q)) {}
  TransitionCache(const TransitionCache&) = delete;
  TransitionCache& operator=(const TransitionCache&) = delete;

  const GeneratorMatrix& generator() const { return q_; }
  Matrix get(double delta);
  std::size_t size() const;

 private:
  GeneratorMatrix q_;
  mutable std::mutex mutex_;
  std::unordered_map<std::int64_t, Matrix> cache_;
};

}  // namespace ctclust
