#pragma once

#include <utility>
#include <vector>

#include "ctclust/ctmc.hpp"
#include "ctclust/data.hpp"
#include "ctclust/outcome.hpp"
#include "ctclust/rng.hpp"

namespace ctclust {

/// Posterior smoothing output for one subject with T observations.
struct SmoothingResult {
  Matrix state_marginals;            ///< T x K, a(t, k) = P(X_t = k | O)
  std::vector<Matrix> pair_marginals;  ///< T-1 matrices, b[t](k, j) = P(X_t = k, X_t+1 = j | O)
  double loglik = 0.0;               ///< log P(O)
  Vector log_scalers;                ///< per-step log normalisers; they sum to loglik

  int num_steps() const { return static_cast<int>(state_marginals.rows()); }
  int num_states() const { return static_cast<int>(state_marginals.cols()); }
};

/// Scaled forward-backward pass. Interval transition matrices come from
/// `cache` when given, otherwise they are computed here.
/// Throws NonMonotoneTimes and ZeroLikelihood.
SmoothingResult forward_backward(const SubjectRecord& subject, const InitialDistribution& pi, const GeneratorMatrix& q,
                                 const OutcomeModel& outcome, TransitionCache* cache = nullptr);

/// Same recursion with caller-provided log densities (T x K) and interval
/// transition matrices; the entry point used by tests of the recursion itself.
SmoothingResult forward_backward(const Matrix& log_densities, const InitialDistribution& pi,
                                 const std::vector<Matrix>& transitions);

/// Independent draws X_t ~ a(t, .).
std::vector<int> sample_latent_states(const SmoothingResult& sm, Rng& rng);

/// (X_t, X_t+1) ~ b[t] for a 0-based interval index t < T-1.
std::pair<int, int> sample_state_pairs(const SmoothingResult& sm, int t, Rng& rng);

}  // namespace ctclust
