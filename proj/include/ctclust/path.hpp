#pragma once

#include <Eigen/Dense>

#include "ctclust/ctmc.hpp"
#include "ctclust/rng.hpp"

namespace ctclust {

using CountMatrix = Eigen::MatrixXi;

/// Sufficient statistics of a latent path segment: jump counts between
/// states (zero diagonal) and total occupancy time of each state.
struct PathStats {
  CountMatrix jumps;
  Vector holding;
  double span = 0.0;

  static PathStats zero(int num_states);
  /// Zero-jump path that stays in `state` for the whole span.
  static PathStats constant(int num_states, int state, double span);

  int dim() const { return static_cast<int>(holding.size()); }
  long total_jumps() const { return jumps.cast<long>().sum(); }
  PathStats& operator+=(const PathStats& other);
};

struct SampledPath {
  int start_state = 0;
  int end_state = 0;
  PathStats stats;
};

/// Gillespie simulation over [0, delta) from `start`.
SampledPath simulate_forward_path(const GeneratorMatrix& q, double delta, int start, Rng& rng);

/// Rejection caps used by the endpoint-conditioned sampler.
struct ConditionedSamplerOptions {
  int max_rejections = 10000;
  double impossible_threshold = 1e-300;
  double degenerate_span = 1e-12;
};

/// Draws a path on [0, delta) conditioned on X_0 = start and X_delta = end.
/// Modified rejection sampling (the first jump is forced inside the interval
/// when start != end); after `max_rejections` failures falls back to
/// uniformisation. `p_delta`, when given, must equal expm(delta Q) and saves
/// recomputing it on the fallback path.
PathStats simulate_conditioned_path(const GeneratorMatrix& q, double delta, int start, int end, Rng& rng,
                                    const Matrix* p_delta = nullptr,
                                    const ConditionedSamplerOptions& options = {});

/// Uniformisation-based endpoint-conditioned draw (exact for any endpoints
/// with positive probability).
PathStats simulate_conditioned_path_uniformization(const GeneratorMatrix& q, double delta, int start, int end,
                                                   Rng& rng, const Matrix* p_delta = nullptr);

/// sum_{l != m} [N_lm log q_lm - q_lm R_l]. Throws ZeroRateWithJump.
double path_log_likelihood(const GeneratorMatrix& q, const PathStats& stats);

}  // namespace ctclust
