#pragma once

#include "ctclust/data.hpp"
#include "ctclust/outcome.hpp"
#include "ctclust/sampler.hpp"

namespace ctclust {

/// Pooled K-component mixture fit (Poisson rates or Gaussian means with the
/// model's known sigma) to the outcomes of each covariate level, ignoring
/// subjects and time. Returns K x L centres sorted ascending within each
/// level. Levels with fewer than K observations borrow the all-level fit.
Matrix mixture_centers(const Dataset& data, const ModelSpec& model, int max_iterations = 500);

/// Replaces the outcome-cell prior with one centred on `centers` and worth
/// `strength` pseudo-observations per cell: Gamma(strength, strength / c)
/// for Poisson, Normal(c, sigma^2 / strength) for Gaussian.
void anchor_theta_prior(ModelSpec& model, const Matrix& centers, double strength);

/// Applies config.theta_anchor (if positive) to config.model using the
/// mixture fit of `data`. Deterministic in the data, so a resumed run
/// recovers the same prior.
void apply_theta_anchor(SamplerConfig& config, const Dataset& data);

}  // namespace ctclust
