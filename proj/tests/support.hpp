#pragma once

// Reference computations used by the test suites. Everything here is written
// from the model definitions directly (series, enumeration, quadrature,
// rejection) and shares no numerical code with the library beyond basic types.

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "ctclust/ctmc.hpp"
#include "ctclust/data.hpp"
#include "ctclust/outcome.hpp"
#include "ctclust/rng.hpp"
#include "ctclust/sampler.hpp"

namespace oracle {

using ctclust::Matrix;
using ctclust::Rng;
using ctclust::Vector;

// ---- CTMC ----

/// Generator with off-diagonal rates uniform on [0, max_rate) and the given
/// fraction of channels zeroed.
Matrix random_rates(int k, double max_rate, double zero_fraction, Rng& rng);

/// Truncated uniformisation series sum_n Pois(n; lambda t) (I + Q / lambda)^n.
Matrix expm_uniformization(const Matrix& q, double t);

/// Two-state closed form with q12 = a, q21 = b.
Matrix two_state_transition(double a, double b, double t);

// ---- paths ----

struct Trajectory {
  int end = 0;
  Eigen::MatrixXi jumps;
  Vector holding;
};

/// Plain Gillespie simulation on [0, delta).
Trajectory gillespie(const Matrix& q, double delta, int start, Rng& rng);

struct Moments {
  std::vector<double> mean;
  std::vector<double> se;
};

/// Means and standard errors of (N_lm for l != m in row-major order, then
/// R_l) over `draws` accepted rejection-sampled paths from start to end.
Moments rejection_path_moments(const Matrix& q, double delta, int start, int end, int draws, Rng& rng);

/// Same summary over caller-supplied (jumps, holding) draws.
Moments summarize_paths(const std::vector<Eigen::MatrixXi>& jumps, const std::vector<Vector>& holding);

// ---- HMM ----

struct Enumerated {
  Matrix a;
  std::vector<Matrix> b;
  double loglik = 0.0;
};

/// Posterior marginals by summing over all K^T latent sequences.
Enumerated enumerate_hmm(const Matrix& log_densities, const Vector& pi, const std::vector<Matrix>& transitions);

// ---- conjugate marginals ----

/// Adaptive Simpson on [lo, hi].
double integrate(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13);

/// log of the integral over (0, inf) or R of exp(logf). `centre` and `scale`
/// locate the bulk of the mass; the range covered is centre +- 60 scale.
double log_integral(const std::function<double(double)>& logf, double centre, double scale, bool positive);

/// Raw observations grouped per (state, level) cell.
using CellObs = std::map<std::pair<int, int>, std::vector<double>>;

/// log int prod_{subject} f dH where H is the prior updated by `others`, as a
/// ratio of two quadratures of (prior x likelihood) products.
double theta_marginal_quadrature(const CellObs& others, const CellObs& subject, const ctclust::ModelSpec& model);

/// Same for one generator channel: jump count and occupancy time.
double q_channel_marginal_quadrature(double shape, double rate, double others_n, double others_r, double n, double r);

/// Exact Dirichlet moment E[prod pi_k^c_k] by rising factorials.
double dirichlet_moment_log(const Vector& alpha, const Vector& counts);

/// Straight-line evaluation of the label marginal for one subject against
/// `others`, block by block, using the quadrature and moment oracles above.
/// With `q_only` only the generator block is included.
double subject_marginal_oracle(const ctclust::OutcomeSuffStats& others, const ctclust::OutcomeSuffStats& subject,
                               const CellObs& others_obs, const CellObs& subject_obs, const ctclust::ModelSpec& model,
                               bool q_only = false);

/// Raw per-cell observations of a subject under a latent state draw.
CellObs cell_observations(const ctclust::SubjectRecord& subject, const std::vector<int>& states);
void append(CellObs& into, const CellObs& from);

// ---- partitions ----

/// All set partitions of {0..n-1} as canonical restricted-growth strings.
std::vector<std::vector<int>> set_partitions(int n);

/// Canonical first-appearance relabelling.
std::vector<int> canonical(const std::vector<int>& labels);

/// Exact posterior over partitions of a frozen state:
/// alpha^M prod Gamma(n_j) exp(joint marginal of block j), normalised.
std::map<std::vector<int>, double> partition_posterior(const ctclust::SamplerState& state, const ctclust::Dataset& data,
                                                       const ctclust::SamplerConfig& config);

double total_variation(const std::map<std::vector<int>, double>& p, const std::map<std::vector<int>, double>& q);

// ---- label conditional ----

/// Direct evaluation of the Polya-urn conditional for subject n of a frozen
/// state: (label, probability) for each cluster of the other subjects in
/// ascending label order, then (-1, probability) for a new cluster.
std::vector<std::pair<int, double>> polya_conditional(const ctclust::SamplerState& state,
                                                      const ctclust::Dataset& data, int n,
                                                      const ctclust::SamplerConfig& config);

// ---- fixtures ----

/// Small Poisson dataset from two well-separated but overlapping designs,
/// used for frozen-state checks.
ctclust::Dataset tiny_dataset(int subjects, int observations, std::uint64_t seed);

/// Sampler configuration for frozen-latent checks (K = 2, Poisson).
ctclust::SamplerConfig tiny_config(std::uint64_t seed);

// ---- random marginal-likelihood cases ----

struct RandomGroup {
  ctclust::OutcomeSuffStats stats;
  CellObs obs;
};

/// Random per-cell observations (up to max_obs per cell) plus random
/// first-visit and path totals.
RandomGroup random_group(const ctclust::ModelSpec& m, int max_obs, Rng& rng);

/// Replaces every prior hyperparameter with a random value in a moderate range.
void randomize_prior(ctclust::ModelSpec& m, Rng& rng);

// ---- MCMC series ----

std::vector<double> ar1_series(double rho, int n, Rng& rng);

}  // namespace oracle
