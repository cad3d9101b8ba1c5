#pragma once

#include <complex>
#include <span>
#include <vector>

#include "ctclust/ctmc.hpp"
#include "ctclust/outcome.hpp"
#include "ctclust/sampler.hpp"

namespace ctclust {

struct ModalCount {
  int count = 0;
  double fraction = 0.0;
};

/// Most frequent cluster count; ties go to the smaller count. EmptyTrace.
ModalCount modal_cluster_count(std::span<const int> counts);

/// Smallest fraction of disagreements over injective maps from estimated
/// labels to true labels (labels are arbitrary non-negative integers).
/// LengthMismatch when sizes differ.
double align_and_misclassify(std::span<const int> estimate, std::span<const int> truth);

/// Best label map found by align_and_misclassify: map[estimated] = true label
/// (or -1 when an estimated label had to be left unmatched).
std::vector<int> best_label_map(std::span<const int> estimate, std::span<const int> truth);

/// n / (1 + 2 sum rho_k) with Geyer's initial monotone positive sequence
/// truncation, clamped to (0, n]. Needs n >= 10; ConstantSeries on zero variance.
double effective_sample_size(std::span<const double> series);

/// Posterior-mean transition curves: result[g] = mean over samples of
/// expm(t_g Q), t_g = horizon * g / (grid_points - 1).
struct TransitionCurves {
  std::vector<double> times;
  std::vector<Matrix> probs;
};
TransitionCurves transition_probability_curves(std::span<const GeneratorMatrix> samples, double horizon,
                                               int grid_points);

struct NormErrors {
  double pi = 0.0;
  double coefficients = 0.0;
  double q = 0.0;
};

/// ||pi - pi_hat||_2, ||B - B_hat||_F, ||Q - Q_hat||_F. DimensionMismatch.
NormErrors param_norm_error(const ClusterParams& truth, const ClusterParams& estimate, Family family);

/// Label-switching resolution over retained samples whose cluster count
/// equals `count`: every sample is aligned to a reference (the last such
/// sample) by greedy maximum overlap; the result maps sample index to a
/// permutation old label -> aligned label. Non-matching samples get an empty
/// entry.
std::vector<std::vector<int>> align_to_reference(std::span<const PosteriorSample> samples, int count);

struct ClusterSummary {
  int label = 0;  ///< aligned label
  int draws = 0;
  Vector pi_mean, pi_lo, pi_hi;
  Matrix q_mean, q_lo, q_hi;
  Matrix theta_mean, theta_lo, theta_hi;
  std::vector<GeneratorMatrix> q_draws;
};

struct FitSummary {
  ModalCount modal;
  std::vector<int> counts;            ///< cluster count per retained sample
  std::vector<int> assignments;       ///< per-subject modal aligned label
  std::vector<ClusterSummary> clusters;
  /// ess(c, k * K + j) for q_kj of aligned cluster c (diagonal entries unused)
  std::vector<Vector> q_ess;
};

/// Summaries conditional on the modal count, with latent states of every
/// cluster ordered by their level-0 outcome cell (ascending) before
/// averaging. EmptySamples when nothing was retained.
FitSummary summarize_samples(std::span<const PosteriorSample> samples);

/// Eigenvalues of every aligned Q draw of a summary cluster.
std::vector<std::vector<std::complex<double>>> eigenvalue_table(const ClusterSummary& cluster);

/// Per-subject modal labels for the modal count (same alignment as above).
std::vector<int> modal_assignments(std::span<const PosteriorSample> samples, int count);

/// Empirical quantile with linear interpolation, p in [0, 1].
double quantile(std::vector<double> values, double p);

}  // namespace ctclust
