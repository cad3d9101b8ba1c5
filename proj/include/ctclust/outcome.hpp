#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "ctclust/ctmc.hpp"
#include "ctclust/data.hpp"
#include "ctclust/path.hpp"
#include "ctclust/rng.hpp"

namespace ctclust {

enum class Family { Poisson, Gaussian };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

/// Conjugate priors. Theta cells are indexed (state, covariate level):
/// Poisson rates take Gamma(theta_shape, theta_rate), Gaussian means take
/// Normal(theta_mean, theta_sd^2). Generator channels take
/// Gamma(q_shape(l, m), q_rate(l)); the initial distribution Dirichlet(pi_alpha).
struct PriorSpec {
  Matrix theta_shape;
  Matrix theta_rate;
  Matrix theta_mean;
  Matrix theta_sd;
  Vector pi_alpha;
  Matrix q_shape;
  Vector q_rate;
  double dp_alpha = 1.0;

  /// Gamma(1, 1) on rates and channels, Normal(0, 10^2) on means,
  /// Dirichlet(1, ..., 1), alpha = 1.
  static PriorSpec defaults(int num_states, int num_levels);
  void validate(int num_states, int num_levels) const;
};

struct ModelSpec {
  Family family = Family::Poisson;
  int num_states = 3;
  int num_levels = 1;
  double sigma = 1.0;  ///< known residual sd, Gaussian only
  PriorSpec prior;

  void validate() const;
};

/// Observation model at the per-cell level: `cells(k, level)` is a Poisson
/// rate or a Gaussian mean.
class OutcomeModel {
 public:
  OutcomeModel() = default;
  OutcomeModel(Family family, Matrix cells, double sigma = 1.0);

  Family family() const { return family_; }
  const Matrix& cells() const { return cells_; }
  double sigma() const { return sigma_; }
  int num_states() const { return static_cast<int>(cells_.rows()); }
  int num_levels() const { return static_cast<int>(cells_.cols()); }

  double log_density(double o, int state, int level = 0) const;

 private:
  Family family_ = Family::Poisson;
  Matrix cells_;
  double sigma_ = 1.0;
};

/// Log density of one outcome; NegativeCount for Poisson o < 0.
double outcome_log_density(const OutcomeModel& model, double o, int state, int level = 0);

/// Additive sufficient statistics for one subject or a group of subjects.
struct OutcomeSuffStats {
  Matrix count;          ///< K x L observations assigned to each cell
  Matrix sum;            ///< K x L sum of outcomes
  Matrix sumsq;          ///< K x L sum of squared outcomes
  double log_factorial = 0.0;  ///< sum of log(o!) (Poisson)
  Vector first_visit;    ///< K first-observation state counts
  Matrix jumps;          ///< K x K path jump totals
  Vector holding;        ///< K path occupancy totals

  static OutcomeSuffStats zero(int num_states, int num_levels);

  OutcomeSuffStats& operator+=(const OutcomeSuffStats& other);
  OutcomeSuffStats& operator-=(const OutcomeSuffStats& other);
  friend OutcomeSuffStats operator+(OutcomeSuffStats a, const OutcomeSuffStats& b) { return a += b; }
};

/// Statistics for one subject given its latent state draw and the total of
/// its interval path statistics.
OutcomeSuffStats subject_suffstats(const SubjectRecord& subject, std::span<const int> states, const PathStats& path,
                                   int num_states, int num_levels);

/// Sum of subject_suffstats over aligned slices (MisalignedInputs otherwise).
OutcomeSuffStats accumulate_suffstats(std::span<const SubjectRecord> subjects,
                                      std::span<const std::vector<int>> states, std::span<const PathStats> paths,
                                      int num_states, int num_levels);

/// log of the integral of the subject's likelihood against the posterior
/// formed from the prior and `others` (closed-form conjugate ratios).
double marginal_loglik_theta(const OutcomeSuffStats& others, const OutcomeSuffStats& subject, const ModelSpec& model);
double marginal_loglik_pi(const OutcomeSuffStats& others, const OutcomeSuffStats& subject, const ModelSpec& model);
double marginal_loglik_q(const OutcomeSuffStats& others, const OutcomeSuffStats& subject, const ModelSpec& model);
/// Sum of the three blocks above.
double subject_marginal_loglik(const OutcomeSuffStats& others, const OutcomeSuffStats& subject,
                               const ModelSpec& model);

struct ClusterParams {
  InitialDistribution pi;
  GeneratorMatrix q;
  Matrix theta;  ///< K x L outcome cells

  OutcomeModel outcome_model(const ModelSpec& model) const { return {model.family, theta, model.sigma}; }
};

GeneratorMatrix sample_generator(const OutcomeSuffStats& stats, const PriorSpec& prior, Rng& rng);
InitialDistribution sample_initial_distribution(const OutcomeSuffStats& stats, const PriorSpec& prior, Rng& rng);
Matrix sample_theta(const OutcomeSuffStats& stats, const ModelSpec& model, Rng& rng);

/// Draws (pi, Q, theta) from their conjugate posteriors given `stats`.
ClusterParams sample_cluster_params(const OutcomeSuffStats& stats, const ModelSpec& model, Rng& rng);

/// Regression-style coefficients from cells: row 0 is the baseline-level
/// intercept per state, row d > 0 the contrast of level d against level 0,
/// on the log scale for Poisson and the identity scale for Gaussian.
Matrix coefficients_from_cells(const Matrix& cells, Family family);
Matrix cells_from_coefficients(const Matrix& coefficients, Family family);

}  // namespace ctclust
