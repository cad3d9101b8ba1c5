#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctclust/data.hpp"
#include "ctclust/outcome.hpp"
#include "ctclust/path.hpp"
#include "ctclust/rng.hpp"

namespace ctclust {

/// Full: (pi, Q, theta) are cluster specific. QOnly: only Q is cluster
/// specific; pi and theta are shared by all subjects and the label
/// conditionals use the generator block alone.
enum class Variant { Full, QOnly };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct SamplerConfig {
  ModelSpec model;
  int num_iterations = 2000;
  int burn_in = 1000;
  int thin = 1;
  int restricted_scans = 3;
  int initial_clusters = 1;
  std::uint64_t seed = 1;
  Variant variant = Variant::Full;
  int checkpoint_interval = 0;  ///< 0 disables periodic checkpoints
  int gibbs_sweeps = 1;         ///< Polya-urn sweeps per iteration
  int split_merge_moves = 1;    ///< split-merge attempts per iteration
  /// When false the latent states and paths are frozen at their initial
  /// values (no smoothing, no path draws, no path refresh inside split-merge).
  bool update_latent = true;
  /// Re-simulate member paths under freshly drawn generators when building a
  /// split or merge proposal.
  bool refresh_paths_in_split_merge = true;
  /// Also re-simulate the current clusters' paths (under generators drawn from
  /// their own statistics) before evaluating the current configuration, so
  /// both sides of the likelihood ratio use freshly simulated paths.
  bool fresh_reference_in_split_merge = false;
  /// Initial outcome cells: "prior" draws them from the prior, "quantiles"
  /// starts them at evenly spaced empirical outcome quantiles, "mixture" at
  /// the pooled mixture fit of mixture_centers.
  std::string initial_theta = "quantiles";
  /// When positive, callers fitting real data centre the outcome-cell prior
  /// on mixture_centers with this many pseudo-observations per cell (see
  /// apply_theta_anchor). 0 keeps the prior as given.
  double theta_anchor = 0.0;

  void validate() const;
};

/// Latent quantities for one subject.
struct SubjectLatent {
  std::vector<int> states;                     ///< state draw at each observation
  std::vector<std::pair<int, int>> endpoints;  ///< (X_t, X_t+1) pair draw per interval
  std::vector<PathStats> paths;                ///< per-interval path statistics
  OutcomeSuffStats stats;                      ///< derived from states and paths

  PathStats path_total(int num_states) const;
};

struct MoveCounters {
  long split_proposed = 0;
  long split_accepted = 0;
  long merge_proposed = 0;
  long merge_accepted = 0;
};

struct SamplerState {
  std::vector<int> labels;  ///< 0-based, canonical (first appearance order)
  std::vector<SubjectLatent> latent;
  std::vector<ClusterParams> clusters;  ///< one entry per label
  ClusterParams shared;                 ///< QOnly: global pi and theta
  long iteration = 0;                   ///< completed iterations
  MoveCounters moves;

  int num_subjects() const { return static_cast<int>(labels.size()); }
  int num_clusters() const { return static_cast<int>(clusters.size()); }
  std::vector<int> cluster_sizes() const;
  std::vector<int> members(int label) const;
};

/// Relabels clusters 0..M-1 by first appearance and drops empty clusters.
void canonicalize(SamplerState& state);

/// Throws InvalidArgument when labels and cluster params disagree.
void check_state(const SamplerState& state);

/// Recomputes a subject's sufficient statistics from its states and paths.
void refresh_subject_stats(SubjectLatent& latent, const SubjectRecord& subject, const ModelSpec& model);

/// Random labels on {1..M0}, parameters from the prior (outcome cells
/// optionally at empirical quantiles), then one smoothing + path pass.
SamplerState init_state(const Dataset& data, const SamplerConfig& config);

/// Same, but starting from caller-supplied cluster parameters (warm start).
SamplerState init_state(const Dataset& data, const SamplerConfig& config, std::vector<int> labels,
                        std::vector<ClusterParams> clusters);

/// Smooths every subject under its cluster's parameters, draws the latent
/// states and interval endpoint pairs, and simulates conditioned paths.
void update_latent(SamplerState& state, const Dataset& data, const SamplerConfig& config, long iteration);

/// Log marginal used in label conditionals for the configured variant.
double label_log_marginal(const OutcomeSuffStats& others, const OutcomeSuffStats& subject,
                          const SamplerConfig& config);

/// Polya-urn conditional for subject n: probabilities over the clusters of
/// the other subjects followed by one entry for a new cluster. `clusters`
/// lists the label (in the current state) each entry refers to; when n is a
/// singleton its own label is absent.
struct LabelConditional {
  std::vector<int> clusters;
  std::vector<double> probs;
};
LabelConditional gibbs_label_conditional(const SamplerState& state, int n, const SamplerConfig& config);

/// Resamples subject n's label from its conditional; returns the new label.
int resample_label(SamplerState& state, int n, const SamplerConfig& config, Rng& rng);

/// One Polya-urn sweep over all subjects in ascending index order.
void gibbs_label_sweep(SamplerState& state, const SamplerConfig& config, Rng& rng);

using StatsLookup = std::function<const OutcomeSuffStats&(int subject)>;

/// Launch configuration for a split-merge move over S = M + {d, e}. Side 0 is
/// the component holding d, side 1 the component holding e.
struct LaunchState {
  int d = -1;
  int e = -1;
  std::vector<int> members;  ///< the set M, ascending
  std::vector<int> side;     ///< side of each entry of `members`
  OutcomeSuffStats side_stats[2];
  int side_size[2] = {0, 0};

  /// Subjects on a side including d or e, ascending.
  std::vector<int> side_members(int s) const;
};

/// Two-way restricted conditional P(side = 1) for members[i], with the
/// member removed from its current side.
double restricted_side1_probability(const LaunchState& launch, int i, const StatsLookup& stats,
                                    const SamplerConfig& config);

/// Random initial sides for M followed by `scans` restricted Gibbs sweeps.
LaunchState build_launch_state(const SamplerState& state, int d, int e, int scans, const StatsLookup& stats,
                               const SamplerConfig& config, Rng& rng);

/// One restricted sweep over M. When `target` is given the sides are set to
/// it instead of sampled; either way the log probability of the resulting
/// assignment is returned.
double restricted_scan(LaunchState& launch, const StatsLookup& stats, const SamplerConfig& config, Rng& rng,
                       const std::vector<int>* target = nullptr);

/// sum_f log integral L_f dH_f over `members` in ascending order, H_f being
/// the posterior from the prior and the preceding members.
double prefix_log_marginal(std::span<const int> members, const StatsLookup& stats, const SamplerConfig& config);

struct SplitMergeProposal {
  bool is_split = false;
  int d = -1;
  int e = -1;
  std::vector<int> labels;  ///< proposed labels (new split cluster = num_clusters)
  std::vector<int> changed;  ///< subjects whose paths were re-simulated
  std::vector<std::vector<PathStats>> new_paths;
  std::vector<OutcomeSuffStats> new_stats;
  /// split: {generator for d's side, generator for e's side}; merge: {merged}.
  std::vector<GeneratorMatrix> generators;
  double log_proposal_ratio = 0.0;  ///< log q(C | C*) - log q(C* | C)
  double log_prior_ratio = 0.0;
  double log_likelihood_ratio = 0.0;

  double log_acceptance() const { return log_proposal_ratio + log_prior_ratio + log_likelihood_ratio; }
};

/// log pi0(C_split) / pi0(C) for a cluster of n_d + n_e split into n_d and n_e.
double split_log_prior_ratio(double dp_alpha, int n_d, int n_e);
double merge_log_prior_ratio(double dp_alpha, int n_d, int n_e);

/// Builds a split or merge proposal from a uniformly chosen ordered pair of
/// distinct subjects. Requires at least two subjects.
SplitMergeProposal propose_split_merge(const SamplerState& state, const Dataset& data, const SamplerConfig& config,
                                       Rng& rng, long iteration = 0, int move = 0);

/// Same with a fixed pair (d, e).
SplitMergeProposal propose_split_merge(const SamplerState& state, const Dataset& data, const SamplerConfig& config,
                                       Rng& rng, int d, int e, long iteration, int move);

/// Metropolis-Hastings step; on acceptance adopts labels, the re-simulated
/// paths and the proposal's generators. Returns whether it accepted.
bool accept_or_reject(SplitMergeProposal proposal, SamplerState& state, const SamplerConfig& config, Rng& rng);

/// Re-simulates member paths under each cluster's generator (when latent
/// updates are on) and draws (pi, Q, theta) from the conjugate posteriors.
void refresh_cluster_params(SamplerState& state, const Dataset& data, const SamplerConfig& config, long iteration);

/// One full iteration: latent states, paths, Gibbs sweeps, split-merge
/// moves, parameter refresh.
void sampler_iteration(SamplerState& state, const Dataset& data, const SamplerConfig& config);

struct PosteriorSample {
  long iteration = 0;
  std::vector<int> labels;  ///< 0-based canonical labels
  int num_clusters = 0;
  std::vector<ClusterParams> clusters;
};

using SampleSink = std::function<void(const PosteriorSample&)>;
using CheckpointSink = std::function<void(const SamplerState&)>;

/// Advances `state` until config.num_iterations, emitting one sample per
/// retained (post burn-in, thinned) iteration and checkpointing at the
/// configured interval.
void run_mcmc(const Dataset& data, const SamplerConfig& config, SamplerState& state, const SampleSink& on_sample,
              const CheckpointSink& on_checkpoint = {});

/// Convenience: fresh initial state, all retained samples returned.
std::vector<PosteriorSample> run_mcmc(const Dataset& data, const SamplerConfig& config);

}  // namespace ctclust
