#include "ctclust/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <fmt/format.h>

#include "ctclust/empirical.hpp"
#include "ctclust/error.hpp"
#include "ctclust/hmm.hpp"
#include "ctclust/parallel.hpp"

namespace ctclust {

namespace {

Rng stream(const SamplerConfig& config, long iteration, StreamPhase phase, std::uint64_t a = 0, std::uint64_t b = 0) {
  return make_stream(config.seed, {static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(phase), a, b});
}

OutcomeSuffStats zero_stats(const SamplerConfig& config) {
  return OutcomeSuffStats::zero(config.model.num_states, config.model.num_levels);
}

int sample_log_weights(const std::vector<double>& logw, Rng& rng) {
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(logw.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp(logw[i] - top));
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    u -= w[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

std::vector<PathStats> resimulate_paths(const SubjectLatent& latent, const SubjectRecord& subject,
                                        const GeneratorMatrix& q, TransitionCache& cache, Rng& rng) {
  std::vector<PathStats> paths(latent.endpoints.size());
  for (std::size_t t = 0; t < paths.size(); ++t) {
    const double delta = subject.interval(static_cast<int>(t));
    const Matrix p = cache.get(delta);
    paths[t] = simulate_conditioned_path(q, delta, latent.endpoints[t].first, latent.endpoints[t].second, rng, &p);
  }
  return paths;
}

OutcomeSuffStats with_paths(const OutcomeSuffStats& base, const std::vector<PathStats>& paths, int num_states) {
  OutcomeSuffStats s = base;
  PathStats total = PathStats::zero(num_states);
  for (const auto& p : paths) total += p;
  s.jumps = total.jumps.cast<double>();
  s.holding = total.holding;
  return s;
}

ClusterParams draw_new_cluster(const SamplerState& state, const OutcomeSuffStats& stats, const SamplerConfig& config,
                               Rng& rng) {
  if (config.variant == Variant::Full) return sample_cluster_params(stats, config.model, rng);
  ClusterParams c = state.shared;
  c.q = sample_generator(stats, config.model.prior, rng);
  return c;
}

Matrix quantile_cells(const Dataset& data, const ModelSpec& model) {
  std::vector<double> all;
  for (const auto& s : data.subjects) all.insert(all.end(), s.outcomes.begin(), s.outcomes.end());
  std::sort(all.begin(), all.end());
  Matrix cells(model.num_states, model.num_levels);
  for (int k = 0; k < model.num_states; ++k) {
    const double p = (k + 0.5) / model.num_states;
    const auto idx = static_cast<std::size_t>(std::min<double>(p * all.size(), all.size() - 1));
    double v = all[idx];
    if (model.family == Family::Poisson) v = std::max(v, 0.1);
    cells.row(k).setConstant(v);
  }
  return cells;
}

// Incremental Polya-urn sweeper over cluster statistics.
class LabelSweeper {
 public:
  LabelSweeper(SamplerState& state, const SamplerConfig& config) : s_(state), config_(config) {
    const int m = s_.num_clusters();
    stats_.assign(m, zero_stats(config));
    sizes_.assign(m, 0);
    for (int n = 0; n < s_.num_subjects(); ++n) {
      stats_[s_.labels[n]] += s_.latent[n].stats;
      ++sizes_[s_.labels[n]];
    }
  }

  int resample(int n, Rng& rng) {
    const auto& sn = s_.latent[n].stats;
    const int old = s_.labels[n];
    stats_[old] -= sn;
    if (--sizes_[old] == 0) remove_cluster(old);
    s_.labels[n] = -1;

    const int m = static_cast<int>(sizes_.size());
    std::vector<double> logw(m + 1);
    for (int j = 0; j < m; ++j) logw[j] = std::log(sizes_[j]) + label_log_marginal(stats_[j], sn, config_);
    logw[m] = std::log(config_.model.prior.dp_alpha) + label_log_marginal(zero_stats(config_), sn, config_);
    const int pick = sample_log_weights(logw, rng);
    if (pick == m) {
      s_.clusters.push_back(draw_new_cluster(s_, sn, config_, rng));
      stats_.push_back(sn);
      sizes_.push_back(1);
    } else {
      stats_[pick] += sn;
      ++sizes_[pick];
    }
    s_.labels[n] = pick;
    return pick;
  }

 private:
  void remove_cluster(int j) {
    s_.clusters.erase(s_.clusters.begin() + j);
    stats_.erase(stats_.begin() + j);
    sizes_.erase(sizes_.begin() + j);
    for (int& l : s_.labels) {
      if (l > j) --l;
    }
  }

  SamplerState& s_;
  const SamplerConfig& config_;
  std::vector<OutcomeSuffStats> stats_;
  std::vector<int> sizes_;
};

}  // namespace

std::string_view to_string(Variant v) {
  return v == Variant::Full ? "full" : "q-only";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::Full;
  if (name == "q-only" || name == "qonly" || name == "q_only") return Variant::QOnly;
  throw Error(ErrorKind::ConfigParse, fmt::format("unknown sampler variant '{}'", name));
}

void SamplerConfig::validate() const {
  model.validate();
  if (num_iterations < 1) throw Error(ErrorKind::InvalidArgument, "num_iterations must be at least 1");
  if (burn_in < 0 || burn_in > num_iterations) {
    throw Error(ErrorKind::InvalidArgument, "burn_in must lie in [0, num_iterations]");
  }
  if (thin < 1) throw Error(ErrorKind::InvalidArgument, "thin must be at least 1");
  if (restricted_scans < 1) throw Error(ErrorKind::InvalidArgument, "restricted_scans must be at least 1");
  if (initial_clusters < 1) throw Error(ErrorKind::InvalidArgument, "initial_clusters must be at least 1");
  if (checkpoint_interval < 0) throw Error(ErrorKind::InvalidArgument, "checkpoint_interval must be non-negative");
  if (gibbs_sweeps < 0 || split_merge_moves < 0) {
    throw Error(ErrorKind::InvalidArgument, "move counts must be non-negative");
  }
  if (theta_anchor < 0.0) throw Error(ErrorKind::InvalidArgument, "theta_anchor must be non-negative");
  if (initial_theta != "prior" && initial_theta != "quantiles" && initial_theta != "mixture") {
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown initial_theta '{}'", initial_theta));
  }
}

PathStats SubjectLatent::path_total(int num_states) const {
  PathStats total = PathStats::zero(num_states);
  for (const auto& p : paths) total += p;
  return total;
}

std::vector<int> SamplerState::cluster_sizes() const {
  std::vector<int> sizes(clusters.size(), 0);
  for (int l : labels) ++sizes[l];
  return sizes;
}

std::vector<int> SamplerState::members(int label) const {
  std::vector<int> out;
  for (int n = 0; n < num_subjects(); ++n) {
    if (labels[n] == label) out.push_back(n);
  }
  return out;
}

void canonicalize(SamplerState& state) {
  std::vector<int> remap(state.clusters.size(), -1);
  std::vector<ClusterParams> clusters;
  for (int& l : state.labels) {
    if (remap[l] < 0) {
      remap[l] = static_cast<int>(clusters.size());
      clusters.push_back(std::move(state.clusters[l]));
    }
    l = remap[l];
  }
  state.clusters = std::move(clusters);
}

void check_state(const SamplerState& state) {
  const int m = state.num_clusters();
  std::vector<int> seen(m, 0);
  for (int l : state.labels) {
    if (l < 0 || l >= m) throw Error(ErrorKind::InvalidArgument, fmt::format("label {} has no cluster parameters", l));
    seen[l] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorKind::InvalidArgument, "cluster parameters present for an empty cluster");
  }
  if (state.latent.size() != state.labels.size()) {
    throw Error(ErrorKind::MisalignedInputs, "latent state count differs from label count");
  }
}

void refresh_subject_stats(SubjectLatent& latent, const SubjectRecord& subject, const ModelSpec& model) {
  latent.stats = subject_suffstats(subject, latent.states, latent.path_total(model.num_states), model.num_states,
                                   model.num_levels);
}

SamplerState init_state(const Dataset& data, const SamplerConfig& config) {
  validate_dataset(data);
  config.validate();
  const int n = data.size();
  const int m0 = std::min(config.initial_clusters, n);
  Rng rng = stream(config, 0, StreamPhase::Init);
  std::vector<int> labels(n);
  std::uniform_int_distribution<int> pick(0, m0 - 1);
  for (int& l : labels) l = pick(rng);

  const OutcomeSuffStats empty = zero_stats(config);
  const bool quantiles = config.initial_theta != "prior";
  const Matrix qcells =
      config.initial_theta == "mixture" ? mixture_centers(data, config.model) : quantile_cells(data, config.model);
  ClusterParams shared = sample_cluster_params(empty, config.model, rng);
  if (quantiles) shared.theta = qcells;
  std::vector<ClusterParams> clusters;
  for (int j = 0; j < m0; ++j) {
    Rng r = stream(config, 0, StreamPhase::Init, 1 + j);
    ClusterParams c = sample_cluster_params(empty, config.model, r);
    if (quantiles) c.theta = qcells;
    if (config.variant == Variant::QOnly) {
      c.pi = shared.pi;
      c.theta = shared.theta;
    }
    clusters.push_back(std::move(c));
  }
  return init_state(data, config, std::move(labels), std::move(clusters));
}

SamplerState init_state(const Dataset& data, const SamplerConfig& config, std::vector<int> labels,
                        std::vector<ClusterParams> clusters) {
  validate_dataset(data);
  config.validate();
  if (static_cast<int>(labels.size()) != data.size()) {
    throw Error(ErrorKind::MisalignedInputs, "initial labels do not match the number of subjects");
  }
  SamplerState state;
  state.labels = std::move(labels);
  state.clusters = std::move(clusters);
  state.latent.resize(data.size());
  for (int l : state.labels) {
    if (l < 0 || l >= state.num_clusters()) throw Error(ErrorKind::InvalidArgument, "initial label out of range");
  }
  canonicalize(state);
  state.shared = state.clusters.front();
  update_latent(state, data, config, 0);
  return state;
}

void update_latent(SamplerState& state, const Dataset& data, const SamplerConfig& config, long iteration) {
  std::vector<std::unique_ptr<TransitionCache>> caches;
  for (const auto& c : state.clusters) caches.push_back(std::make_unique<TransitionCache>(c.q));
  parallel_for(data.size(), [&](int n) {
    const auto& subject = data.subjects[n];
    const auto& c = state.clusters[state.labels[n]];
    auto& cache = *caches[state.labels[n]];
    Rng rng = stream(config, iteration, StreamPhase::Latent, n);
    const SmoothingResult sm = forward_backward(subject, c.pi, c.q, c.outcome_model(config.model), &cache);
    auto& lat = state.latent[n];
    lat.states = sample_latent_states(sm, rng);
    const int intervals = subject.num_observations() - 1;
    lat.endpoints.resize(intervals);
    for (int t = 0; t < intervals; ++t) lat.endpoints[t] = sample_state_pairs(sm, t, rng);
    lat.paths = resimulate_paths(lat, subject, c.q, cache, rng);
    refresh_subject_stats(lat, subject, config.model);
  });
}

double label_log_marginal(const OutcomeSuffStats& others, const OutcomeSuffStats& subject,
                          const SamplerConfig& config) {
  if (config.variant == Variant::QOnly) return marginal_loglik_q(others, subject, config.model);
  return subject_marginal_loglik(others, subject, config.model);
}

LabelConditional gibbs_label_conditional(const SamplerState& state, int n, const SamplerConfig& config) {
  LabelConditional out;
  std::vector<double> logw;
  const auto& sn = state.latent[n].stats;
  for (int j = 0; j < state.num_clusters(); ++j) {
    OutcomeSuffStats others = zero_stats(config);
    int size = 0;
    for (int i = 0; i < state.num_subjects(); ++i) {
      if (i != n && state.labels[i] == j) {
        others += state.latent[i].stats;
        ++size;
      }
    }
    if (size == 0) continue;
    out.clusters.push_back(j);
    logw.push_back(std::log(size) + label_log_marginal(others, sn, config));
  }
  logw.push_back(std::log(config.model.prior.dp_alpha) + label_log_marginal(zero_stats(config), sn, config));
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double w : logw) total += std::exp(w - top);
  for (double w : logw) out.probs.push_back(std::exp(w - top) / total);
  return out;
}

int resample_label(SamplerState& state, int n, const SamplerConfig& config, Rng& rng) {
  LabelSweeper sweeper(state, config);
  return sweeper.resample(n, rng);
}

void gibbs_label_sweep(SamplerState& state, const SamplerConfig& config, Rng& rng) {
  LabelSweeper sweeper(state, config);
  for (int n = 0; n < state.num_subjects(); ++n) sweeper.resample(n, rng);
  canonicalize(state);
}

std::vector<int> LaunchState::side_members(int s) const {
  std::vector<int> out{s == 0 ? d : e};
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (side[i] == s) out.push_back(members[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double restricted_side1_probability(const LaunchState& launch, int i, const StatsLookup& stats,
                                    const SamplerConfig& config) {
  const auto& sf = stats(launch.members[i]);
  const int cur = launch.side[i];
  double logw[2];
  for (int s = 0; s < 2; ++s) {
    OutcomeSuffStats others = launch.side_stats[s];
    int size = launch.side_size[s];
    if (s == cur) {
      others -= sf;
      --size;
    }
    logw[s] = std::log(size) + label_log_marginal(others, sf, config);
  }
  return 1.0 / (1.0 + std::exp(logw[0] - logw[1]));
}

double restricted_scan(LaunchState& launch, const StatsLookup& stats, const SamplerConfig& config, Rng& rng,
                       const std::vector<int>* target) {
  double logp = 0.0;
  for (std::size_t i = 0; i < launch.members.size(); ++i) {
    const double p1 = restricted_side1_probability(launch, static_cast<int>(i), stats, config);
    const int chosen = target ? (*target)[i] : (uniform01(rng) < p1 ? 1 : 0);
    logp += std::log(chosen == 1 ? p1 : 1.0 - p1);
    const int cur = launch.side[i];
    if (chosen != cur) {
      const auto& sf = stats(launch.members[i]);
      launch.side_stats[cur] -= sf;
      --launch.side_size[cur];
      launch.side_stats[chosen] += sf;
      ++launch.side_size[chosen];
      launch.side[i] = chosen;
    }
  }
  return logp;
}

LaunchState build_launch_state(const SamplerState& state, int d, int e, int scans, const StatsLookup& stats,
                               const SamplerConfig& config, Rng& rng) {
  LaunchState launch;
  launch.d = d;
  launch.e = e;
  const int jd = state.labels[d];
  const int je = state.labels[e];
  for (int f = 0; f < state.num_subjects(); ++f) {
    if (f != d && f != e && (state.labels[f] == jd || state.labels[f] == je)) launch.members.push_back(f);
  }
  launch.side_stats[0] = stats(d);
  launch.side_stats[1] = stats(e);
  launch.side_size[0] = launch.side_size[1] = 1;
  std::bernoulli_distribution coin(0.5);
  for (int f : launch.members) {
    const int s = coin(rng) ? 1 : 0;
    launch.side.push_back(s);
    launch.side_stats[s] += stats(f);
    ++launch.side_size[s];
  }
  for (int k = 0; k < scans; ++k) restricted_scan(launch, stats, config, rng);
  return launch;
}

double prefix_log_marginal(std::span<const int> members, const StatsLookup& stats, const SamplerConfig& config) {
  OutcomeSuffStats acc = zero_stats(config);
  double total = 0.0;
  for (int f : members) {
    total += label_log_marginal(acc, stats(f), config);
    acc += stats(f);
  }
  return total;
}

double split_log_prior_ratio(double dp_alpha, int n_d, int n_e) {
  return std::log(dp_alpha) + std::lgamma(n_d) + std::lgamma(n_e) - std::lgamma(n_d + n_e);
}

double merge_log_prior_ratio(double dp_alpha, int n_d, int n_e) {
  return -split_log_prior_ratio(dp_alpha, n_d, n_e);
}

SplitMergeProposal propose_split_merge(const SamplerState& state, const Dataset& data, const SamplerConfig& config,
                                       Rng& rng, long iteration, int move) {
  const int n = state.num_subjects();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "split-merge needs at least two subjects");
  const int d = std::uniform_int_distribution<int>(0, n - 1)(rng);
  int e = std::uniform_int_distribution<int>(0, n - 2)(rng);
  if (e >= d) ++e;
  return propose_split_merge(state, data, config, rng, d, e, iteration, move);
}

SplitMergeProposal propose_split_merge(const SamplerState& state, const Dataset& data, const SamplerConfig& config,
                                       Rng& rng, int d, int e, long iteration, int move) {
  const int n = state.num_subjects();
  const int K = config.model.num_states;
  const int jd = state.labels[d];
  const int je = state.labels[e];
  const bool refresh = config.refresh_paths_in_split_merge && config.update_latent;

  SplitMergeProposal prop;
  prop.is_split = jd == je;
  prop.d = d;
  prop.e = e;
  prop.labels = state.labels;

  StatsLookup current = [&state](int f) -> const OutcomeSuffStats& { return state.latent[f].stats; };
  std::vector<int> position(n, -1);
  StatsLookup proposed = [&](int f) -> const OutcomeSuffStats& {
    return position[f] >= 0 ? prop.new_stats[position[f]] : state.latent[f].stats;
  };

  // Re-simulates the paths of `group` under a generator drawn from the
  // group's current generator statistics.
  auto refresh_group = [&](const std::vector<int>& group) {
    OutcomeSuffStats total = zero_stats(config);
    for (int f : group) total += state.latent[f].stats;
    prop.generators.push_back(sample_generator(total, config.model.prior, rng));
    const GeneratorMatrix& q = prop.generators.back();
    TransitionCache cache(q);
    const std::size_t base = prop.changed.size();
    for (int f : group) {
      position[f] = static_cast<int>(prop.changed.size());
      prop.changed.push_back(f);
    }
    prop.new_paths.resize(prop.changed.size());
    prop.new_stats.resize(prop.changed.size());
    parallel_for(static_cast<int>(group.size()), [&](int i) {
      const int f = group[i];
      Rng r = stream(config, iteration, StreamPhase::SplitMergePaths,
                     static_cast<std::uint64_t>(move) * 4 + (prop.generators.size() - 1), f);
      prop.new_paths[base + i] = resimulate_paths(state.latent[f], data.subjects[f], q, cache, r);
      prop.new_stats[base + i] = with_paths(state.latent[f].stats, prop.new_paths[base + i], K);
    });
  };

  // Reference statistics for the current configuration: the same treatment
  // applied to each current cluster when `fresh_reference` is set.
  std::vector<OutcomeSuffStats> reference_stats(n);
  std::vector<char> has_reference(n, 0);
  int reference_groups = 0;
  auto reference_group = [&](const std::vector<int>& group) {
    OutcomeSuffStats total = zero_stats(config);
    for (int f : group) total += state.latent[f].stats;
    const GeneratorMatrix q = sample_generator(total, config.model.prior, rng);
    TransitionCache cache(q);
    const std::uint64_t key = static_cast<std::uint64_t>(move) * 4 + 2 + reference_groups++;
    parallel_for(static_cast<int>(group.size()), [&](int i) {
      const int f = group[i];
      Rng r = stream(config, iteration, StreamPhase::SplitMergePaths, key, f);
      reference_stats[f] = with_paths(state.latent[f].stats, resimulate_paths(state.latent[f], data.subjects[f], q, cache, r), K);
      has_reference[f] = 1;
    });
  };
  StatsLookup reference = [&](int f) -> const OutcomeSuffStats& {
    return has_reference[f] ? reference_stats[f] : state.latent[f].stats;
  };
  const bool fresh = refresh && config.fresh_reference_in_split_merge;

  if (prop.is_split) {
    LaunchState launch = build_launch_state(state, d, e, config.restricted_scans, current, config, rng);
    const double log_q = restricted_scan(launch, current, config, rng);
    const auto side0 = launch.side_members(0);
    const auto side1 = launch.side_members(1);
    for (int f : side0) prop.labels[f] = state.num_clusters();
    if (refresh) {
      refresh_group(side0);
      refresh_group(side1);
    }
    std::vector<int> all = side0;
    all.insert(all.end(), side1.begin(), side1.end());
    std::sort(all.begin(), all.end());
    prop.log_proposal_ratio = -log_q;
    prop.log_prior_ratio = split_log_prior_ratio(config.model.prior.dp_alpha, static_cast<int>(side0.size()),
                                                 static_cast<int>(side1.size()));
    prop.log_likelihood_ratio = prefix_log_marginal(side0, proposed, config) +
                                prefix_log_marginal(side1, proposed, config);
    if (fresh) reference_group(all);
    prop.log_likelihood_ratio -= prefix_log_marginal(all, reference, config);
  } else {
    const auto md = state.members(jd);
    const auto me = state.members(je);
    std::vector<int> all = md;
    all.insert(all.end(), me.begin(), me.end());
    std::sort(all.begin(), all.end());
    if (refresh) refresh_group(all);
    LaunchState launch = build_launch_state(state, d, e, config.restricted_scans, proposed, config, rng);
    std::vector<int> target;
    for (int f : launch.members) target.push_back(state.labels[f] == jd ? 0 : 1);
    const double log_q_reverse = restricted_scan(launch, proposed, config, rng, &target);
    for (int f : md) prop.labels[f] = je;
    prop.log_proposal_ratio = log_q_reverse;
    prop.log_prior_ratio = merge_log_prior_ratio(config.model.prior.dp_alpha, static_cast<int>(md.size()),
                                                 static_cast<int>(me.size()));
    if (fresh) {
      reference_group(md);
      reference_group(me);
    }
    prop.log_likelihood_ratio = prefix_log_marginal(all, proposed, config) - prefix_log_marginal(md, reference, config) -
                                prefix_log_marginal(me, reference, config);
  }
  return prop;
}

bool accept_or_reject(SplitMergeProposal prop, SamplerState& state, const SamplerConfig& config, Rng& rng) {
  auto& moves = state.moves;
  (prop.is_split ? moves.split_proposed : moves.merge_proposed)++;
  const double log_a = prop.log_acceptance();
  if (!(log_a >= 0.0 || std::log(uniform01(rng)) < log_a)) return false;
  (prop.is_split ? moves.split_accepted : moves.merge_accepted)++;

  const int je = state.labels[prop.e];
  state.labels = std::move(prop.labels);
  for (std::size_t i = 0; i < prop.changed.size(); ++i) {
    auto& lat = state.latent[prop.changed[i]];
    lat.paths = std::move(prop.new_paths[i]);
    lat.stats = std::move(prop.new_stats[i]);
  }
  if (prop.is_split) {
    const int fresh = state.num_clusters();
    OutcomeSuffStats side = zero_stats(config);
    for (int f = 0; f < state.num_subjects(); ++f) {
      if (state.labels[f] == fresh) side += state.latent[f].stats;
    }
    ClusterParams c = draw_new_cluster(state, side, config, rng);
    if (!prop.generators.empty()) {
      c.q = prop.generators[0];
      state.clusters[je].q = prop.generators[1];
    }
    state.clusters.push_back(std::move(c));
  } else if (!prop.generators.empty()) {
    state.clusters[je].q = prop.generators[0];
  }
  canonicalize(state);
  return true;
}

void refresh_cluster_params(SamplerState& state, const Dataset& data, const SamplerConfig& config, long iteration) {
  const int m = state.num_clusters();
  if (config.update_latent) {
    std::vector<std::unique_ptr<TransitionCache>> caches;
    for (const auto& c : state.clusters) caches.push_back(std::make_unique<TransitionCache>(c.q));
    parallel_for(state.num_subjects(), [&](int n) {
      const int j = state.labels[n];
      Rng rng = stream(config, iteration, StreamPhase::RefreshPaths, n);
      auto& lat = state.latent[n];
      lat.paths = resimulate_paths(lat, data.subjects[n], state.clusters[j].q, *caches[j], rng);
      refresh_subject_stats(lat, data.subjects[n], config.model);
    });
  }
  std::vector<OutcomeSuffStats> stats(m, zero_stats(config));
  OutcomeSuffStats total = zero_stats(config);
  for (int n = 0; n < state.num_subjects(); ++n) {
    stats[state.labels[n]] += state.latent[n].stats;
    total += state.latent[n].stats;
  }
  if (config.variant == Variant::QOnly) {
    Rng rng = stream(config, iteration, StreamPhase::RefreshParams, m);
    state.shared.pi = sample_initial_distribution(total, config.model.prior, rng);
    state.shared.theta = sample_theta(total, config.model, rng);
  }
  for (int j = 0; j < m; ++j) {
    Rng rng = stream(config, iteration, StreamPhase::RefreshParams, j);
    if (config.variant == Variant::Full) {
      state.clusters[j] = sample_cluster_params(stats[j], config.model, rng);
    } else {
      state.clusters[j].q = sample_generator(stats[j], config.model.prior, rng);
      state.clusters[j].pi = state.shared.pi;
      state.clusters[j].theta = state.shared.theta;
    }
  }
}

void sampler_iteration(SamplerState& state, const Dataset& data, const SamplerConfig& config) {
  const long it = state.iteration + 1;
  if (config.update_latent) update_latent(state, data, config, it);
  Rng gibbs = stream(config, it, StreamPhase::Gibbs);
  for (int s = 0; s < config.gibbs_sweeps; ++s) gibbs_label_sweep(state, config, gibbs);
  if (state.num_subjects() >= 2) {
    for (int move = 0; move < config.split_merge_moves; ++move) {
      Rng rng = stream(config, it, StreamPhase::SplitMerge, move);
      SplitMergeProposal prop = propose_split_merge(state, data, config, rng, it, move);
      accept_or_reject(std::move(prop), state, config, rng);
    }
  }
  refresh_cluster_params(state, data, config, it);
  state.iteration = it;
}

void run_mcmc(const Dataset& data, const SamplerConfig& config, SamplerState& state, const SampleSink& on_sample,
              const CheckpointSink& on_checkpoint) {
  config.validate();
  validate_dataset(data);
  check_state(state);
  while (state.iteration < config.num_iterations) {
    sampler_iteration(state, data, config);
    const long it = state.iteration;
    if (on_sample && it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      on_sample(PosteriorSample{it, state.labels, state.num_clusters(), state.clusters});
    }
    if (on_checkpoint && config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0) {
      on_checkpoint(state);
    }
  }
}

std::vector<PosteriorSample> run_mcmc(const Dataset& data, const SamplerConfig& config) {
  SamplerState state = init_state(data, config);
  std::vector<PosteriorSample> out;
  run_mcmc(data, config, state, [&out](const PosteriorSample& s) { out.push_back(s); });
  return out;
}

}  // namespace ctclust
