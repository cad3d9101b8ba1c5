#include "ctclust/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "ctclust/diagnostics.hpp"
#include "ctclust/empirical.hpp"
#include "ctclust/io.hpp"
#include "ctclust/sampler.hpp"
#include "ctclust/simulate.hpp"

#ifndef CTCLUST_VERSION
#define CTCLUST_VERSION "0.0.0"
#endif

namespace ctclust {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IOFailure, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

std::string file_hash(const fs::path& path) {
  return fs::exists(path) ? sha256_hex(read_file(path)) : std::string();
}

struct SimulateOptions {
  std::string config;
  std::string preset;
  std::string out = "sim";
  std::optional<int> num_obs;
  std::optional<int> per_cluster;
  std::vector<int> sizes;
  std::optional<double> sigma;
  std::optional<std::uint64_t> seed;
};

struct FitOptions {
  std::string data;
  std::string config;
  std::string out = "fit";
  std::string preset;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> burn_in;
  std::optional<int> thin;
  std::optional<int> scans;
  std::optional<std::string> variant;
  std::optional<int> checkpoint_interval;
  std::optional<int> initial_clusters;
  std::optional<long> stop_after;
  bool quiet = false;
};

struct SummarizeOptions {
  std::string samples;
  std::string truth;
  std::string out;
  std::string family;
  double horizon = 15.0;
  int grid = 61;
};

int cmd_simulate(const SimulateOptions& o) {
  const auto t0 = Clock::now();
  Json section = Json::object();
  if (!o.config.empty()) {
    const Json cfg = read_json_file(o.config);
    section = cfg.contains("simulate") ? cfg.at("simulate") : cfg;
  }
  if (!o.preset.empty()) {
    section.erase("clusters");
    section["preset"] = o.preset;
  }
  if (o.num_obs) section["T"] = *o.num_obs;
  if (o.per_cluster) section["subjects_per_cluster"] = *o.per_cluster;
  if (!o.sizes.empty()) section["subjects"] = o.sizes;
  if (o.sigma) section["sigma"] = *o.sigma;
  if (o.seed) section["seed"] = *o.seed;
  if (!section.contains("preset") && !section.contains("clusters")) {
    throw Error(ErrorKind::ConfigParse, "simulate needs --preset or a config with a 'simulate' section");
  }
  const SimConfig sim = sim_config_from_json(section);
  const SimulatedData result = generate_dataset(sim);

  const fs::path dir(o.out);
  ensure_dir(dir);
  const std::string csv = format_dataset_csv(result.data);
  write_file_atomic(dir / "data.csv", csv);
  write_file_atomic(dir / "truth.json", truth_to_json(result.truth).dump() + "\n");
  const Json manifest{{"command", "simulate"},
                      {"version", CTCLUST_VERSION},
                      {"config", to_json(sim)},
                      {"seed", sim.seed},
                      {"subjects", result.data.size()},
                      {"dataset_sha256", sha256_hex(csv)},
                      {"timings", {{"total_seconds", seconds_since(t0)}}}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  fmt::print(stderr, "wrote {} subjects to {}\n", result.data.size(), (dir / "data.csv").string());
  return 0;
}

int cmd_fit(const FitOptions& o) {
  const auto t0 = Clock::now();
  const std::string raw = read_file(o.data);
  std::istringstream stream(raw);
  const Dataset data = parse_dataset_csv(stream);
  const std::string fingerprint = sha256_hex(raw);
  const double load_seconds = seconds_since(t0);

  Json cfg = o.config.empty() ? Json::object() : read_json_file(o.config);
  if (!o.preset.empty()) {
    const Preset preset = parse_preset(o.preset);
    const SimConfig sim = builtin_example_config(preset, 2);
    const PresetFitDefaults fit = preset_fit_defaults(preset);
    auto& model = cfg["model"];
    if (!model.contains("family")) model["family"] = to_string(sim.family);
    if (!model.contains("sigma")) model["sigma"] = sim.sigma;
    auto& sampler = cfg["sampler"];
    if (!sampler.contains("restricted_scans")) sampler["restricted_scans"] = fit.restricted_scans;
    if (!sampler.contains("variant")) sampler["variant"] = to_string(fit.variant);
  }
  SamplerConfig config = sampler_config_from_json(cfg, model_from_json(cfg, data.num_levels()));
  if (o.seed) config.seed = *o.seed;
  if (o.iterations) config.num_iterations = *o.iterations;
  if (o.burn_in) config.burn_in = *o.burn_in;
  if (o.thin) config.thin = *o.thin;
  if (o.scans) config.restricted_scans = *o.scans;
  if (o.variant) config.variant = parse_variant(*o.variant);
  if (o.checkpoint_interval) config.checkpoint_interval = *o.checkpoint_interval;
  if (o.initial_clusters) config.initial_clusters = *o.initial_clusters;
  try {
    config.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigParse, e.what());
  }
  if (data.num_levels() > config.model.num_levels) {
    throw Error(ErrorKind::DataParse,
                fmt::format("data has {} covariate levels, model has {}", data.num_levels(), config.model.num_levels));
  }
  apply_theta_anchor(config, data);

  const fs::path dir(o.out);
  ensure_dir(dir);
  const fs::path samples_path = dir / "samples.jsonl";
  const fs::path checkpoint_path = dir / "checkpoint.bin";

  const auto t_init = Clock::now();
  SamplerState state;
  if (!o.resume.empty()) {
    Checkpoint ck = load_checkpoint(o.resume);
    if (ck.dataset_sha256 != fingerprint) {
      throw Error(ErrorKind::DataParse, "checkpoint was written for a different data file");
    }
    if (ck.seed != config.seed) {
      fmt::print(stderr, "resuming with the checkpoint seed {}\n", ck.seed);
      config.seed = ck.seed;
    }
    state = std::move(ck.state);
    if (state.num_subjects() != data.size()) {
      throw Error(ErrorKind::DataParse, "checkpoint subject count differs from the data");
    }
    truncate_samples_jsonl(samples_path, state.iteration);
  } else {
    state = init_state(data, config);
    write_file_atomic(samples_path, "");
  }
  const double init_seconds = seconds_since(t_init);

  SamplerConfig run = config;
  if (o.stop_after && *o.stop_after < run.num_iterations) {
    run.num_iterations = static_cast<int>(*o.stop_after);
    run.burn_in = std::min(run.burn_in, run.num_iterations);
  }

  std::ofstream samples(samples_path, std::ios::app);
  if (!samples) throw Error(ErrorKind::IOFailure, fmt::format("cannot append to '{}'", samples_path.string()));
  const auto t_sample = Clock::now();
  const long report_every = std::max(1, config.num_iterations / 20);
  auto on_sample = [&](const PosteriorSample& s) {
    samples << sample_to_json(s).dump() << '\n';
    samples.flush();
  };
  auto on_checkpoint = [&](const SamplerState& s) {
    save_checkpoint(checkpoint_path, Checkpoint{config.seed, fingerprint, s});
  };
  SamplerConfig stepwise = run;
  while (state.iteration < run.num_iterations) {
    // Advance one reporting block at a time so progress can be logged.
    stepwise.num_iterations = static_cast<int>(std::min<long>(run.num_iterations, state.iteration + report_every));
    stepwise.burn_in = std::min(run.burn_in, stepwise.num_iterations);
    if (stepwise.burn_in < run.burn_in) {
      run_mcmc(data, stepwise, state, {}, on_checkpoint);
    } else {
      run_mcmc(data, stepwise, state, on_sample, on_checkpoint);
    }
    if (!o.quiet) {
      const auto& m = state.moves;
      fmt::print(stderr, "iteration {}/{}  clusters {}  splits {}/{}  merges {}/{}  {:.1f}s\n", state.iteration,
                 config.num_iterations, state.num_clusters(), m.split_accepted, m.split_proposed, m.merge_accepted,
                 m.merge_proposed, seconds_since(t_sample));
    }
  }
  samples.close();
  const double sample_seconds = seconds_since(t_sample);
  save_checkpoint(checkpoint_path, Checkpoint{config.seed, fingerprint, state});

  const Json manifest{{"command", "fit"},
                      {"version", CTCLUST_VERSION},
                      {"data", o.data},
                      {"dataset_sha256", fingerprint},
                      {"config", to_json(config)},
                      {"seed", config.seed},
                      {"iterations_completed", state.iteration},
                      {"resumed", !o.resume.empty()},
                      {"outputs", {{"samples.jsonl", file_hash(samples_path)}}},
                      {"timings",
                       {{"load_seconds", load_seconds},
                        {"init_seconds", init_seconds},
                        {"sampling_seconds", sample_seconds},
                        {"total_seconds", seconds_since(t0)}}}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

ClusterParams mean_params(const ClusterSummary& c) {
  ClusterParams p;
  p.pi = InitialDistribution::restore(c.pi_mean / c.pi_mean.sum());
  p.q = c.q_mean.rows() < 2 ? GeneratorMatrix::single_state() : validate_generator(c.q_mean);
  p.theta = c.theta_mean;
  return p;
}

// Truth parameters with states ordered like the summaries (level-0 cell ascending).
ClusterParams sorted_truth(const ClusterParams& t) {
  const auto k = t.theta.rows();
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return t.theta(a, 0) < t.theta(b, 0); });
  Vector pi(k);
  Matrix q(k, k), theta(k, t.theta.cols());
  for (Eigen::Index a = 0; a < k; ++a) {
    pi(a) = t.pi[order[a]];
    theta.row(a) = t.theta.row(order[a]);
    for (Eigen::Index b = 0; b < k; ++b) q(a, b) = t.q.rate(order[a], order[b]);
  }
  return ClusterParams{InitialDistribution::restore(pi), validate_generator(q), theta};
}

int cmd_summarize(const SummarizeOptions& o) {
  const fs::path dir(o.samples);
  const fs::path out = o.out.empty() ? dir : fs::path(o.out);
  ensure_dir(out);
  const auto samples = read_samples_jsonl(dir / "samples.jsonl");
  if (samples.empty()) throw Error(ErrorKind::EmptySamples, "no posterior samples were retained");
  Family family = Family::Poisson;
  if (!o.family.empty()) {
    family = parse_family(o.family);
  } else if (fs::exists(dir / "manifest.json")) {
    const Json m = read_json_file(dir / "manifest.json");
    if (m.contains("config")) family = parse_family(m["config"]["model"].value("family", "poisson"));
  }
  const FitSummary summary = summarize_samples(samples);

  std::string text = "modal_count,fraction,retained_samples\n";
  text += fmt::format("{},{},{}\n", summary.modal.count, summary.modal.fraction, samples.size());
  write_file_atomic(out / "modal_count.csv", text);

  text = "iteration,clusters\n";
  for (const auto& s : samples) text += fmt::format("{},{}\n", s.iteration, s.num_clusters);
  write_file_atomic(out / "cluster_trace.csv", text);

  text = "subject,cluster\n";
  for (std::size_t i = 0; i < summary.assignments.size(); ++i) {
    text += fmt::format("{},{}\n", i + 1, summary.assignments[i] + 1);
  }
  write_file_atomic(out / "assignments.csv", text);

  text = "cluster,block,row,col,mean,lower95,upper95\n";
  auto emit = [&](int c, std::string_view block, const Matrix& mean, const Matrix& lo, const Matrix& hi) {
    for (Eigen::Index i = 0; i < mean.rows(); ++i) {
      for (Eigen::Index j = 0; j < mean.cols(); ++j) {
        text += fmt::format("{},{},{},{},{},{},{}\n", c, block, i + 1, j + 1, mean(i, j), lo(i, j), hi(i, j));
      }
    }
  };
  for (const auto& c : summary.clusters) {
    emit(c.label + 1, "pi", c.pi_mean, c.pi_lo, c.pi_hi);
    emit(c.label + 1, "Q", c.q_mean, c.q_lo, c.q_hi);
    emit(c.label + 1, "theta", c.theta_mean, c.theta_lo, c.theta_hi);
  }
  write_file_atomic(out / "parameters.csv", text);

  text = "cluster,from,to,ess\n";
  for (std::size_t c = 0; c < summary.q_ess.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(std::llround(std::sqrt(summary.q_ess[c].size())));
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        if (a != b) text += fmt::format("{},{},{},{}\n", c + 1, a + 1, b + 1, summary.q_ess[c](a * k + b));
      }
    }
  }
  write_file_atomic(out / "ess.csv", text);

  text = "cluster,time,from,to,probability\n";
  std::string eig = "cluster,draw,index,real,imag\n";
  for (const auto& c : summary.clusters) {
    if (c.q_draws.empty()) continue;
    const auto curves = transition_probability_curves(c.q_draws, o.horizon, o.grid);
    for (std::size_t g = 0; g < curves.times.size(); ++g) {
      const Matrix& p = curves.probs[g];
      for (Eigen::Index a = 0; a < p.rows(); ++a) {
        for (Eigen::Index b = 0; b < p.cols(); ++b) {
          text += fmt::format("{},{},{},{},{}\n", c.label + 1, curves.times[g], a + 1, b + 1, p(a, b));
        }
      }
    }
    const auto table = eigenvalue_table(c);
    for (std::size_t d = 0; d < table.size(); ++d) {
      for (std::size_t i = 0; i < table[d].size(); ++i) {
        eig += fmt::format("{},{},{},{},{}\n", c.label + 1, d + 1, i + 1, table[d][i].real(), table[d][i].imag());
      }
    }
  }
  write_file_atomic(out / "transition_curves.csv", text);
  write_file_atomic(out / "eigenvalues.csv", eig);

  if (!o.truth.empty()) {
    const GroundTruth truth = truth_from_json(read_json_file(o.truth));
    if (truth.labels.size() != summary.assignments.size()) {
      throw Error(ErrorKind::DataParse, "truth file does not match the sampled subjects");
    }
    const double rate = align_and_misclassify(summary.assignments, truth.labels);
    write_file_atomic(out / "misclassification.csv",
                      fmt::format("modal_count,misclassification_rate\n{},{}\n", summary.modal.count, rate));
    const auto map = best_label_map(summary.assignments, truth.labels);
    text = "cluster,true_cluster,pi_error,B_error,Q_error\n";
    for (const auto& c : summary.clusters) {
      const int t = c.label < static_cast<int>(map.size()) ? map[c.label] : -1;
      if (t < 0 || t >= static_cast<int>(truth.params.size())) continue;
      const auto e = param_norm_error(sorted_truth(truth.params[t]), mean_params(c), family);
      text += fmt::format("{},{},{},{},{}\n", c.label + 1, t + 1, e.pi, e.coefficients, e.q);
    }
    write_file_atomic(out / "norm_errors.csv", text);
  }
  fmt::print(stderr, "modal cluster count {} ({:.1f}% of {} samples)\n", summary.modal.count,
             100.0 * summary.modal.fraction, samples.size());
  return 0;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigParse:
    case ErrorKind::UnknownPreset:
    case ErrorKind::InvalidArgument:
      return 2;
    case ErrorKind::DataParse:
    case ErrorKind::EmptyDataset:
    case ErrorKind::NonMonotoneTimes:
    case ErrorKind::MisalignedInputs:
    case ErrorKind::NegativeCount:
    case ErrorKind::EmptySamples:
      return 3;
    default:
      return 4;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Dirichlet-process clustering of continuous-time hidden Markov trajectories"};
  app.set_version_flag("--version", std::string(CTCLUST_VERSION));
  app.require_subcommand(1);

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--config", so.config, "JSON config with a 'simulate' section");
  sim->add_option("--preset", so.preset, "ex1-gaussian, ex1-poisson, ex2 or ex3");
  sim->add_option("--out", so.out, "output directory")->capture_default_str();
  sim->add_option("--T", so.num_obs, "observations per subject");
  sim->add_option("--subjects-per-cluster", so.per_cluster, "subjects in every cluster");
  sim->add_option("--subjects", so.sizes, "comma-separated subjects per cluster")->delimiter(',');
  sim->add_option("--sigma", so.sigma, "residual sd (Gaussian presets)");
  sim->add_option("--seed", so.seed, "random seed");

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "run the sampler on a data file");
  fit->add_option("--data", fo.data, "long-format CSV")->required();
  fit->add_option("--config", fo.config, "JSON config (model, prior, sampler)");
  fit->add_option("--out", fo.out, "output directory")->capture_default_str();
  fit->add_option("--preset", fo.preset, "take family and sampler defaults from a simulation preset");
  fit->add_option("--resume", fo.resume, "continue from a checkpoint file");
  fit->add_option("--seed", fo.seed, "random seed");
  fit->add_option("--iterations", fo.iterations, "total iterations");
  fit->add_option("--burn-in", fo.burn_in, "discarded leading iterations");
  fit->add_option("--thin", fo.thin, "keep every n-th iteration after burn-in");
  fit->add_option("--restricted-scans", fo.scans, "restricted Gibbs scans in split-merge launches");
  fit->add_option("--variant", fo.variant, "full or q-only");
  fit->add_option("--checkpoint-interval", fo.checkpoint_interval, "iterations between checkpoints (0 = end only)");
  fit->add_option("--initial-clusters", fo.initial_clusters, "number of random initial clusters");
  fit->add_option("--stop-after", fo.stop_after, "stop (with a checkpoint) after this iteration");
  fit->add_flag("--quiet", fo.quiet, "no progress output");

  SummarizeOptions mo;
  auto* sum = app.add_subcommand("summarize", "posterior summaries from a fit directory");
  sum->add_option("--samples", mo.samples, "fit output directory")->required();
  sum->add_option("--truth", mo.truth, "truth.json written by simulate");
  sum->add_option("--out", mo.out, "output directory (default: the samples directory)");
  sum->add_option("--family", mo.family, "outcome family if no manifest is present");
  sum->add_option("--horizon", mo.horizon, "transition-curve horizon")->capture_default_str();
  sum->add_option("--grid", mo.grid, "transition-curve grid points")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(so);
    if (*fit) return cmd_fit(fo);
    return cmd_summarize(mo);
  } catch (const Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 4;
  }
}

}  // namespace ctclust
