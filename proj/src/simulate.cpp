#include "ctclust/simulate.hpp"

#include <algorithm>
#include <array>
#include <string>

#include <fmt/format.h>

#include "ctclust/error.hpp"
#include "ctclust/parallel.hpp"

namespace ctclust {

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : values) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

GeneratorMatrix example_generator(int which) {
  switch (which) {
    case 0:
      return validate_generator(rows({{-2.5, 2.0, 0.5}, {0.5, -1.5, 1.0}, {0.1, 0.9, -1.0}}));
    case 1:
      return validate_generator(rows({{-1.2, 1.0, 0.2}, {1.4, -1.5, 0.1}, {0.05, 0.2, -0.25}}));
    default:
      return validate_generator(rows({{-0.5, 0.49, 0.01}, {0.25, -0.3, 0.05}, {0.01, 0.1, -0.11}}));
  }
}

InitialDistribution example_pi(int which) {
  static const Vector p[3] = {vec({0.5, 0.4, 0.1}), vec({0.3, 0.5, 0.2}), vec({0.45, 0.45, 0.1})};
  return InitialDistribution::from_probs(p[which]);
}

double draw_outcome(Family family, double cell, double sigma, Rng& rng) {
  if (family == Family::Poisson) return static_cast<double>(std::poisson_distribution<long>(cell)(rng));
  return std::normal_distribution<double>(cell, sigma)(rng);
}

int draw_index(const Vector& probs, Rng& rng) {
  double u = uniform01(rng);
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    u -= probs(k);
    if (u < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

int SimConfig::num_states() const {
  return clusters.empty() ? 0 : clusters.front().q.dim();
}

int SimConfig::num_levels() const {
  return covariate_probs.size() == 0 ? 1 : static_cast<int>(covariate_probs.size());
}

int SimConfig::num_subjects() const {
  int n = 0;
  for (const auto& c : clusters) n += c.subjects;
  return n;
}

void SimConfig::validate() const {
  if (clusters.empty()) throw Error(ErrorKind::InvalidArgument, "simulation needs at least one cluster");
  const int k = num_states();
  const int levels = num_levels();
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    if (c.subjects < 1) throw Error(ErrorKind::InvalidArgument, fmt::format("cluster {} has no subjects", i + 1));
    if (c.q.dim() != k || c.pi.dim() != k || c.coefficients.cols() != k || c.coefficients.rows() != levels) {
      throw Error(ErrorKind::DimensionMismatch, fmt::format("cluster {} parameter dimensions disagree", i + 1));
    }
  }
  if (num_obs < 1) throw Error(ErrorKind::InvalidArgument, "num_obs must be at least 1");
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  if (family == Family::Gaussian && !(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  if (covariate_probs.size() > 0) {
    if ((covariate_probs.array() < 0.0).any() || std::abs(covariate_probs.sum() - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidArgument, "covariate probabilities must form a distribution");
    }
  }
}

Preset parse_preset(std::string_view name) {
  if (name == "ex1-gaussian") return Preset::Ex1Gaussian;
  if (name == "ex1-poisson") return Preset::Ex1Poisson;
  if (name == "ex2") return Preset::Ex2;
  if (name == "ex3") return Preset::Ex3;
  throw Error(ErrorKind::UnknownPreset, fmt::format("unknown preset '{}'", name));
}

std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::Ex1Gaussian:
      return "ex1-gaussian";
    case Preset::Ex1Poisson:
      return "ex1-poisson";
    case Preset::Ex2:
      return "ex2";
    default:
      return "ex3";
  }
}

SimConfig builtin_example_config(Preset preset, int num_obs, double sigma) {
  SimConfig cfg;
  cfg.num_obs = num_obs;
  const Matrix gaussian_b[3] = {rows({{-4.0, 0.0, 5.0}}), rows({{-5.5, 0.5, 5.5}}), rows({{-5.0, 1.0, 4.8}})};
  const Matrix poisson_b[3] = {rows({{-2.0, 1.2, 3.0}}), rows({{-1.0, 1.0, 2.5}}), rows({{-1.5, 1.1, 2.8}})};
  const Matrix covariate_b[3] = {
      rows({{-2.0, 1.2, 3.0}, {-0.3, 0.0, 0.0}, {0.5, -0.1, -0.1}}),
      rows({{-1.0, 1.0, 2.5}, {0.4, -0.2, -0.5}, {-0.1, 0.0, -0.4}}),
      rows({{-1.5, 1.1, 2.8}, {1.0, 0.1, -0.1}, {-0.5, 0.1, -0.5}}),
  };
  for (int m = 0; m < 3; ++m) {
    SimCluster c;
    c.q = example_generator(m);
    c.subjects = 1000;
    switch (preset) {
      case Preset::Ex1Gaussian:
        c.pi = example_pi(m);
        c.coefficients = gaussian_b[m];
        break;
      case Preset::Ex1Poisson:
        c.pi = example_pi(m);
        c.coefficients = poisson_b[m];
        break;
      case Preset::Ex2:
        c.pi = example_pi(0);
        c.coefficients = gaussian_b[0];
        break;
      case Preset::Ex3:
        c.pi = example_pi(m);
        c.coefficients = covariate_b[m];
        c.subjects = std::array{300, 500, 200}[m];
        break;
    }
    cfg.clusters.push_back(std::move(c));
  }
  switch (preset) {
    case Preset::Ex1Gaussian:
      cfg.family = Family::Gaussian;
      cfg.sigma = 1.0;
      break;
    case Preset::Ex1Poisson:
      cfg.family = Family::Poisson;
      break;
    case Preset::Ex2:
      cfg.family = Family::Gaussian;
      cfg.sigma = sigma;
      break;
    case Preset::Ex3:
      cfg.family = Family::Poisson;
      cfg.covariate_probs = vec({0.25, 0.25, 0.5});
      break;
  }
  return cfg;
}

PresetFitDefaults preset_fit_defaults(Preset preset) {
  switch (preset) {
    case Preset::Ex2:
      return {5, Variant::QOnly};
    case Preset::Ex3:
      return {2, Variant::Full};
    default:
      return {3, Variant::Full};
  }
}

PriorSpec informative_q_prior(int num_states, int num_levels) {
  PriorSpec p = PriorSpec::defaults(num_states, num_levels);
  p.q_shape.setConstant(20.0);
  p.q_rate.setConstant(500.0);
  return p;
}

ModelSpec model_for(const SimConfig& config) {
  ModelSpec m;
  m.family = config.family;
  m.num_states = config.num_states();
  m.num_levels = config.num_levels();
  m.sigma = config.sigma;
  m.prior = PriorSpec::defaults(m.num_states, m.num_levels);
  return m;
}

SimulatedData generate_dataset(const SimConfig& config) {
  config.validate();
  const int n = config.num_subjects();
  const int k = config.num_states();
  SimulatedData out;
  auto& subjects = out.data.subjects;
  auto& truth = out.truth;
  subjects.resize(n);
  truth.labels.resize(n);
  truth.states.resize(n);
  truth.paths.resize(n);
  std::vector<Matrix> cells;
  for (const auto& c : config.clusters) {
    cells.push_back(cells_from_coefficients(c.coefficients, config.family));
    truth.params.push_back(ClusterParams{c.pi, c.q, cells.back()});
    truth.coefficients.push_back(c.coefficients);
  }
  int idx = 0;
  for (std::size_t m = 0; m < config.clusters.size(); ++m) {
    for (int i = 0; i < config.clusters[m].subjects; ++i) truth.labels[idx++] = static_cast<int>(m);
  }

  parallel_for(n, [&](int s) {
    Rng rng = make_stream(config.seed, {static_cast<std::uint64_t>(StreamPhase::Simulate), static_cast<std::uint64_t>(s)});
    const auto& c = config.clusters[truth.labels[s]];
    auto& rec = subjects[s];
    rec.id = std::to_string(s + 1);
    rec.times.assign(1, 0.0);
    std::uniform_real_distribution<double> when(0.0, config.horizon);
    for (int t = 1; t < config.num_obs; ++t) rec.times.push_back(when(rng));
    std::sort(rec.times.begin(), rec.times.end());
    for (std::size_t t = 1; t < rec.times.size(); ++t) {
      if (rec.times[t] <= rec.times[t - 1]) rec.times[t] = rec.times[t - 1] + 1e-9;
    }
    if (config.covariate_probs.size() > 0) {
      for (int t = 0; t < config.num_obs; ++t) rec.levels.push_back(draw_index(config.covariate_probs, rng));
    }
    auto& states = truth.states[s];
    states.push_back(draw_index(c.pi.probs(), rng));
    PathStats total = PathStats::zero(k);
    for (int t = 0; t + 1 < config.num_obs; ++t) {
      SampledPath p = simulate_forward_path(c.q, rec.interval(t), states.back(), rng);
      total += p.stats;
      states.push_back(p.end_state);
    }
    truth.paths[s] = total;
    const Matrix& cl = cells[truth.labels[s]];
    for (int t = 0; t < config.num_obs; ++t) {
      rec.outcomes.push_back(draw_outcome(config.family, cl(states[t], rec.level(t)), config.sigma, rng));
    }
  });
  return out;
}

}  // namespace ctclust
