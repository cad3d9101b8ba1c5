#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <numbers>
#include <numeric>
#include <set>

#include "ctclust/simulate.hpp"

namespace oracle {

using ctclust::Dataset;
using ctclust::ModelSpec;
using ctclust::OutcomeSuffStats;
using ctclust::SamplerConfig;
using ctclust::SamplerState;

Matrix random_rates(int k, double max_rate, double zero_fraction, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix q = Matrix::Zero(k, k);
  for (int l = 0; l < k; ++l) {
    for (int m = 0; m < k; ++m) {
      if (l != m && u(rng) >= zero_fraction) q(l, m) = max_rate * u(rng);
    }
    q(l, l) = -q.row(l).sum();
  }
  return q;
}

Matrix expm_uniformization(const Matrix& q, double t) {
  const int k = static_cast<int>(q.rows());
  double lambda = 0.0;
  for (int l = 0; l < k; ++l) lambda = std::max(lambda, -q(l, l));
  if (lambda == 0.0 || t == 0.0) return Matrix::Identity(k, k);
  // Split long horizons so the Poisson weights stay representable.
  int halvings = 0;
  while (lambda * t / std::ldexp(1.0, halvings) > 20.0) ++halvings;
  const double h = t / std::ldexp(1.0, halvings);
  const Matrix jump = Matrix::Identity(k, k) + q / lambda;
  const double mu = lambda * h;
  Matrix term = Matrix::Identity(k, k);
  double weight = std::exp(-mu);
  double mass = weight;
  Matrix sum = weight * term;
  for (int n = 1; n < 400 && 1.0 - mass > 1e-17; ++n) {
    term = term * jump;
    weight *= mu / n;
    mass += weight;
    sum += weight * term;
  }
  for (int i = 0; i < halvings; ++i) sum = sum * sum;
  return sum;
}

Matrix two_state_transition(double a, double b, double t) {
  const double s = a + b;
  const double e = std::exp(-s * t);
  Matrix p(2, 2);
  p(0, 0) = (b + a * e) / s;
  p(0, 1) = 1.0 - p(0, 0);
  p(1, 1) = (a + b * e) / s;
  p(1, 0) = 1.0 - p(1, 1);
  return p;
}

Trajectory gillespie(const Matrix& q, double delta, int start, Rng& rng) {
  const int k = static_cast<int>(q.rows());
  Trajectory out{start, Eigen::MatrixXi::Zero(k, k), Vector::Zero(k)};
  double t = 0.0;
  int x = start;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (true) {
    const double rate = -q(x, x);
    const double wait = rate > 0.0 ? -std::log(1.0 - u(rng)) / rate : INFINITY;
    if (t + wait >= delta) {
      out.holding(x) += delta - t;
      break;
    }
    out.holding(x) += wait;
    t += wait;
    double pick = u(rng) * rate;
    int next = x;
    for (int m = 0; m < k; ++m) {
      if (m == x) continue;
      next = m;
      if (pick < q(x, m)) break;
      pick -= q(x, m);
    }
    ++out.jumps(x, next);
    x = next;
  }
  out.end = x;
  return out;
}

Moments summarize_paths(const std::vector<Eigen::MatrixXi>& jumps, const std::vector<Vector>& holding) {
  const int k = static_cast<int>(holding.front().size());
  const double n = static_cast<double>(holding.size());
  std::vector<double> s1, s2;
  auto add = [&](int idx, double v) {
    if (static_cast<int>(s1.size()) <= idx) {
      s1.resize(idx + 1, 0.0);
      s2.resize(idx + 1, 0.0);
    }
    s1[idx] += v;
    s2[idx] += v * v;
  };
  for (std::size_t d = 0; d < holding.size(); ++d) {
    int idx = 0;
    for (int l = 0; l < k; ++l) {
      for (int m = 0; m < k; ++m) {
        if (l != m) add(idx++, jumps[d](l, m));
      }
    }
    for (int l = 0; l < k; ++l) add(idx++, holding[d](l));
  }
  Moments out;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    const double mean = s1[i] / n;
    const double var = std::max(0.0, s2[i] / n - mean * mean) * n / (n - 1.0);
    out.mean.push_back(mean);
    out.se.push_back(std::sqrt(var / n));
  }
  return out;
}

Moments rejection_path_moments(const Matrix& q, double delta, int start, int end, int draws, Rng& rng) {
  std::vector<Eigen::MatrixXi> jumps;
  std::vector<Vector> holding;
  jumps.reserve(draws);
  holding.reserve(draws);
  while (static_cast<int>(holding.size()) < draws) {
    Trajectory tr = gillespie(q, delta, start, rng);
    if (tr.end != end) continue;
    jumps.push_back(std::move(tr.jumps));
    holding.push_back(std::move(tr.holding));
  }
  return summarize_paths(jumps, holding);
}

Enumerated enumerate_hmm(const Matrix& log_densities, const Vector& pi, const std::vector<Matrix>& transitions) {
  const int T = static_cast<int>(log_densities.rows());
  const int K = static_cast<int>(log_densities.cols());
  long total = 1;
  for (int t = 0; t < T; ++t) total *= K;
  std::vector<double> logp(total);
  std::vector<int> seq(T);
  double top = -INFINITY;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int t = 0; t < T; ++t) {
      seq[t] = static_cast<int>(c % K);
      c /= K;
    }
    double lp = std::log(pi(seq[0])) + log_densities(0, seq[0]);
    for (int t = 1; t < T; ++t) lp += std::log(transitions[t - 1](seq[t - 1], seq[t])) + log_densities(t, seq[t]);
    logp[code] = lp;
    top = std::max(top, lp);
  }
  Enumerated out;
  out.a = Matrix::Zero(T, K);
  out.b.assign(std::max(T - 1, 0), Matrix::Zero(K, K));
  double z = 0.0;
  for (long code = 0; code < total; ++code) {
    const double w = std::exp(logp[code] - top);
    z += w;
    long c = code;
    for (int t = 0; t < T; ++t) {
      seq[t] = static_cast<int>(c % K);
      c /= K;
    }
    for (int t = 0; t < T; ++t) out.a(t, seq[t]) += w;
    for (int t = 0; t + 1 < T; ++t) out.b[t](seq[t], seq[t + 1]) += w;
  }
  out.a /= z;
  for (auto& m : out.b) m /= z;
  out.loglik = top + std::log(z);
  return out;
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

double poisson_log_pmf(double o, double rate) { return xlogy(o, rate) - rate - std::lgamma(o + 1.0); }

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * std::log(2.0 * std::numbers::pi * sd * sd) - 0.5 * z * z;
}

double gamma_log_pdf(double x, double shape, double rate) {
  if (x <= 0.0) return shape == 1.0 ? std::log(rate) : (shape > 1.0 ? -INFINITY : INFINITY);
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double lo, double hi, double tol) {
  // Pre-split into panels so narrow peaks are always sampled.
  const int panels = 64;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double a = lo + (hi - lo) * i / panels;
    const double b = lo + (hi - lo) * (i + 1) / panels;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    total += simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol / panels, 40);
  }
  return total;
}

double log_integral(const std::function<double(double)>& logf, double centre, double scale, bool positive) {
  double lo = centre - 60.0 * scale;
  const double hi = centre + 60.0 * scale;
  if (positive) lo = std::max(lo, 0.0);
  double top = -INFINITY;
  for (int i = 0; i <= 2000; ++i) {
    const double v = logf(lo + (hi - lo) * i / 2000.0);
    if (std::isfinite(v)) top = std::max(top, v);
  }
  auto f = [&](double x) {
    const double v = logf(x) - top;
    return std::isfinite(v) ? std::exp(v) : 0.0;
  };
  return top + std::log(integrate(f, lo, hi, 1e-13 * (hi - lo)));
}

double theta_marginal_quadrature(const CellObs& others, const CellObs& subject, const ModelSpec& model) {
  const auto& p = model.prior;
  double total = 0.0;
  for (const auto& [cell, obs] : subject) {
    if (obs.empty()) continue;
    const auto [k, z] = cell;
    const auto it = others.find(cell);
    const std::vector<double> none;
    const auto& prev = it == others.end() ? none : it->second;
    double n_all = 0.0, s_all = 0.0;
    for (double o : prev) n_all += 1.0, s_all += o;
    for (double o : obs) n_all += 1.0, s_all += o;
    if (model.family == ctclust::Family::Poisson) {
      const double a = p.theta_shape(k, z), b = p.theta_rate(k, z);
      auto prior_and_prev = [&](double x) {
        double v = gamma_log_pdf(x, a, b);
        for (double o : prev) v += poisson_log_pmf(o, x);
        return v;
      };
      auto with_subject = [&](double x) {
        double v = prior_and_prev(x);
        for (double o : obs) v += poisson_log_pmf(o, x);
        return v;
      };
      const double shape_prev = a + s_all - std::accumulate(obs.begin(), obs.end(), 0.0);
      const double rate_prev = b + n_all - static_cast<double>(obs.size());
      const double shape_all = a + s_all, rate_all = b + n_all;
      total += log_integral(with_subject, shape_all / rate_all, std::sqrt(shape_all) / rate_all, true) -
               log_integral(prior_and_prev, shape_prev / rate_prev, std::sqrt(shape_prev) / rate_prev, true);
    } else {
      const double m = p.theta_mean(k, z), s = p.theta_sd(k, z), sigma = model.sigma;
      auto prior_and_prev = [&](double x) {
        double v = normal_log_pdf(x, m, s);
        for (double o : prev) v += normal_log_pdf(o, x, sigma);
        return v;
      };
      auto with_subject = [&](double x) {
        double v = prior_and_prev(x);
        for (double o : obs) v += normal_log_pdf(o, x, sigma);
        return v;
      };
      auto locate = [&](const std::vector<const std::vector<double>*>& groups) {
        double prec = 1.0 / (s * s), lin = m / (s * s);
        for (const auto* g : groups) {
          for (double o : *g) prec += 1.0 / (sigma * sigma), lin += o / (sigma * sigma);
        }
        return std::pair{lin / prec, 1.0 / std::sqrt(prec)};
      };
      const auto [c1, s1] = locate({&prev, &obs});
      const auto [c0, s0] = locate({&prev});
      total += log_integral(with_subject, c1, s1, false) - log_integral(prior_and_prev, c0, s0, false);
    }
  }
  return total;
}

double q_channel_marginal_quadrature(double shape, double rate, double others_n, double others_r, double n, double r) {
  if (n == 0.0 && r == 0.0) return 0.0;
  auto prev = [&](double x) { return gamma_log_pdf(x, shape, rate) + xlogy(others_n, x) - others_r * x; };
  auto all = [&](double x) { return prev(x) + xlogy(n, x) - r * x; };
  const double a0 = shape + others_n, b0 = rate + others_r;
  const double a1 = a0 + n, b1 = b0 + r;
  return log_integral(all, a1 / b1, std::sqrt(a1) / b1, true) - log_integral(prev, a0 / b0, std::sqrt(a0) / b0, true);
}

double dirichlet_moment_log(const Vector& alpha, const Vector& counts) {
  double num = 0.0;
  double total_alpha = 0.0;
  int total = 0;
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    const int c = static_cast<int>(std::lround(counts(k)));
    for (int i = 0; i < c; ++i) num += std::log(alpha(k) + i);
    total_alpha += alpha(k);
    total += c;
  }
  double den = 0.0;
  for (int i = 0; i < total; ++i) den += std::log(total_alpha + i);
  return num - den;
}

double subject_marginal_oracle(const OutcomeSuffStats& others, const OutcomeSuffStats& subject,
                               const CellObs& others_obs, const CellObs& subject_obs, const ModelSpec& model,
                               bool q_only) {
  const auto& p = model.prior;
  double q_part = 0.0;
  const int K = static_cast<int>(subject.holding.size());
  for (int l = 0; l < K; ++l) {
    for (int m = 0; m < K; ++m) {
      if (l == m) continue;
      q_part += q_channel_marginal_quadrature(p.q_shape(l, m), p.q_rate(l), others.jumps(l, m), others.holding(l),
                                              subject.jumps(l, m), subject.holding(l));
    }
  }
  if (q_only) return q_part;
  return q_part + theta_marginal_quadrature(others_obs, subject_obs, model) +
         dirichlet_moment_log(p.pi_alpha + others.first_visit, subject.first_visit);
}

CellObs cell_observations(const ctclust::SubjectRecord& subject, const std::vector<int>& states) {
  CellObs out;
  for (int t = 0; t < subject.num_observations(); ++t) out[{states[t], subject.level(t)}].push_back(subject.outcomes[t]);
  return out;
}

void append(CellObs& into, const CellObs& from) {
  for (const auto& [cell, obs] : from) into[cell].insert(into[cell].end(), obs.begin(), obs.end());
}

std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> rgs(n, 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      out.push_back(rgs);
      return;
    }
    for (int b = 0; b <= used && b < n; ++b) {
      rgs[i] = b;
      rec(i + 1, std::max(used, b + 1));
    }
  };
  if (n == 0) return {{}};
  rgs[0] = 0;
  rec(1, 1);
  return out;
}

std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> seen;
  std::vector<int> out;
  for (int l : labels) {
    auto [it, fresh] = seen.try_emplace(l, static_cast<int>(seen.size()));
    out.push_back(it->second);
  }
  return out;
}

namespace {

OutcomeSuffStats zero_like(const SamplerConfig& c) {
  return OutcomeSuffStats::zero(c.model.num_states, c.model.num_levels);
}

}  // namespace

std::map<std::vector<int>, double> partition_posterior(const SamplerState& state, const Dataset& data,
                                                       const SamplerConfig& config) {
  const int n = state.num_subjects();
  const bool q_only = config.variant == ctclust::Variant::QOnly;
  std::map<unsigned, double> block_cache;
  auto block = [&](unsigned mask) {
    auto it = block_cache.find(mask);
    if (it != block_cache.end()) return it->second;
    OutcomeSuffStats total = zero_like(config);
    CellObs obs;
    for (int f = 0; f < n; ++f) {
      if (!(mask & (1u << f))) continue;
      total += state.latent[f].stats;
      append(obs, cell_observations(data.subjects[f], state.latent[f].states));
    }
    const double v = subject_marginal_oracle(zero_like(config), total, {}, obs, config.model, q_only);
    block_cache[mask] = v;
    return v;
  };
  std::map<std::vector<int>, double> out;
  double top = -INFINITY;
  for (const auto& part : set_partitions(n)) {
    const int m = *std::max_element(part.begin(), part.end()) + 1;
    std::vector<unsigned> masks(m, 0u);
    for (int f = 0; f < n; ++f) masks[part[f]] |= 1u << f;
    double lp = m * std::log(config.model.prior.dp_alpha);
    for (unsigned mask : masks) lp += std::lgamma(std::popcount(mask)) + block(mask);
    out[part] = lp;
    top = std::max(top, lp);
  }
  double z = 0.0;
  for (auto& [part, lp] : out) z += (lp = std::exp(lp - top));
  for (auto& [part, w] : out) w /= z;
  return out;
}

double total_variation(const std::map<std::vector<int>, double>& p, const std::map<std::vector<int>, double>& q) {
  std::set<std::vector<int>> keys;
  for (const auto& [k, v] : p) keys.insert(k);
  for (const auto& [k, v] : q) keys.insert(k);
  double tv = 0.0;
  for (const auto& k : keys) {
    const auto a = p.find(k), b = q.find(k);
    tv += std::abs((a == p.end() ? 0.0 : a->second) - (b == q.end() ? 0.0 : b->second));
  }
  return 0.5 * tv;
}

std::vector<std::pair<int, double>> polya_conditional(const SamplerState& state, const Dataset& data, int n,
                                                      const SamplerConfig& config) {
  const int N = state.num_subjects();
  const double alpha = config.model.prior.dp_alpha;
  const bool q_only = config.variant == ctclust::Variant::QOnly;
  const auto& sn = state.latent[n].stats;
  const CellObs on = cell_observations(data.subjects[n], state.latent[n].states);
  std::map<int, std::pair<OutcomeSuffStats, CellObs>> groups;
  std::map<int, int> sizes;
  for (int f = 0; f < N; ++f) {
    if (f == n) continue;
    auto [it, fresh] = groups.try_emplace(state.labels[f], zero_like(config), CellObs{});
    it->second.first += state.latent[f].stats;
    append(it->second.second, cell_observations(data.subjects[f], state.latent[f].states));
    ++sizes[state.labels[f]];
  }
  std::vector<std::pair<int, double>> out;
  std::vector<double> logw;
  for (const auto& [label, g] : groups) {
    out.push_back({label, 0.0});
    logw.push_back(std::log(sizes[label] / (N - 1 + alpha)) +
                   subject_marginal_oracle(g.first, sn, g.second, on, config.model, q_only));
  }
  out.push_back({-1, 0.0});
  logw.push_back(std::log(alpha / (N - 1 + alpha)) + subject_marginal_oracle(zero_like(config), sn, {}, on, config.model, q_only));
  const double top = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double& w : logw) z += (w = std::exp(w - top));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].second = logw[i] / z;
  return out;
}

Dataset tiny_dataset(int subjects, int observations, std::uint64_t seed) {
  ctclust::SimConfig sim;
  sim.family = ctclust::Family::Poisson;
  sim.num_obs = observations;
  sim.horizon = 4.0;
  sim.seed = seed;
  Matrix q1(2, 2), q2(2, 2), b1(1, 2), b2(1, 2);
  q1 << -0.8, 0.8, 0.8, -0.8;
  q2 << -0.2, 0.2, 0.5, -0.5;
  b1 << std::log(1.0), std::log(4.0);
  b2 << std::log(0.6), std::log(2.5);
  Vector pi(2);
  pi << 0.5, 0.5;
  const int first = subjects / 2;
  sim.clusters.push_back({ctclust::InitialDistribution::from_probs(pi), ctclust::validate_generator(q1), b1, first});
  sim.clusters.push_back(
      {ctclust::InitialDistribution::from_probs(pi), ctclust::validate_generator(q2), b2, subjects - first});
  return ctclust::generate_dataset(sim).data;
}

SamplerConfig tiny_config(std::uint64_t seed) {
  SamplerConfig c;
  c.model.family = ctclust::Family::Poisson;
  c.model.num_states = 2;
  c.model.num_levels = 1;
  c.model.prior = ctclust::PriorSpec::defaults(2, 1);
  c.seed = seed;
  c.num_iterations = 10;
  c.burn_in = 0;
  c.restricted_scans = 2;
  c.update_latent = false;
  c.initial_theta = "prior";
  return c;
}

std::vector<double> ar1_series(double rho, int n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n);
  x[0] = z(rng);
  const double s = std::sqrt(1.0 - rho * rho);
  for (int t = 1; t < n; ++t) x[t] = rho * x[t - 1] + s * z(rng);
  return x;
}

// Random per-cell observations plus random first-visit and path totals.
RandomGroup random_group(const ctclust::ModelSpec& m, int max_obs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomGroup g{ctclust::OutcomeSuffStats::zero(m.num_states, m.num_levels), {}};
  for (int k = 0; k < m.num_states; ++k) {
    for (int z = 0; z < m.num_levels; ++z) {
      const int n = static_cast<int>(u(rng) * (max_obs + 1));
      for (int i = 0; i < n; ++i) {
        const double o = m.family == ctclust::Family::Poisson ? std::floor(u(rng) * (3.0 + 4.0 * k)) : 3.0 * k - 3.0 + 2.0 * u(rng);
        g.obs[{k, z}].push_back(o);
        g.stats.count(k, z) += 1;
        g.stats.sum(k, z) += o;
        g.stats.sumsq(k, z) += o * o;
        if (m.family == ctclust::Family::Poisson) g.stats.log_factorial += std::lgamma(o + 1.0);
      }
    }
  }
  g.stats.first_visit(static_cast<int>(u(rng) * m.num_states)) = 1.0;
  for (int l = 0; l < m.num_states; ++l) {
    g.stats.holding(l) = 3.0 * u(rng);
    for (int j = 0; j < m.num_states; ++j) {
      if (l != j) g.stats.jumps(l, j) = std::floor(4.0 * u(rng));
    }
  }
  return g;
}

void randomize_prior(ctclust::ModelSpec& m, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto& p = m.prior;
  p.theta_shape = p.theta_shape.unaryExpr([&](double) { return 1.0 + 3.0 * u(rng); });
  p.theta_rate = p.theta_rate.unaryExpr([&](double) { return 0.3 + 2.0 * u(rng); });
  p.theta_mean = p.theta_mean.unaryExpr([&](double) { return -2.0 + 4.0 * u(rng); });
  p.theta_sd = p.theta_sd.unaryExpr([&](double) { return 0.5 + 3.0 * u(rng); });
  p.pi_alpha = p.pi_alpha.unaryExpr([&](double) { return 0.3 + 2.0 * u(rng); });
  p.q_shape = p.q_shape.unaryExpr([&](double) { return 1.0 + 2.0 * u(rng); });
  p.q_rate = p.q_rate.unaryExpr([&](double) { return 0.5 + 2.0 * u(rng); });
}

}  // namespace oracle
