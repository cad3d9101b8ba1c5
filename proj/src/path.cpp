#include "ctclust/path.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "ctclust/error.hpp"

namespace ctclust {

PathStats PathStats::zero(int num_states) {
  return PathStats{CountMatrix::Zero(num_states, num_states), Vector::Zero(num_states), 0.0};
}

PathStats PathStats::constant(int num_states, int state, double span) {
  PathStats s = zero(num_states);
  s.holding(state) = span;
  s.span = span;
  return s;
}

PathStats& PathStats::operator+=(const PathStats& other) {
  jumps += other.jumps;
  holding += other.holding;
  span += other.span;
  return *this;
}

namespace {

void check_inputs(const GeneratorMatrix& q, double delta, int state) {
  if (!std::isfinite(delta) || !q.rates().allFinite()) {
    throw Error(ErrorKind::NonFiniteInput, "non-finite generator or interval");
  }
  if (state < 0 || state >= q.dim()) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("state {} outside 1..{}", state + 1, q.dim()));
  }
}

int draw_jump_target(const GeneratorMatrix& q, int from, Rng& rng) {
  const double total = q.exit_rate(from);
  double u = uniform01(rng) * total;
  int last = from;
  for (int m = 0; m < q.dim(); ++m) {
    if (m == from) continue;
    const double r = q.rate(from, m);
    if (r <= 0.0) continue;
    last = m;
    if (u < r) return m;
    u -= r;
  }
  return last;
}

/// Continues a path from `state` at time `elapsed` until `delta`, recording
/// into `stats`; returns the state at `delta`. Occupancy of the final
/// segment is taken as the complement so the holding times sum to `delta`.
int run_forward(const GeneratorMatrix& q, double delta, int state, double elapsed, PathStats& stats, Rng& rng) {
  double accounted = 0.0;
  for (int l = 0; l < stats.dim(); ++l) accounted += stats.holding(l);
  for (;;) {
    const double rate = q.exit_rate(state);
    if (rate <= 0.0) break;
    const double hold = std::exponential_distribution<double>(rate)(rng);
    if (elapsed + hold >= delta) break;
    elapsed += hold;
    stats.holding(state) += hold;
    accounted += hold;
    const int next = draw_jump_target(q, state, rng);
    stats.jumps(state, next) += 1;
    state = next;
  }
  stats.holding(state) += delta - accounted;
  return state;
}

}  // namespace

SampledPath simulate_forward_path(const GeneratorMatrix& q, double delta, int start, Rng& rng) {
  check_inputs(q, delta, start);
  if (delta <= 0.0) throw Error(ErrorKind::InvalidArgument, fmt::format("interval must be positive, got {}", delta));
  SampledPath path;
  path.start_state = start;
  path.stats = PathStats::zero(q.dim());
  path.stats.span = delta;
  path.end_state = run_forward(q, delta, start, 0.0, path.stats, rng);
  return path;
}

PathStats simulate_conditioned_path(const GeneratorMatrix& q, double delta, int start, int end, Rng& rng,
                                    const Matrix* p_delta, const ConditionedSamplerOptions& options) {
  check_inputs(q, delta, start);
  check_inputs(q, delta, end);
  const int k = q.dim();

  if (delta <= options.degenerate_span) {
    if (start == end) return PathStats::constant(k, start, std::max(delta, 0.0));
    throw Error(ErrorKind::ImpossibleEndpoint,
                fmt::format("{} -> {} over a vanishing interval {}", start + 1, end + 1, delta));
  }

  const double exit = q.exit_rate(start);
  if (start != end && exit <= 0.0) {
    throw Error(ErrorKind::ImpossibleEndpoint, fmt::format("state {} is absorbing", start + 1));
  }

  for (int attempt = 0; attempt < options.max_rejections; ++attempt) {
    PathStats stats = PathStats::zero(k);
    stats.span = delta;
    int state = start;
    double elapsed = 0.0;
    if (start != end) {
      // First holding time from Exp(exit) truncated to [0, delta).
      const double u = uniform01(rng);
      const double hold = -std::log1p(-u * -std::expm1(-exit * delta)) / exit;
      elapsed = std::min(hold, delta);
      stats.holding(start) += elapsed;
      state = draw_jump_target(q, start, rng);
      stats.jumps(start, state) += 1;
    }
    if (run_forward(q, delta, state, elapsed, stats, rng) == end) return stats;
  }

  Matrix local;
  if (p_delta == nullptr) {
    local = transition_matrix(q, delta).probs();
    p_delta = &local;
  }
  if ((*p_delta)(start, end) < options.impossible_threshold) {
    throw Error(ErrorKind::ImpossibleEndpoint,
                fmt::format("P({} -> {}; {}) = {}", start + 1, end + 1, delta, (*p_delta)(start, end)));
  }
  return simulate_conditioned_path_uniformization(q, delta, start, end, rng, p_delta);
}

PathStats simulate_conditioned_path_uniformization(const GeneratorMatrix& q, double delta, int start, int end,
                                                   Rng& rng, const Matrix* p_delta) {
  check_inputs(q, delta, start);
  check_inputs(q, delta, end);
  const int k = q.dim();
  const double mu = q.max_exit_rate();
  if (mu <= 0.0) {
    if (start == end) return PathStats::constant(k, start, delta);
    throw Error(ErrorKind::ImpossibleEndpoint, "zero generator cannot change state");
  }
  Matrix local;
  if (p_delta == nullptr) {
    local = transition_matrix(q, delta).probs();
    p_delta = &local;
  }
  const double target = (*p_delta)(start, end);
  if (!(target > 0.0)) throw Error(ErrorKind::ImpossibleEndpoint, "endpoint has zero probability");

  const Matrix r = Matrix::Identity(k, k) + q.rates() / mu;
  const double md = mu * delta;

  // Number of uniformised events n ~ Pois(md) R^n(a,b) / P(a,b).
  std::vector<Matrix> powers{Matrix::Identity(k, k)};
  const double u = uniform01(rng) * target;
  double log_pois = -md;
  double cumulative = 0.0;
  const int cap = static_cast<int>(md + 50.0 * std::sqrt(md) + 200.0);
  int n = 0;
  for (;; ++n) {
    if (n > 0) {
      powers.push_back(powers.back() * r);
      log_pois += std::log(md) - std::log(static_cast<double>(n));
    }
    cumulative += std::exp(log_pois) * powers[n](start, end);
    if (cumulative >= u) break;
    if (n >= cap) {
      throw Error(ErrorKind::SamplerExhausted,
                  fmt::format("uniformisation did not reach the endpoint mass after {} events", cap));
    }
  }

  std::vector<double> times(n);
  for (auto& t : times) t = uniform01(rng) * delta;
  std::sort(times.begin(), times.end());

  PathStats stats = PathStats::zero(k);
  stats.span = delta;
  int state = start;
  double last = 0.0;
  std::vector<double> w(k);
  for (int i = 1; i <= n; ++i) {
    // Next state x with prob R(state, x) R^{n-i}(x, end) / R^{n-i+1}(state, end).
    double total = 0.0;
    for (int x = 0; x < k; ++x) {
      w[x] = r(state, x) * powers[n - i](x, end);
      total += w[x];
    }
    double v = uniform01(rng) * total;
    int next = k - 1;
    for (int x = 0; x < k; ++x) {
      if (v < w[x]) { next = x; break; }
      v -= w[x];
    }
    if (next != state) {
      stats.holding(state) += times[i - 1] - last;
      last = times[i - 1];
      stats.jumps(state, next) += 1;
      state = next;
    }
  }
  double accounted = stats.holding.sum();
  stats.holding(state) += delta - accounted;
  return stats;
}

double path_log_likelihood(const GeneratorMatrix& q, const PathStats& stats) {
  if (stats.dim() != q.dim()) throw Error(ErrorKind::DimensionMismatch, "path stats and generator differ in K");
  double ll = 0.0;
  for (int l = 0; l < q.dim(); ++l) {
    for (int m = 0; m < q.dim(); ++m) {
      if (l == m) continue;
      const double rate = q.rate(l, m);
      const int n = stats.jumps(l, m);
      if (n > 0) {
        if (rate <= 0.0) throw Error(ErrorKind::ZeroRateWithJump, fmt::format("channel ({}, {})", l + 1, m + 1));
        ll += n * std::log(rate);
      }
      ll -= rate * stats.holding(l);
    }
  }
  return ll;
}

}  // namespace ctclust
