#include "ctclust/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "ctclust/error.hpp"
#include "ctclust/parallel.hpp"

namespace ctclust {

namespace {

// Dense relabeling of arbitrary labels to 0..n-1 in order of first appearance.
std::vector<int> compress(std::span<const int> labels, int& count) {
  std::map<int, int> index;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(index.try_emplace(l, static_cast<int>(index.size())).first->second);
  count = static_cast<int>(index.size());
  return out;
}

// Minimum-cost assignment on a square matrix (Kuhn-Munkres, potentials form).
std::vector<int> hungarian(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Square agreement matrix padded with empty rows/columns.
Matrix agreement(const std::vector<int>& est, int ne, const std::vector<int>& tru, int nt) {
  const int n = std::max(ne, nt);
  Matrix a = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < est.size(); ++i) a(est[i], tru[i]) += 1.0;
  return a;
}

// Row permutation maximizing the trace of `a`.
std::vector<int> best_assignment(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  if (n <= 8) {
    std::vector<int> perm(n), best;
    std::iota(perm.begin(), perm.end(), 0);
    double top = -1.0;
    do {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += a(i, perm[i]);
      if (s > top) {
        top = s;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  return hungarian(-a);
}

// Permutation of states ordering a cluster's level-0 cells ascending.
std::vector<int> state_order(const Matrix& theta) {
  std::vector<int> order(theta.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return theta(a, 0) < theta(b, 0); });
  return order;
}

struct Draw {
  Vector pi;
  Matrix q;
  Matrix theta;
};

Draw sorted_draw(const ClusterParams& c) {
  const auto order = state_order(c.theta);
  const int k = static_cast<int>(order.size());
  Draw d{Vector(k), Matrix(k, k), Matrix(k, c.theta.cols())};
  for (int a = 0; a < k; ++a) {
    d.pi(a) = c.pi[order[a]];
    d.theta.row(a) = c.theta.row(order[a]);
    for (int b = 0; b < k; ++b) d.q(a, b) = c.q.rate(order[a], order[b]);
  }
  return d;
}

}  // namespace

ModalCount modal_cluster_count(std::span<const int> counts) {
  if (counts.empty()) throw Error(ErrorKind::EmptyTrace, "cluster-count trace is empty");
  std::map<int, int> freq;
  for (int c : counts) ++freq[c];
  ModalCount best;
  int top = 0;
  for (const auto& [count, n] : freq) {
    if (n > top) {
      top = n;
      best.count = count;
    }
  }
  best.fraction = static_cast<double>(top) / static_cast<double>(counts.size());
  return best;
}

std::vector<int> best_label_map(std::span<const int> estimate, std::span<const int> truth) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("label vectors differ in length ({} vs {})", estimate.size(), truth.size()));
  }
  int ne = 0, nt = 0;
  const auto est = compress(estimate, ne);
  const auto tru = compress(truth, nt);
  const auto assign = best_assignment(agreement(est, ne, tru, nt));
  // back to the caller's label values
  std::map<int, int> est_value, tru_value;
  for (std::size_t i = 0; i < est.size(); ++i) {
    est_value[est[i]] = estimate[i];
    tru_value[tru[i]] = truth[i];
  }
  int max_label = 0;
  for (int l : estimate) max_label = std::max(max_label, l);
  std::vector<int> map(max_label + 1, -1);
  for (int i = 0; i < ne; ++i) {
    const int j = assign[i];
    map[est_value[i]] = j < nt ? tru_value[j] : -1;
  }
  return map;
}

double align_and_misclassify(std::span<const int> estimate, std::span<const int> truth) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("label vectors differ in length ({} vs {})", estimate.size(), truth.size()));
  }
  if (estimate.empty()) return 0.0;
  int ne = 0, nt = 0;
  const auto est = compress(estimate, ne);
  const auto tru = compress(truth, nt);
  const Matrix a = agreement(est, ne, tru, nt);
  const auto assign = best_assignment(a);
  double matched = 0.0;
  for (int i = 0; i < static_cast<int>(assign.size()); ++i) matched += a(i, assign[i]);
  return 1.0 - matched / static_cast<double>(estimate.size());
}

double effective_sample_size(std::span<const double> series) {
  const auto n = static_cast<Eigen::Index>(series.size());
  if (n < 10) throw Error(ErrorKind::InvalidArgument, "effective sample size needs at least 10 values");
  const Eigen::Map<const Vector> x(series.data(), n);
  const Vector c = x.array() - x.mean();
  const double gamma0 = c.squaredNorm() / static_cast<double>(n);
  if (!(gamma0 > 0.0) || gamma0 < 1e-300) throw Error(ErrorKind::ConstantSeries, "series has zero variance");
  auto rho = [&](Eigen::Index k) {
    return c.head(n - k).dot(c.tail(n - k)) / static_cast<double>(n) / gamma0;
  };
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = (m == 0 ? 1.0 : rho(2 * m)) + rho(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    tau += 2.0 * pair;
  }
  const double dn = static_cast<double>(n);
  if (!(tau > 0.0)) return dn;
  return std::min(dn, dn / tau);
}

TransitionCurves transition_probability_curves(std::span<const GeneratorMatrix> samples, double horizon,
                                               int grid_points) {
  if (samples.empty()) throw Error(ErrorKind::EmptySamples, "no generator samples");
  if (grid_points < 1) throw Error(ErrorKind::InvalidArgument, "grid_points must be at least 1");
  if (!(horizon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be non-negative");
  TransitionCurves out;
  for (int g = 0; g < grid_points; ++g) {
    out.times.push_back(grid_points == 1 ? 0.0 : horizon * g / (grid_points - 1));
  }
  const int k = samples.front().dim();
  std::vector<std::vector<Matrix>> per_sample(samples.size());
  parallel_for(static_cast<int>(samples.size()), [&](int s) {
    for (double t : out.times) per_sample[s].push_back(transition_matrix(samples[s], t).probs());
  });
  for (int g = 0; g < grid_points; ++g) {
    Matrix acc = Matrix::Zero(k, k);
    for (const auto& ps : per_sample) acc += ps[g];
    out.probs.push_back(acc / static_cast<double>(samples.size()));
  }
  return out;
}

NormErrors param_norm_error(const ClusterParams& truth, const ClusterParams& estimate, Family family) {
  if (truth.pi.dim() != estimate.pi.dim() || truth.q.dim() != estimate.q.dim() ||
      truth.theta.rows() != estimate.theta.rows() || truth.theta.cols() != estimate.theta.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "parameter blocks have different dimensions");
  }
  NormErrors e;
  e.pi = (truth.pi.probs() - estimate.pi.probs()).norm();
  e.coefficients =
      (coefficients_from_cells(truth.theta, family) - coefficients_from_cells(estimate.theta, family)).norm();
  e.q = (truth.q.rates() - estimate.q.rates()).norm();
  return e;
}

std::vector<std::vector<int>> align_to_reference(std::span<const PosteriorSample> samples, int count) {
  std::vector<std::vector<int>> maps(samples.size());
  int ref = -1;
  for (int s = static_cast<int>(samples.size()) - 1; s >= 0; --s) {
    if (samples[s].num_clusters == count) {
      ref = s;
      break;
    }
  }
  if (ref < 0) return maps;
  const auto& reference = samples[ref].labels;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].num_clusters != count) continue;
    Matrix overlap = Matrix::Zero(count, count);
    for (std::size_t i = 0; i < reference.size(); ++i) overlap(samples[s].labels[i], reference[i]) += 1.0;
    std::vector<int> map(count, -1);
    std::vector<char> row_used(count, 0), col_used(count, 0);
    for (int step = 0; step < count; ++step) {
      int bi = -1, bj = -1;
      double top = -1.0;
      for (int i = 0; i < count; ++i) {
        if (row_used[i]) continue;
        for (int j = 0; j < count; ++j) {
          if (!col_used[j] && overlap(i, j) > top) {
            top = overlap(i, j);
            bi = i;
            bj = j;
          }
        }
      }
      map[bi] = bj;
      row_used[bi] = col_used[bj] = 1;
    }
    maps[s] = std::move(map);
  }
  return maps;
}

std::vector<int> modal_assignments(std::span<const PosteriorSample> samples, int count) {
  if (samples.empty()) throw Error(ErrorKind::EmptySamples, "no posterior samples");
  const auto maps = align_to_reference(samples, count);
  const std::size_t n = samples.front().labels.size();
  std::vector<std::vector<int>> tally(n, std::vector<int>(std::max(count, 1), 0));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (maps[s].empty()) continue;
    for (std::size_t i = 0; i < n; ++i) ++tally[i][maps[s][samples[s].labels[i]]];
  }
  std::vector<int> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<int>(std::max_element(tally[i].begin(), tally[i].end()) - tally[i].begin());
  }
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::EmptySamples, "quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

FitSummary summarize_samples(std::span<const PosteriorSample> samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptySamples, "no posterior samples");
  FitSummary out;
  for (const auto& s : samples) out.counts.push_back(s.num_clusters);
  out.modal = modal_cluster_count(out.counts);
  const int m = out.modal.count;
  const auto maps = align_to_reference(samples, m);
  out.assignments = modal_assignments(samples, m);

  std::vector<std::vector<Draw>> draws(m);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (maps[s].empty()) continue;
    for (int j = 0; j < m; ++j) draws[maps[s][j]].push_back(sorted_draw(samples[s].clusters[j]));
  }
  for (int c = 0; c < m; ++c) {
    const auto& d = draws[c];
    ClusterSummary cs;
    cs.label = c;
    cs.draws = static_cast<int>(d.size());
    const Eigen::Index k = d.front().pi.size();
    const Eigen::Index levels = d.front().theta.cols();
    auto summarize = [&](auto get, Eigen::Index rows, Eigen::Index cols, Matrix& mean, Matrix& lo, Matrix& hi) {
      mean.resize(rows, cols);
      lo.resize(rows, cols);
      hi.resize(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          std::vector<double> v;
          for (const auto& x : d) v.push_back(get(x, i, j));
          mean(i, j) = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
          lo(i, j) = quantile(v, 0.025);
          hi(i, j) = quantile(v, 0.975);
        }
      }
    };
    Matrix pm, pl, ph;
    summarize([](const Draw& x, Eigen::Index i, Eigen::Index) { return x.pi(i); }, k, 1, pm, pl, ph);
    cs.pi_mean = pm.col(0);
    cs.pi_lo = pl.col(0);
    cs.pi_hi = ph.col(0);
    summarize([](const Draw& x, Eigen::Index i, Eigen::Index j) { return x.q(i, j); }, k, k, cs.q_mean, cs.q_lo,
              cs.q_hi);
    summarize([](const Draw& x, Eigen::Index i, Eigen::Index j) { return x.theta(i, j); }, k, levels, cs.theta_mean,
              cs.theta_lo, cs.theta_hi);
    Vector ess = Vector::Constant(k * k, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        if (a == b || d.size() < 10) continue;
        std::vector<double> series;
        for (const auto& x : d) series.push_back(x.q(a, b));
        try {
          ess(a * k + b) = effective_sample_size(series);
        } catch (const Error&) {
        }
      }
    }
    if (k >= 2) {
      for (const auto& x : d) cs.q_draws.push_back(validate_generator(x.q));
    }
    out.q_ess.push_back(std::move(ess));
    out.clusters.push_back(std::move(cs));
  }
  return out;
}

std::vector<std::vector<std::complex<double>>> eigenvalue_table(const ClusterSummary& cluster) {
  std::vector<std::vector<std::complex<double>>> out;
  for (const auto& q : cluster.q_draws) out.push_back(generator_eigenvalues(q));
  return out;
}

}  // namespace ctclust
