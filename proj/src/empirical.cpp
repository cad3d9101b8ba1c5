#include "ctclust/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "ctclust/error.hpp"

namespace ctclust {
namespace {

std::vector<double> fit_mixture(std::vector<double> x, const ModelSpec& model, int max_iterations) {
  const int K = model.num_states;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  const bool poisson = model.family == Family::Poisson;
  std::vector<double> centre(K), weight(K, 1.0 / K);
  for (int k = 0; k < K; ++k) {
    centre[k] = x[static_cast<std::size_t>(std::min((k + 0.5) / K * n, n - 1))];
    if (poisson) centre[k] = std::max(centre[k], 0.1);
  }
  const double inv_var = 1.0 / (model.sigma * model.sigma);
  std::vector<double> resp(K);
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> mass(K, 0.0), total(K, 0.0);
    for (double o : x) {
      double top = -INFINITY;
      for (int k = 0; k < K; ++k) {
        const double ll = poisson ? o * std::log(centre[k]) - centre[k] : -0.5 * inv_var * (o - centre[k]) * (o - centre[k]);
        resp[k] = std::log(weight[k]) + ll;
        top = std::max(top, resp[k]);
      }
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += (resp[k] = std::exp(resp[k] - top));
      for (int k = 0; k < K; ++k) {
        mass[k] += resp[k] / z;
        total[k] += o * resp[k] / z;
      }
    }
    double shift = 0.0;
    for (int k = 0; k < K; ++k) {
      weight[k] = std::max(mass[k] / n, 1e-12);
      const double next = mass[k] > 1e-9 ? total[k] / mass[k] : centre[k];
      const double bounded = poisson ? std::max(next, 1e-3) : next;
      shift = std::max(shift, std::abs(bounded - centre[k]));
      centre[k] = bounded;
    }
    if (shift < 1e-10) break;
  }
  std::sort(centre.begin(), centre.end());
  return centre;
}

}  // namespace

Matrix mixture_centers(const Dataset& data, const ModelSpec& model, int max_iterations) {
  const int K = model.num_states;
  const int L = model.num_levels;
  std::vector<double> all;
  std::vector<std::vector<double>> by_level(L);
  for (const auto& s : data.subjects) {
    for (int t = 0; t < s.num_observations(); ++t) {
      all.push_back(s.outcomes[t]);
      if (s.level(t) < L) by_level[s.level(t)].push_back(s.outcomes[t]);
    }
  }
  if (all.size() < static_cast<std::size_t>(K))
    throw Error(ErrorKind::EmptyDataset, fmt::format("need at least {} outcomes for a {}-state mixture", K, K));
  const auto pooled = fit_mixture(all, model, max_iterations);
  Matrix centers(K, L);
  for (int l = 0; l < L; ++l) {
    const auto c = by_level[l].size() >= static_cast<std::size_t>(K) ? fit_mixture(by_level[l], model, max_iterations)
                                                                     : pooled;
    for (int k = 0; k < K; ++k) centers(k, l) = c[k];
  }
  return centers;
}

void anchor_theta_prior(ModelSpec& model, const Matrix& centers, double strength) {
  if (!(strength > 0.0)) throw Error(ErrorKind::InvalidArgument, "anchor strength must be positive");
  if (centers.rows() != model.num_states || centers.cols() != model.num_levels)
    throw Error(ErrorKind::DimensionMismatch, "anchor centres must be num_states x num_levels");
  auto& p = model.prior;
  if (model.family == Family::Poisson) {
    if ((centers.array() <= 0.0).any()) throw Error(ErrorKind::InvalidArgument, "Poisson anchor centres must be positive");
    p.theta_shape = Matrix::Constant(centers.rows(), centers.cols(), strength);
    p.theta_rate = strength * centers.cwiseInverse();
  } else {
    p.theta_mean = centers;
    p.theta_sd = Matrix::Constant(centers.rows(), centers.cols(), model.sigma / std::sqrt(strength));
  }
}

void apply_theta_anchor(SamplerConfig& config, const Dataset& data) {
  if (config.theta_anchor > 0.0) anchor_theta_prior(config.model, mixture_centers(data, config.model), config.theta_anchor);
}

}  // namespace ctclust
