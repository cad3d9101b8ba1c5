#include "ctclust/hmm.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ctclust/error.hpp"

namespace ctclust {

SmoothingResult forward_backward(const SubjectRecord& subject, const InitialDistribution& pi, const GeneratorMatrix& q,
                                 const OutcomeModel& outcome, TransitionCache* cache) {
  const int steps = subject.num_observations();
  const int k = q.dim();
  if (steps == 0) throw Error(ErrorKind::InvalidArgument, fmt::format("subject {} has no observations", subject.id));
  if (pi.dim() != k || outcome.num_states() != k) {
    throw Error(ErrorKind::DimensionMismatch, "initial distribution, generator and outcome model differ in K");
  }
  Matrix logf(steps, k);
  for (int t = 0; t < steps; ++t) {
    for (int s = 0; s < k; ++s) logf(t, s) = outcome.log_density(subject.outcomes[t], s, subject.level(t));
  }
  std::vector<Matrix> transitions;
  transitions.reserve(steps > 0 ? steps - 1 : 0);
  for (int t = 0; t + 1 < steps; ++t) {
    const double delta = subject.interval(t);
    if (!(delta > 0.0)) {
      throw Error(ErrorKind::NonMonotoneTimes, fmt::format("subject {}: interval {} is {}", subject.id, t + 1, delta));
    }
    transitions.push_back(cache != nullptr ? cache->get(delta) : transition_matrix(q, delta).probs());
  }
  return forward_backward(logf, pi, transitions);
}

SmoothingResult forward_backward(const Matrix& logf, const InitialDistribution& pi,
                                 const std::vector<Matrix>& transitions) {
  const int steps = static_cast<int>(logf.rows());
  const int k = static_cast<int>(logf.cols());
  if (static_cast<int>(transitions.size()) + 1 != steps) {
    throw Error(ErrorKind::MisalignedInputs, "need one transition matrix per interval");
  }

  // Densities rescaled per step by their maximum; the shift is added back
  // into the log normaliser.
  Matrix dens(steps, k);
  Vector shift(steps);
  for (int t = 0; t < steps; ++t) {
    const double m = logf.row(t).maxCoeff();
    if (!std::isfinite(m)) {
      throw Error(ErrorKind::ZeroLikelihood, fmt::format("observation {} has zero density in every state", t + 1));
    }
    shift(t) = m;
    dens.row(t) = (logf.row(t).array() - m).exp();
  }

  SmoothingResult out;
  out.log_scalers.resize(steps);
  Matrix alpha(steps, k);
  Vector c(steps);
  for (int t = 0; t < steps; ++t) {
    Eigen::RowVectorXd pred = t == 0 ? Eigen::RowVectorXd(pi.probs().transpose())
                                     : Eigen::RowVectorXd(alpha.row(t - 1) * transitions[t - 1]);
    alpha.row(t) = pred.array() * dens.row(t).array();
    c(t) = alpha.row(t).sum();
    if (!(c(t) > 0.0)) {
      throw Error(ErrorKind::ZeroLikelihood, fmt::format("observation {} is impossible under the model", t + 1));
    }
    alpha.row(t) /= c(t);
    out.log_scalers(t) = std::log(c(t)) + shift(t);
  }
  out.loglik = out.log_scalers.sum();

  Matrix beta(steps, k);
  beta.row(steps - 1).setOnes();
  for (int t = steps - 2; t >= 0; --t) {
    Eigen::VectorXd next = (dens.row(t + 1).array() * beta.row(t + 1).array()).transpose();
    beta.row(t) = (transitions[t] * next).transpose() / c(t + 1);
  }

  out.state_marginals.resize(steps, k);
  out.pair_marginals.resize(steps > 0 ? steps - 1 : 0);
  for (int t = 0; t + 1 < steps; ++t) {
    Matrix b(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) b(i, j) = alpha(t, i) * transitions[t](i, j) * dens(t + 1, j) * beta(t + 1, j);
    }
    b /= b.sum();
    out.state_marginals.row(t) = b.rowwise().sum().transpose();
    out.pair_marginals[t] = std::move(b);
  }
  out.state_marginals.row(steps - 1) = alpha.row(steps - 1);
  return out;
}

namespace {

int draw_categorical(const double* probs, int n, Rng& rng) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += probs[i];
  double u = uniform01(rng) * total;
  int last = 0;
  for (int i = 0; i < n; ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return last;
}

}  // namespace

std::vector<int> sample_latent_states(const SmoothingResult& sm, Rng& rng) {
  const int k = sm.num_states();
  std::vector<int> states(sm.num_steps());
  Eigen::RowVectorXd row(k);
  for (int t = 0; t < sm.num_steps(); ++t) {
    row = sm.state_marginals.row(t);
    states[t] = draw_categorical(row.data(), k, rng);
  }
  return states;
}

std::pair<int, int> sample_state_pairs(const SmoothingResult& sm, int t, Rng& rng) {
  if (t < 0 || t >= static_cast<int>(sm.pair_marginals.size())) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("interval index {} out of range", t));
  }
  const Matrix& b = sm.pair_marginals[t];
  const int k = static_cast<int>(b.rows());
  // Column-major storage: flat index = i + k * j.
  const int flat = draw_categorical(b.data(), k * k, rng);
  return {flat % k, flat / k};
}

}  // namespace ctclust
