#include "ctclust/outcome.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "ctclust/error.hpp"

namespace ctclust {

std::string_view to_string(Family family) {
  return family == Family::Poisson ? "poisson" : "gaussian";
}

Family parse_family(std::string_view name) {
  if (name == "poisson") return Family::Poisson;
  if (name == "gaussian" || name == "normal") return Family::Gaussian;
  throw Error(ErrorKind::ConfigParse, fmt::format("unknown outcome family '{}'", name));
}

PriorSpec PriorSpec::defaults(int num_states, int num_levels) {
  PriorSpec p;
  p.theta_shape = Matrix::Ones(num_states, num_levels);
  p.theta_rate = Matrix::Ones(num_states, num_levels);
  p.theta_mean = Matrix::Zero(num_states, num_levels);
  p.theta_sd = Matrix::Constant(num_states, num_levels, 10.0);
  p.pi_alpha = Vector::Ones(num_states);
  p.q_shape = Matrix::Ones(num_states, num_states);
  p.q_rate = Vector::Ones(num_states);
  p.dp_alpha = 1.0;
  return p;
}

void PriorSpec::validate(int k, int levels) const {
  auto require_shape = [](const Matrix& m, int r, int c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw Error(ErrorKind::DimensionMismatch, fmt::format("prior {} is {}x{}, expected {}x{}", name, m.rows(), m.cols(), r, c));
    }
  };
  require_shape(theta_shape, k, levels, "theta_shape");
  require_shape(theta_rate, k, levels, "theta_rate");
  require_shape(theta_mean, k, levels, "theta_mean");
  require_shape(theta_sd, k, levels, "theta_sd");
  require_shape(q_shape, k, k, "q_shape");
  if (pi_alpha.size() != k || q_rate.size() != k) {
    throw Error(ErrorKind::DimensionMismatch, "prior pi_alpha / q_rate length differs from K");
  }
  auto positive = [](const auto& m, const char* name) {
    if (!((m.array() > 0.0).all() && m.allFinite())) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("prior {} must be strictly positive", name));
    }
  };
  positive(theta_shape, "theta_shape");
  positive(theta_rate, "theta_rate");
  positive(theta_sd, "theta_sd");
  positive(pi_alpha, "pi_alpha");
  positive(q_rate, "q_rate");
  for (int l = 0; l < k; ++l) {
    for (int m = 0; m < k; ++m) {
      if (l != m && !(q_shape(l, m) > 0.0)) throw Error(ErrorKind::InvalidArgument, "prior q_shape must be positive");
    }
  }
  if (!(dp_alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "DP concentration must be positive");
}

void ModelSpec::validate() const {
  if (num_states < 1) throw Error(ErrorKind::InvalidArgument, "need at least one latent state");
  if (num_levels < 1) throw Error(ErrorKind::InvalidArgument, "need at least one covariate level");
  if (family == Family::Gaussian && !(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  prior.validate(num_states, num_levels);
}

OutcomeModel::OutcomeModel(Family family, Matrix cells, double sigma)
    : family_(family), cells_(std::move(cells)), sigma_(sigma) {
  if (family_ == Family::Poisson && !(cells_.array() > 0.0).all()) {
    throw Error(ErrorKind::InvalidArgument, "Poisson rates must be strictly positive");
  }
  if (family_ == Family::Gaussian && !(sigma_ > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "Gaussian sigma must be positive");
  }
}

double OutcomeModel::log_density(double o, int state, int level) const {
  const double cell = cells_(state, level);
  if (family_ == Family::Poisson) {
    if (o < 0.0) throw Error(ErrorKind::NegativeCount, fmt::format("Poisson outcome {}", o));
    return o * std::log(cell) - cell - std::lgamma(o + 1.0);
  }
  const double z = (o - cell) / sigma_;
  return -0.5 * z * z - std::log(sigma_) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double outcome_log_density(const OutcomeModel& model, double o, int state, int level) {
  return model.log_density(o, state, level);
}

OutcomeSuffStats OutcomeSuffStats::zero(int k, int levels) {
  OutcomeSuffStats s;
  s.count = Matrix::Zero(k, levels);
  s.sum = Matrix::Zero(k, levels);
  s.sumsq = Matrix::Zero(k, levels);
  s.first_visit = Vector::Zero(k);
  s.jumps = Matrix::Zero(k, k);
  s.holding = Vector::Zero(k);
  return s;
}

OutcomeSuffStats& OutcomeSuffStats::operator+=(const OutcomeSuffStats& o) {
  count += o.count;
  sum += o.sum;
  sumsq += o.sumsq;
  log_factorial += o.log_factorial;
  first_visit += o.first_visit;
  jumps += o.jumps;
  holding += o.holding;
  return *this;
}

OutcomeSuffStats& OutcomeSuffStats::operator-=(const OutcomeSuffStats& o) {
  count -= o.count;
  sum -= o.sum;
  sumsq -= o.sumsq;
  log_factorial -= o.log_factorial;
  first_visit -= o.first_visit;
  jumps -= o.jumps;
  holding -= o.holding;
  return *this;
}

OutcomeSuffStats subject_suffstats(const SubjectRecord& subject, std::span<const int> states, const PathStats& path,
                                   int k, int levels) {
  if (static_cast<int>(states.size()) != subject.num_observations()) {
    throw Error(ErrorKind::MisalignedInputs,
                fmt::format("subject {}: {} states for {} observations", subject.id, states.size(), subject.num_observations()));
  }
  if (path.dim() != k) throw Error(ErrorKind::MisalignedInputs, "path statistics have the wrong dimension");
  OutcomeSuffStats s = OutcomeSuffStats::zero(k, levels);
  for (int t = 0; t < subject.num_observations(); ++t) {
    const int x = states[t];
    const int z = subject.level(t);
    if (x < 0 || x >= k || z >= levels) throw Error(ErrorKind::MisalignedInputs, "state or level out of range");
    const double o = subject.outcomes[t];
    s.count(x, z) += 1.0;
    s.sum(x, z) += o;
    s.sumsq(x, z) += o * o;
    if (o >= 0.0) s.log_factorial += std::lgamma(o + 1.0);
  }
  if (!states.empty()) s.first_visit(states[0]) = 1.0;
  s.jumps = path.jumps.cast<double>();
  s.holding = path.holding;
  return s;
}

OutcomeSuffStats accumulate_suffstats(std::span<const SubjectRecord> subjects,
                                      std::span<const std::vector<int>> states, std::span<const PathStats> paths, int k,
                                      int levels) {
  if (subjects.size() != states.size() || subjects.size() != paths.size()) {
    throw Error(ErrorKind::MisalignedInputs, "subjects, states and paths differ in length");
  }
  OutcomeSuffStats total = OutcomeSuffStats::zero(k, levels);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    total += subject_suffstats(subjects[i], states[i], paths[i], k, levels);
  }
  return total;
}

namespace {

/// log of Gamma(a + n) b^a / (Gamma(a) (b + r)^(a + n)).
double gamma_ratio(double a, double b, double n, double r) {
  if (n == 0.0 && r == 0.0) return 0.0;
  return std::lgamma(a + n) - std::lgamma(a) + a * std::log(b) - (a + n) * std::log(b + r);
}

double gaussian_cell(double prior_mean, double prior_sd, double sigma, double others_n, double others_sum,
                     double n, double sy, double syy) {
  if (n == 0.0) return 0.0;
  const double s2 = sigma * sigma;
  const double precision = 1.0 / (prior_sd * prior_sd) + others_n / s2;
  const double mean = (prior_mean / (prior_sd * prior_sd) + others_sum / s2) / precision;
  const double v = 1.0 / precision;
  const double resid_sum = sy - n * mean;
  const double resid_sq = syy - 2.0 * mean * sy + n * mean * mean;
  const double quad = (resid_sq - v * resid_sum * resid_sum / (s2 + n * v)) / s2;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - 0.5 * std::log1p(n * v / s2) - 0.5 * quad;
}

}  // namespace

double marginal_loglik_theta(const OutcomeSuffStats& others, const OutcomeSuffStats& subject, const ModelSpec& model) {
  const auto& p = model.prior;
  double ll = 0.0;
  for (Eigen::Index k = 0; k < subject.count.rows(); ++k) {
    for (Eigen::Index z = 0; z < subject.count.cols(); ++z) {
      if (model.family == Family::Poisson) {
        ll += gamma_ratio(p.theta_shape(k, z) + others.sum(k, z), p.theta_rate(k, z) + others.count(k, z),
                          subject.sum(k, z), subject.count(k, z));
      } else {
        ll += gaussian_cell(p.theta_mean(k, z), p.theta_sd(k, z), model.sigma, others.count(k, z), others.sum(k, z),
                            subject.count(k, z), subject.sum(k, z), subject.sumsq(k, z));
      }
    }
  }
  if (model.family == Family::Poisson) ll -= subject.log_factorial;
  return ll;
}

double marginal_loglik_pi(const OutcomeSuffStats& others, const OutcomeSuffStats& subject, const ModelSpec& model) {
  const Vector alpha = model.prior.pi_alpha + others.first_visit;
  const double n = subject.first_visit.sum();
  if (n == 0.0) return 0.0;
  double ll = std::lgamma(alpha.sum()) - std::lgamma(alpha.sum() + n);
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    if (subject.first_visit(k) != 0.0) ll += std::lgamma(alpha(k) + subject.first_visit(k)) - std::lgamma(alpha(k));
  }
  return ll;
}

double marginal_loglik_q(const OutcomeSuffStats& others, const OutcomeSuffStats& subject, const ModelSpec& model) {
  const auto& p = model.prior;
  double ll = 0.0;
  const auto k = subject.holding.size();
  for (Eigen::Index l = 0; l < k; ++l) {
    for (Eigen::Index m = 0; m < k; ++m) {
      if (l == m) continue;
      ll += gamma_ratio(p.q_shape(l, m) + others.jumps(l, m), p.q_rate(l) + others.holding(l), subject.jumps(l, m),
                        subject.holding(l));
    }
  }
  return ll;
}

double subject_marginal_loglik(const OutcomeSuffStats& others, const OutcomeSuffStats& subject,
                               const ModelSpec& model) {
  return marginal_loglik_theta(others, subject, model) + marginal_loglik_pi(others, subject, model) +
         marginal_loglik_q(others, subject, model);
}

namespace {

double draw_gamma(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

}  // namespace

GeneratorMatrix sample_generator(const OutcomeSuffStats& stats, const PriorSpec& prior, Rng& rng) {
  const auto k = stats.holding.size();
  Matrix q = Matrix::Zero(k, k);
  for (Eigen::Index l = 0; l < k; ++l) {
    const double rate = prior.q_rate(l) + stats.holding(l);
    for (Eigen::Index m = 0; m < k; ++m) {
      if (l != m) q(l, m) = draw_gamma(prior.q_shape(l, m) + stats.jumps(l, m), rate, rng);
    }
  }
  if (k < 2) return GeneratorMatrix::single_state();
  return validate_generator(q);
}

InitialDistribution sample_initial_distribution(const OutcomeSuffStats& stats, const PriorSpec& prior, Rng& rng) {
  const auto k = prior.pi_alpha.size();
  Vector g(k);
  for (Eigen::Index i = 0; i < k; ++i) g(i) = draw_gamma(prior.pi_alpha(i) + stats.first_visit(i), 1.0, rng);
  double total = g.sum();
  if (!(total > 0.0)) {
    // All gamma draws underflowed (tiny shapes); fall back to the mean.
    g = prior.pi_alpha + stats.first_visit;
    total = g.sum();
  }
  return InitialDistribution::from_probs(g / total);
}

Matrix sample_theta(const OutcomeSuffStats& stats, const ModelSpec& model, Rng& rng) {
  const auto& p = model.prior;
  Matrix theta(stats.count.rows(), stats.count.cols());
  for (Eigen::Index k = 0; k < theta.rows(); ++k) {
    for (Eigen::Index z = 0; z < theta.cols(); ++z) {
      if (model.family == Family::Poisson) {
        double draw = draw_gamma(p.theta_shape(k, z) + stats.sum(k, z), p.theta_rate(k, z) + stats.count(k, z), rng);
        theta(k, z) = std::max(draw, 1e-300);
      } else {
        const double s2 = model.sigma * model.sigma;
        const double prior_prec = 1.0 / (p.theta_sd(k, z) * p.theta_sd(k, z));
        const double precision = prior_prec + stats.count(k, z) / s2;
        const double mean = (p.theta_mean(k, z) * prior_prec + stats.sum(k, z) / s2) / precision;
        theta(k, z) = std::normal_distribution<double>(mean, 1.0 / std::sqrt(precision))(rng);
      }
    }
  }
  return theta;
}

ClusterParams sample_cluster_params(const OutcomeSuffStats& stats, const ModelSpec& model, Rng& rng) {
  ClusterParams c;
  c.q = sample_generator(stats, model.prior, rng);
  c.pi = sample_initial_distribution(stats, model.prior, rng);
  c.theta = sample_theta(stats, model, rng);
  return c;
}

Matrix coefficients_from_cells(const Matrix& cells, Family family) {
  const Matrix base = family == Family::Poisson ? Matrix(cells.array().log()) : cells;
  // cells are (state, level); coefficients are (level row, state column).
  Matrix b(base.cols(), base.rows());
  for (Eigen::Index k = 0; k < base.rows(); ++k) {
    b(0, k) = base(k, 0);
    for (Eigen::Index z = 1; z < base.cols(); ++z) b(z, k) = base(k, z) - base(k, 0);
  }
  return b;
}

Matrix cells_from_coefficients(const Matrix& b, Family family) {
  Matrix cells(b.cols(), b.rows());
  for (Eigen::Index k = 0; k < b.cols(); ++k) {
    for (Eigen::Index z = 0; z < b.rows(); ++z) {
      const double eta = b(0, k) + (z > 0 ? b(z, k) : 0.0);
      cells(k, z) = family == Family::Poisson ? std::exp(eta) : eta;
    }
  }
  return cells;
}

}  // namespace ctclust
