#include "ctclust/ctmc.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctclust/error.hpp"

namespace ctclust {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::NegativeRate: return "NegativeRate";
    case ErrorKind::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::ImpossibleEndpoint: return "ImpossibleEndpoint";
    case ErrorKind::SamplerExhausted: return "SamplerExhausted";
    case ErrorKind::ZeroRateWithJump: return "ZeroRateWithJump";
    case ErrorKind::ZeroLikelihood: return "ZeroLikelihood";
    case ErrorKind::NonMonotoneTimes: return "NonMonotoneTimes";
    case ErrorKind::NegativeCount: return "NegativeCount";
    case ErrorKind::MisalignedInputs: return "MisalignedInputs";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
    case ErrorKind::EmptyTrace: return "EmptyTrace";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ConstantSeries: return "ConstantSeries";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::DataParse: return "DataParse";
    case ErrorKind::IOFailure: return "IOFailure";
    case ErrorKind::EmptySamples: return "EmptySamples";
    case ErrorKind::CheckpointIOFailure: return "CheckpointIOFailure";
  }
  return "Unknown";
}

double GeneratorMatrix::max_exit_rate() const {
  double m = 0.0;
  for (int l = 0; l < dim(); ++l) m = std::max(m, exit_rate(l));
  return m;
}

GeneratorMatrix validate_generator(const Matrix& raw) {
  if (raw.rows() != raw.cols()) {
    throw Error(ErrorKind::NonSquare, fmt::format("{}x{} rate matrix", raw.rows(), raw.cols()));
  }
  if (raw.rows() < 2) {
    throw Error(ErrorKind::DimensionTooSmall, fmt::format("K = {} (need K >= 2)", raw.rows()));
  }
  const auto k = raw.rows();
  Matrix q = raw;
  for (Eigen::Index l = 0; l < k; ++l) {
    double row = 0.0;
    for (Eigen::Index m = 0; m < k; ++m) {
      if (l == m) continue;
      const double r = raw(l, m);
      if (!std::isfinite(r)) {
        throw Error(ErrorKind::NonFiniteInput, fmt::format("rate ({}, {}) is not finite", l + 1, m + 1));
      }
      if (r < 0.0) {
        throw Error(ErrorKind::NegativeRate, fmt::format("q({}, {}) = {}", l + 1, m + 1, r));
      }
      row += r;
    }
    q(l, l) = -row;
  }
  return GeneratorMatrix(std::move(q));
}

InitialDistribution InitialDistribution::from_probs(const Vector& probs) {
  if (probs.size() < 1) throw Error(ErrorKind::InvalidArgument, "empty initial distribution");
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (!std::isfinite(probs(k)) || probs(k) < 0.0) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("initial probability {} = {}", k + 1, probs(k)));
    }
  }
  const double s = probs.sum();
  if (std::abs(s - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("initial distribution sums to {}", s));
  }
  return InitialDistribution(probs / s);
}

InitialDistribution InitialDistribution::uniform(int dim) {
  return InitialDistribution(Vector::Constant(dim, 1.0 / dim));
}

StochasticMatrix transition_matrix(const GeneratorMatrix& q, double delta) {
  if (!std::isfinite(delta)) throw Error(ErrorKind::NonFiniteInput, "interval length is not finite");
  if (delta < 0.0) throw Error(ErrorKind::InvalidArgument, fmt::format("negative interval {}", delta));
  if (!q.rates().allFinite()) throw Error(ErrorKind::NonFiniteInput, "generator has non-finite entries");

  const int k = q.dim();
  if (delta == 0.0) return StochasticMatrix(Matrix::Identity(k, k));

  Matrix p = (q.rates() * delta).exp();
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) p(i, j) = std::clamp(p(i, j), 0.0, 1.0);
    p.row(i) /= p.row(i).sum();
  }
  return StochasticMatrix(std::move(p));
}

std::vector<std::complex<double>> generator_eigenvalues(const GeneratorMatrix& q) {
  Eigen::EigenSolver<Matrix> solver(q.rates(), /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::EigenFailure, "eigenvalue iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();
  std::vector<std::complex<double>> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return out;
}

Vector stationary_distribution(const GeneratorMatrix& q) {
  const int k = q.dim();
  // Stack Q^T with a row of ones: [Q^T; 1^T] pi = [0; 1].
  Matrix a(k + 1, k);
  a.topRows(k) = q.rates().transpose();
  a.row(k).setOnes();
  Vector rhs = Vector::Zero(k + 1);
  rhs(k) = 1.0;
  Vector pi = a.colPivHouseholderQr().solve(rhs);
  for (int i = 0; i < k; ++i) pi(i) = std::max(pi(i), 0.0);
  return pi / pi.sum();
}

Matrix TransitionCache::get(double delta) {
  const auto key = static_cast<std::int64_t>(std::llround(delta * 1e12));
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  Matrix p = transition_matrix(q_, delta).probs();
  std::lock_guard lock(mutex_);
  return cache_.try_emplace(key, std::move(p)).first->second;
}

std::size_t TransitionCache::size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

}  // namespace ctclust
