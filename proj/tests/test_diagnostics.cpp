#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctclust/ctmc.hpp"
#include "ctclust/diagnostics.hpp"
#include "ctclust/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ctclust;

namespace {

// Minimum disagreement over every injective map estimated -> true label, by
// recursion over the estimated labels.
double brute_misclassify(const std::vector<int>& est, const std::vector<int>& tru) {
  const int ne = *std::max_element(est.begin(), est.end()) + 1;
  const int nt = *std::max_element(tru.begin(), tru.end()) + 1;
  std::vector<int> map(ne, -1);
  std::vector<char> used(nt, 0);
  int best = static_cast<int>(est.size());
  std::function<void(int)> rec = [&](int e) {
    if (e == ne) {
      int wrong = 0;
      for (std::size_t i = 0; i < est.size(); ++i) wrong += map[est[i]] != tru[i];
      best = std::min(best, wrong);
      return;
    }
    map[e] = -1;
    rec(e + 1);
    for (int t = 0; t < nt; ++t) {
      if (used[t]) continue;
      used[t] = 1;
      map[e] = t;
      rec(e + 1);
      used[t] = 0;
    }
  };
  rec(0);
  return static_cast<double>(best) / static_cast<double>(est.size());
}

ClusterParams params(const Vector& pi, const Matrix& q, const Matrix& theta) {
  return {InitialDistribution::from_probs(pi), validate_generator(q), theta};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("modal cluster count") {
    const std::vector<int> counts{3, 3, 4, 2, 4};
    const auto m = modal_cluster_count(counts);
    CHECK(m.count == 3);
    CHECK(m.fraction == doctest::Approx(0.4));
    CHECK(modal_cluster_count(std::vector<int>{5}).fraction == 1.0);
    CHECK(kind_of([] { modal_cluster_count(std::vector<int>{}); }) == ErrorKind::EmptyTrace);
  }

  TEST_CASE("misclassification examples") {
    CHECK(align_and_misclassify(std::vector<int>{0, 0, 1, 1}, std::vector<int>{1, 1, 0, 0}) == 0.0);
    CHECK(align_and_misclassify(std::vector<int>{0, 0, 0, 1}, std::vector<int>{0, 0, 1, 1}) == 0.25);
    CHECK(align_and_misclassify(std::vector<int>{0, 1, 2}, std::vector<int>{0, 0, 0}) == doctest::Approx(2.0 / 3.0));
    CHECK(align_and_misclassify(std::vector<int>{7, 7, 3}, std::vector<int>{1, 1, 4}) == 0.0);
    CHECK(kind_of([] { align_and_misclassify(std::vector<int>{0}, std::vector<int>{0, 1}); }) == ErrorKind::LengthMismatch);
    const auto map = best_label_map(std::vector<int>{0, 0, 1, 1, 2}, std::vector<int>{2, 2, 0, 0, 1});
    CHECK(map == std::vector<int>{2, 0, 1});
  }

  TEST_CASE("misclassification against exhaustive search and under relabelling") {
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
      const int n = 3 + static_cast<int>(rng() % 10), ne = 1 + static_cast<int>(rng() % 4), nt = 1 + static_cast<int>(rng() % 4);
      std::vector<int> est(n), tru(n);
      for (int i = 0; i < n; ++i) {
        est[i] = static_cast<int>(rng() % ne);
        tru[i] = static_cast<int>(rng() % nt);
      }
      CHECK(align_and_misclassify(est, tru) == doctest::Approx(brute_misclassify(est, tru)).epsilon(1e-15));
    }
    std::vector<int> est(60), tru(60);
    for (int i = 0; i < 60; ++i) {
      tru[i] = i % 3;
      est[i] = (i % 7 == 0) ? (i + 1) % 3 : i % 3;
    }
    const double base = align_and_misclassify(est, tru);
    std::vector<int> perm{0, 1, 2};
    for (int rep = 0; rep < 50; ++rep) {
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<int> relabelled(60);
      for (int i = 0; i < 60; ++i) relabelled[i] = perm[est[i]];
      CHECK(align_and_misclassify(relabelled, tru) == base);
    }
  }

  TEST_CASE("effective sample size") {
    Rng rng(8);
    const auto iid = oracle::ar1_series(0.0, 20000, rng);
    CHECK(effective_sample_size(iid) == doctest::Approx(20000).epsilon(0.1));
    const auto ar = oracle::ar1_series(0.9, 100000, rng);
    const double target = 100000 * 0.1 / 1.9;
    CHECK(effective_sample_size(ar) == doctest::Approx(target).epsilon(0.2));
    std::vector<double> affine(ar.size());
    std::transform(ar.begin(), ar.end(), affine.begin(), [](double x) { return 4.0 - 2.5 * x; });
    CHECK(effective_sample_size(affine) == doctest::Approx(effective_sample_size(ar)).epsilon(1e-9));
    CHECK(kind_of([] { effective_sample_size(std::vector<double>(50, 1.0)); }) == ErrorKind::ConstantSeries);
    CHECK(kind_of([] { effective_sample_size(std::vector<double>{1, 2, 3}); }) == ErrorKind::InvalidArgument);
    std::vector<double> alternating(100);
    for (int i = 0; i < 100; ++i) alternating[i] = i % 2 ? 1.0 : -1.0;
    const double e = effective_sample_size(alternating);
    CHECK(e > 0.0);
    CHECK(e <= 100.0);
  }

  TEST_CASE("transition probability curves") {
    Matrix a(2, 2), b(2, 2);
    a << -1, 1, 2, -2;
    b << -0.5, 0.5, 0.5, -0.5;
    const std::vector<GeneratorMatrix> draws{validate_generator(a), validate_generator(b)};
    const auto curves = transition_probability_curves(draws, 2.0, 5);
    REQUIRE(curves.times.size() == 5);
    CHECK(curves.times.back() == 2.0);
    CHECK(curves.probs[0].isApprox(Matrix::Identity(2, 2)));
    const Matrix expect = 0.5 * (oracle::two_state_transition(1, 2, 1.0) + oracle::two_state_transition(0.5, 0.5, 1.0));
    CHECK((curves.probs[2] - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(transition_probability_curves(draws, 0.0, 1).probs[0].isApprox(Matrix::Identity(2, 2)));
    CHECK(kind_of([] { transition_probability_curves({}, 1.0, 3); }) == ErrorKind::EmptySamples);
  }

  TEST_CASE("parameter norm errors") {
    Vector p(3), r(3);
    p << 0.5, 0.4, 0.1;
    r << 0.6, 0.3, 0.1;
    Matrix q = Matrix::Zero(3, 3), s = Matrix::Zero(3, 3);
    q(0, 1) = 1.0;
    s(0, 1) = 4.0;
    Matrix th(3, 1), tt(3, 1);
    th << 1.0, 2.0, 3.0;
    tt << 1.0, 2.0, 3.0 * std::exp(0.5);
    const auto e = param_norm_error(params(p, q, th), params(r, s, tt), Family::Poisson);
    CHECK(e.pi == doctest::Approx(std::sqrt(0.02)));
    CHECK(e.q == doctest::Approx(std::sqrt(18.0)));
    CHECK(e.coefficients == doctest::Approx(0.5));
    const auto zero = param_norm_error(params(p, q, th), params(p, q, th), Family::Gaussian);
    CHECK(zero.pi == 0.0);
    CHECK(zero.coefficients == 0.0);
    CHECK(zero.q == 0.0);
    CHECK(kind_of([&] {
            param_norm_error(params(p, q, th), params(Vector::Constant(2, 0.5), Matrix::Zero(2, 2), Matrix::Ones(2, 1)),
                             Family::Poisson);
          }) == ErrorKind::DimensionMismatch);
  }

  TEST_CASE("summaries undo label switching and state ordering") {
    Vector pi(2);
    pi << 0.3, 0.7;
    Matrix qa(2, 2), qb(2, 2);
    qa << 0, 1, 2, 0;
    qb << 0, 5, 6, 0;
    Matrix low(2, 1), high(2, 1);
    low << 1.0, 4.0;
    high << 10.0, 40.0;
    const ClusterParams c0 = params(pi, qa, low), c1 = params(pi, qb, high);
    // Same cluster with its states listed in the opposite order.
    Vector pi_rev(2);
    pi_rev << 0.7, 0.3;
    Matrix qa_rev(2, 2), low_rev(2, 1);
    qa_rev << 0, 2, 1, 0;
    low_rev << 4.0, 1.0;
    const ClusterParams c0_rev = params(pi_rev, qa_rev, low_rev);

    std::vector<PosteriorSample> samples;
    for (int s = 0; s < 20; ++s) {
      PosteriorSample x;
      x.iteration = s + 1;
      x.num_clusters = 2;
      if (s % 2) {
        x.labels = {1, 1, 0, 0};
        x.clusters = {c1, c0_rev};
      } else {
        x.labels = {0, 0, 1, 1};
        x.clusters = {c0, c1};
      }
      samples.push_back(x);
    }
    PosteriorSample odd;
    odd.num_clusters = 3;
    odd.labels = {0, 1, 2, 2};
    odd.clusters = {c0, c1, c1};
    samples.insert(samples.begin(), odd);

    const FitSummary f = summarize_samples(samples);
    CHECK(f.modal.count == 2);
    CHECK(f.modal.fraction == doctest::Approx(20.0 / 21.0));
    CHECK(f.counts.size() == 21);
    CHECK(f.assignments[0] == f.assignments[1]);
    CHECK(f.assignments[2] == f.assignments[3]);
    CHECK(f.assignments[0] != f.assignments[2]);
    const auto& a = f.clusters[f.assignments[0]];
    CHECK(a.draws == 20);
    CHECK(a.theta_mean.isApprox(low));
    CHECK(a.pi_mean.isApprox(pi));
    CHECK(a.q_mean(0, 1) == doctest::Approx(1.0));
    CHECK(a.q_lo(1, 0) == doctest::Approx(2.0));
    CHECK(eigenvalue_table(a).size() == 20);
    CHECK(std::isnan(f.q_ess[0](0)));
    CHECK(kind_of([] { summarize_samples({}); }) == ErrorKind::EmptySamples);
  }

  TEST_CASE("quantiles") {
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
    CHECK(quantile({5.0}, 0.975) == 5.0);
  }
}
