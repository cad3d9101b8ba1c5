#include <cmath>
#include <functional>

#include "ctclust/ctmc.hpp"
#include "ctclust/error.hpp"
#include "ctclust/path.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ctclust;

namespace {

GeneratorMatrix q1() {
  Matrix q(3, 3);
  q << -2.5, 2.0, 0.5, 0.5, -1.5, 1.0, 0.1, 0.9, -1.0;
  return validate_generator(q);
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

void check_invariants(const PathStats& s, double delta) {
  CHECK(std::abs(s.holding.sum() - delta) <= 1e-12);
  for (int l = 0; l < s.dim(); ++l) CHECK(s.jumps(l, l) == 0);
  CHECK((s.holding.array() >= 0.0).all());
  if (s.total_jumps() == 0) CHECK((s.holding.array() > 0.0).count() == 1);
}

oracle::Moments conditioned_moments(const GeneratorMatrix& q, double delta, int a, int b, int draws, Rng& rng,
                                    bool uniformization = false) {
  std::vector<Eigen::MatrixXi> jumps;
  std::vector<Vector> holding;
  for (int i = 0; i < draws; ++i) {
    PathStats s = uniformization ? simulate_conditioned_path_uniformization(q, delta, a, b, rng)
                                 : simulate_conditioned_path(q, delta, a, b, rng);
    jumps.push_back(s.jumps);
    holding.push_back(s.holding);
  }
  return oracle::summarize_paths(jumps, holding);
}

void check_close(const oracle::Moments& x, const oracle::Moments& y, double z = 3.0) {
  REQUIRE(x.mean.size() == y.mean.size());
  for (std::size_t i = 0; i < x.mean.size(); ++i) {
    const double se = std::hypot(x.se[i], y.se[i]);
    INFO("statistic " << i << ": " << x.mean[i] << " vs " << y.mean[i] << " (se " << se << ")");
    CHECK(std::abs(x.mean[i] - y.mean[i]) <= z * se + 1e-12);
  }
}

}  // namespace

TEST_SUITE("path") {
  TEST_CASE("zero generator forward path stays put") {
    Rng rng(1);
    const auto p = simulate_forward_path(validate_generator(Matrix::Zero(3, 3)), 2.5, 1, rng);
    CHECK(p.end_state == 1);
    CHECK(p.stats.total_jumps() == 0);
    CHECK(p.stats.holding(1) == 2.5);
  }

  TEST_CASE("forward paths: first-passage law of a one-way chain") {
    Matrix raw(2, 2);
    raw << -1, 1, 0, 0;
    const GeneratorMatrix q = validate_generator(raw);
    Rng rng(5);
    const int n = 40000;
    int moved = 0;
    for (int i = 0; i < n; ++i) moved += simulate_forward_path(q, 2.0, 0, rng).end_state == 1;
    const double p = 1.0 - std::exp(-2.0);
    CHECK(std::abs(moved / double(n) - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }

  TEST_CASE("forward paths: occupancy converges to the stationary distribution") {
    const GeneratorMatrix q = validate_generator(q1().rates());
    const Vector pi = stationary_distribution(q);
    Rng rng(11);
    std::discrete_distribution<int> start({0.5, 0.4, 0.1});
    Vector occ = Vector::Zero(3);
    const int reps = 400;
    for (int i = 0; i < reps; ++i) {
      const auto p = simulate_forward_path(q, 100.0, start(rng), rng);
      check_invariants(p.stats, 100.0);
      occ += p.stats.holding / 100.0;
    }
    occ /= reps;
    CHECK((occ - pi).cwiseAbs().maxCoeff() < 0.02);
  }

  TEST_CASE("conditioned paths: trivial and degenerate cases") {
    Rng rng(3);
    const GeneratorMatrix q = q1();
    for (int i = 0; i < 2000; ++i) {
      const PathStats s = simulate_conditioned_path(q, 0.8, 2, 2, rng);
      check_invariants(s, 0.8);
      if (s.total_jumps() == 0) CHECK(s.holding(2) == doctest::Approx(0.8));
    }
    const PathStats tiny = simulate_conditioned_path(q, 1e-13, 1, 1, rng);
    CHECK(tiny.total_jumps() == 0);
    CHECK(kind_of([&] { simulate_conditioned_path(q, 1e-13, 0, 1, rng); }) == ErrorKind::ImpossibleEndpoint);
    CHECK(kind_of([&] { simulate_conditioned_path(validate_generator(Matrix::Zero(2, 2)), 1.0, 0, 1, rng); }) ==
          ErrorKind::ImpossibleEndpoint);
  }

  TEST_CASE("conditioned paths match the rejection oracle for (1, 3)") {
    Rng rng(17), ref(18);
    const GeneratorMatrix q = q1();
    check_close(conditioned_moments(q, 1.0, 0, 2, 40000, rng), oracle::rejection_path_moments(q.rates(), 1.0, 0, 2, 40000, ref));
  }

  TEST_CASE("uniformisation sampler and the forced fallback agree with the oracle") {
    Rng rng(21), ref(22), fb(23);
    const GeneratorMatrix q = q1();
    const auto oracle_m = oracle::rejection_path_moments(q.rates(), 1.0, 1, 0, 30000, ref);
    check_close(conditioned_moments(q, 1.0, 1, 0, 30000, rng, true), oracle_m);

    ConditionedSamplerOptions opts;
    opts.max_rejections = 0;
    std::vector<Eigen::MatrixXi> jumps;
    std::vector<Vector> holding;
    for (int i = 0; i < 30000; ++i) {
      PathStats s = simulate_conditioned_path(q, 1.0, 1, 0, fb, nullptr, opts);
      jumps.push_back(s.jumps);
      holding.push_back(s.holding);
    }
    check_close(oracle::summarize_paths(jumps, holding), oracle_m);
  }

  TEST_CASE("mixing conditioned draws over end states reproduces forward moments") {
    const GeneratorMatrix q = q1();
    const double delta = 0.7;
    const Matrix p = transition_matrix(q, delta).probs();
    Rng rng(31), fwd(32);
    std::discrete_distribution<int> end({p(0, 0), p(0, 1), p(0, 2)});
    std::vector<Eigen::MatrixXi> cj, fj;
    std::vector<Vector> ch, fh;
    for (int i = 0; i < 40000; ++i) {
      PathStats s = simulate_conditioned_path(q, delta, 0, end(rng), rng);
      cj.push_back(s.jumps);
      ch.push_back(s.holding);
      SampledPath f = simulate_forward_path(q, delta, 0, fwd);
      fj.push_back(f.stats.jumps);
      fh.push_back(f.stats.holding);
    }
    check_close(oracle::summarize_paths(cj, ch), oracle::summarize_paths(fj, fh));
  }

  TEST_CASE("concatenated bridges match a single bridge") {
    const GeneratorMatrix q = q1();
    const double d1 = 0.4, d2 = 0.9;
    const Matrix p1 = transition_matrix(q, d1).probs(), p2 = transition_matrix(q, d2).probs();
    const int a = 2, b = 0;
    std::vector<double> w;
    for (int m = 0; m < 3; ++m) w.push_back(p1(a, m) * p2(m, b));
    std::discrete_distribution<int> mid(w.begin(), w.end());
    Rng rng(41), whole(42);
    std::vector<Eigen::MatrixXi> sj, wj;
    std::vector<Vector> sh, wh;
    for (int i = 0; i < 40000; ++i) {
      const int m = mid(rng);
      PathStats s = simulate_conditioned_path(q, d1, a, m, rng);
      s += simulate_conditioned_path(q, d2, m, b, rng);
      sj.push_back(s.jumps);
      sh.push_back(s.holding);
      PathStats t = simulate_conditioned_path(q, d1 + d2, a, b, whole);
      wj.push_back(t.jumps);
      wh.push_back(t.holding);
    }
    check_close(oracle::summarize_paths(sj, sh), oracle::summarize_paths(wj, wh));
  }

  TEST_CASE("same seed, same path") {
    Rng a(99), b(99);
    const PathStats x = simulate_conditioned_path(q1(), 2.0, 0, 2, a);
    const PathStats y = simulate_conditioned_path(q1(), 2.0, 0, 2, b);
    CHECK(x.jumps == y.jumps);
    CHECK(x.holding == y.holding);
  }

  TEST_CASE("path log-likelihood") {
    Matrix raw(2, 2);
    raw << 0, 2, 0.5, 0;
    const GeneratorMatrix q = validate_generator(raw);
    PathStats s = PathStats::zero(2);
    s.jumps(0, 1) = 1;
    s.holding << 0.5, 1.5;
    s.span = 2.0;
    CHECK(path_log_likelihood(q, s) == doctest::Approx(std::log(2.0) - 1.0 - 0.5 * 1.5));

    const PathStats still = PathStats::constant(3, 0, 1.7);
    CHECK(path_log_likelihood(q1(), still) == doctest::Approx(-2.5 * 1.7));

    Matrix zero_channel(2, 2);
    zero_channel << 0, 0, 1, 0;
    PathStats bad = PathStats::zero(2);
    bad.jumps(0, 1) = 3;
    bad.holding << 1.0, 0.0;
    CHECK(kind_of([&] { path_log_likelihood(validate_generator(zero_channel), bad); }) == ErrorKind::ZeroRateWithJump);
  }
}
