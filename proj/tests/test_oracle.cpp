#include <doctest.h>

#include <random>

#include "ergo/models.hpp"
#include "ergo/oracle.hpp"
#include "ergo/spectral.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace ergo;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("exact law for tiny horizons") {
  const ModelInstance m = doeblin_example();
  SUBCASE("one step is a point mass at F(x)") {
    const ExactSumDistribution d = exact_sum_distribution(m.chain, m.functional, 3, 1);
    CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d.mean() == doctest::Approx(m.functional.values()(3)).epsilon(1e-13));
    CHECK(d.variance() < 1e-14);
    CHECK(d.joint.row(0).sum() == doctest::Approx(m.chain.kernel()(3, 0)).epsilon(1e-15));
  }
  SUBCASE("two steps by enumeration") {
    const ExactSumDistribution d = exact_sum_distribution(m.chain, m.functional, 1, 2);
    const auto law = oracle::path_law(m.chain.kernel(), m.functional.values(), 1, 2);
    double total = 0.0;
    for (const auto& [key, prob] : law) {
      const double s = static_cast<double>(key) * 1e-9;
      const long k = std::lround((s - d.value(0)) / d.span);
      CHECK(d.probability(k) == doctest::Approx(prob).epsilon(1e-13));
      total += prob;
    }
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("dynamic program agrees with path enumeration on random chains") {
  std::mt19937_64 rng(20261015);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::uniform_int_distribution<int> value(-2, 3);
  for (int N = 2; N <= 4; ++N) {
    for (int trial = 0; trial < 3; ++trial) {
      oracle::Mat P(N, N);
      for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) P(i, j) = u(rng);
        P.row(i) /= P.row(i).sum();
      }
      oracle::Vec F(N);
      for (int i = 0; i < N; ++i) F(i) = value(rng);
      if (F.maxCoeff() == F.minCoeff()) F(0) += 1;
      const ValidatedChain c = validate_kernel(P);
      const Functional f(F);  // raw values keep the keys integral
      for (int n : {1, 3, 8}) {
        const ExactSumDistribution d = exact_sum_distribution(c, f, 0, n);
        const auto law = oracle::path_law(P, F, 0, n);
        CAPTURE(N);
        CAPTURE(n);
        double worst = 0.0;
        for (const auto& [key, prob] : law) {
          const double s = static_cast<double>(key) * 1e-9;
          const long k = std::lround((s - d.value(0)) / d.span);
          worst = std::max(worst, std::abs(d.probability(k) - prob));
        }
        CHECK(worst < 1e-14);
        CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("exact law moments and tails") {
  const ModelInstance m = doeblin_example();
  const int n = 300;
  const ExactSumDistribution d = exact_sum_distribution(m.chain, m.functional, 0, n);
  const oracle::Vec mean = oracle::centered_mean_sums(m.chain.kernel(), m.raw, n);
  CHECK(d.mean() == doctest::Approx(mean(0)).epsilon(1e-9));
  const oracle::IntegerLaw law = oracle::integer_law(m.chain.kernel(), {0, 1, 2, 3, 4}, oracle::point_mass(5, 0), n);
  CHECK(d.variance() == doctest::Approx(law.variance()).epsilon(1e-9));

  SUBCASE("tail edges") {
    const double lo = d.value(d.k_min), hi = d.value(d.k_max());
    CHECK(d.tail(lo - 1.0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(d.tail(lo) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(d.tail(hi + 1e-6) == 0.0);
    CHECK(d.tail(hi) == doctest::Approx(d.probability(d.k_max())));
    CHECK(d.cdf(lo - 1e-6) == 0.0);
    CHECK(d.cdf(hi) == doctest::Approx(1.0).epsilon(1e-13));
  }
  SUBCASE("weak inequality and atoms") {
    for (long k : {d.k_min + 50, d.k_min + 100, d.k_min + 200}) {
      const double s = d.value(k);
      CHECK(d.cdf(s) - d.cdf_left(s) == doctest::Approx(d.probability(k)).epsilon(1e-12));
      CHECK(d.tail(s) + d.cdf_left(s) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("exact_tail matches the recursion oracle") {
    for (double c : {-0.2, 0.0, 0.3}) {
      const double raw = n * (c + m.functional.removed_mean());
      CHECK(exact_tail(m.chain, m.functional, 0, n, c) == doctest::Approx(law.tail(raw)).epsilon(1e-10));
    }
  }
}

TEST_CASE("symmetric law splits its central atom") {
  // p = q with F = -1, +1 from the stationary start: S_n and -S_n agree in law.
  const ModelInstance m = two_state(0.3, 0.3, vec({-1, 1}));
  const ExactSumDistribution d = exact_sum_distribution(m.chain, m.functional, m.chain.stationary(), 20);
  CHECK(d.cdf(0.0) + d.cdf_left(0.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(d.mean()) < 1e-13);
}

TEST_CASE("exact law refuses what it cannot represent") {
  const ModelInstance nl = nonlattice_example();
  CHECK(code_of([&] { exact_sum_distribution(nl.chain, nl.functional, 0, 10); }) == ErrorCode::NonLatticeFunctional);
  const ModelInstance m = doeblin_example();
  Settings tight;
  tight.dp_cell_budget = 1000;
  CHECK(code_of([&] { exact_sum_distribution(m.chain, m.functional, 0, 100, tight); }) == ErrorCode::BudgetExceeded);
}

TEST_CASE("Monte Carlo") {
  const ModelInstance m = doeblin_example();
  const int n = 50;
  const std::size_t paths = 20000;
  const ExactSumDistribution d = exact_sum_distribution(m.chain, m.functional, 0, n);

  SUBCASE("sample mean within three standard errors") {
    const McSample s = simulate_paths(m.chain, m.functional, 0, n, paths, 7);
    REQUIRE(s.values.size() == paths);
    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= static_cast<double>(paths);
    const double se = std::sqrt(d.variance() / static_cast<double>(paths));
    CHECK(std::abs(mean - d.mean()) < 3 * se);
  }
  SUBCASE("same seed, same paths; different seed, different paths") {
    const McSample a = simulate_paths(m.chain, m.functional, 0, n, 500, 11);
    const McSample b = simulate_paths(m.chain, m.functional, 0, n, 500, 11);
    const McSample c = simulate_paths(m.chain, m.functional, 0, n, 500, 12);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    CHECK(uniform_draw(1, 2, 3) == uniform_draw(1, 2, 3));
    CHECK(uniform_draw(1, 2, 3) != uniform_draw(1, 2, 4));
  }
  SUBCASE("tilted paths follow the twisted chain") {
    const double a = 0.4;
    const McSample s = simulate_paths(m.chain, m.functional, 0, n, paths, 5, a);
    REQUIRE(s.log_weights.size() == paths);
    // E_a[S_n] from state 0 is sum_{i < n} (P_a^i F)(0) under the twisted kernel.
    const Matrix Pa = twisted_chain(m.chain, m.functional, a).kernel.kernel();
    Vector g = m.functional.values();
    double want = 0.0;
    for (int i = 0; i < n; ++i) {
      want += g(0);
      g = Pa * g;
    }
    double mean = 0.0, sq = 0.0;
    for (double v : s.values) {
      mean += v;
      sq += v * v;
    }
    mean /= static_cast<double>(paths);
    const double se = std::sqrt((sq / static_cast<double>(paths) - mean * mean) / static_cast<double>(paths));
    CHECK(std::abs(mean - want) < 3 * se);
  }
  SUBCASE("weighted tail estimate agrees with the exact tail") {
    const double a = 0.4;
    const double threshold = n * cgf_point(m.chain, m.functional, a, false).dLambda;
    const McSample s = simulate_paths(m.chain, m.functional, 0, n, paths, 9, a);
    const TailEstimate t = tail_estimate(s, threshold);
    const double exact = d.tail(threshold);
    CHECK(exact < 0.01);
    CHECK(std::abs(t.estimate - exact) < 3 * t.standard_error);
  }
  SUBCASE("empirical CDF band") {
    CHECK(dkw_half_width(1000000) == doctest::Approx(std::sqrt(std::log(2.0 / 0.01) / 2e6)).epsilon(1e-12));
    CHECK(dkw_half_width(1000000) == doctest::Approx(1.63e-3).epsilon(1e-2));
    const McSample s = simulate_paths(m.chain, m.functional, 0, n, paths, 3);
    std::vector<double> grid;
    // Midpoints between atoms: floating sums of S_n land a hair either side of a lattice point.
    for (long k = d.k_min; k <= d.k_max(); k += 5) grid.push_back(d.value(k) + 0.5 * d.span);
    const EmpiricalCdf e = empirical_cdf(s.values, grid);
    CHECK(e.band == doctest::Approx(dkw_half_width(paths)));
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(e.values[i] - d.cdf(grid[i])) < e.band);
  }
  SUBCASE("sup distance to a continuous law") {
    const std::vector<double> sample{0.0, 1.0};
    // Empirical CDF of {0, 1} against the uniform law on [0, 1].
    CHECK(sup_distance(sample, [](double y) { return std::clamp(y, 0.0, 1.0); }) == doctest::Approx(0.5));
  }
}
