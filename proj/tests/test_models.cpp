#include <doctest.h>

#include <set>

#include "ergo/models.hpp"
#include "ergo/spectral.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace ergo;

TEST_CASE("queue constants") {
  const MM1Model m = mm1(0.25, 50);
  CHECK(m.q == doctest::Approx(0.75));
  CHECK(m.rho == doctest::Approx(1.0 / 3));
  CHECK(m.pi0 == doctest::Approx(2.0 / 3));
  CHECK(m.betabar == doctest::Approx(1.0 / std::sqrt(0.75)).epsilon(1e-15));
  CHECK(m.astar == doctest::Approx(std::log(0.75 / std::sqrt(0.75) + 0.5)).epsilon(1e-15));
  CHECK(m.N == 50);
  CHECK(m.chain.size() == 51);
  CHECK(code_of([] { mm1(0.5, 50); }) == ErrorCode::UnstableQueue);
  CHECK(code_of([] { mm1(0.7, 50); }) == ErrorCode::UnstableQueue);
  CHECK(code_of([] { mm1(0.25, 10); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { mm1(0.0, 50); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("return-time generating function") {
  for (double p : {0.1, 0.25, 0.4}) {
    const MM1Model m = mm1(p, 50);
    for (double frac : {0.3, 0.8, 1.0 / m.betabar, 0.99}) {
      const double r = frac * m.betabar;
      CAPTURE(p);
      CAPTURE(r);
      CHECK(mm1_return_generating_function(m, r) == doctest::Approx(oracle::mm1_return_gf(p, r, 150)).epsilon(1e-10));
    }
    CHECK(mm1_return_generating_function(m, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(code_of([&] { mm1_return_generating_function(m, 1.01 * m.betabar); }) == ErrorCode::Domain);
  }
}

TEST_CASE("Lambda by the renewal fixed point") {
  const MM1Model m = mm1(0.25, 400);
  SUBCASE("fixed point equation holds") {
    for (double a : {-0.5, -0.1, 0.1, 0.3}) {
      CAPTURE(a);
      const MM1Lambda l = mm1_lambda(m, a);
      CHECK_FALSE(l.linear_regime);
      CHECK(l.r == doctest::Approx(std::exp(m.pi0 * a - l.Lambda)).epsilon(1e-12));
      // Near astar r approaches betabar and the oracle needs a long
      // truncation; far from it a short one avoids overflow.
      const int horizon = l.r > 0.99 * m.betabar ? 600 : 150;
      CHECK(oracle::mm1_return_gf(m.p, l.r, horizon) == doctest::Approx(std::exp(a)).epsilon(1e-10));
      CHECK(l.indicator_Lambda == doctest::Approx(l.Lambda + (1 - m.pi0) * a).epsilon(1e-14));
    }
  }
  SUBCASE("agrees with the truncated eigenvalue below astar") {
    for (double a : {-0.5, -0.2, 0.1, 0.25}) {
      CAPTURE(a);
      const TruncatedLambda t = mm1_truncated_lambda(m, a);
      CHECK_FALSE(t.truncation_dominated);
      CHECK(std::abs(t.Lambda - mm1_lambda_fixed_point(m, a)) < 1e-8);
    }
  }
  SUBCASE("closed form at and beyond astar") {
    const MM1Lambda at = mm1_lambda(m, m.astar);
    CHECK(at.Lambda == doctest::Approx(m.pi0 * m.astar - std::log(m.betabar)).epsilon(1e-14));
    CHECK_FALSE(at.linear_regime);
    const MM1Lambda below = mm1_lambda(m, m.astar - 1e-10);
    CHECK(below.Lambda == doctest::Approx(at.Lambda).epsilon(1e-8));
    const MM1Lambda beyond = mm1_lambda(m, m.astar + 0.2);
    CHECK(beyond.linear_regime);
    CHECK(beyond.indicator_Lambda == doctest::Approx(m.astar + 0.2 - std::log(m.betabar)).epsilon(1e-14));
    CHECK(code_of([&] { mm1_lambda_fixed_point(m, m.astar + 0.2); }) == ErrorCode::LinearRegime);
    CHECK(mm1_truncated_lambda(m, m.astar + 0.2).truncation_dominated);
  }
  SUBCASE("linear regime error carries the closed forms") {
    try {
      mm1_lambda_fixed_point(m, 0.5);
      FAIL("expected LinearRegime");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LinearRegime);
      CHECK(e.detail().at("Lambda_indicator").get<double>() == doctest::Approx(0.5 - std::log(m.betabar)));
      CHECK(e.detail().at("astar").get<double>() == doctest::Approx(m.astar));
    }
  }
}

TEST_CASE("two-state model") {
  Vector F(2);
  F << 0.0, 2.0;
  const ModelInstance m = two_state(0.3, 0.4, F);
  CHECK(m.raw == F);
  CHECK(std::abs(stationary_mean(m.chain, m.functional.values())) < 1e-15);
  CHECK(m.functional.removed_mean() == doctest::Approx(2.0 * 3.0 / 7));
  for (double a : {-1.0, 0.0, 0.7}) {
    CHECK(two_state_lambda(0.3, 0.4, F, a) ==
          doctest::Approx(oracle::quadratic_lambda(oracle::two_state_kernel(0.3, 0.4), F, a)).epsilon(1e-15));
  }
  CHECK(code_of([&] { two_state(0.0, 0.4, F); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { two_state(0.3, 0.4, Vector::Zero(3)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("Doeblin mixture structure") {
  const ModelInstance m = doeblin_example();
  const Matrix& P = m.chain.kernel();
  for (int x = 0; x < 5; ++x) {
    CHECK(P(x, x) == doctest::Approx(0.3 / 5 + 0.7 * 0.9));
    CHECK(P(x, (x + 1) % 5) == doctest::Approx(0.3 / 5 + 0.7 * 0.1));
    CHECK(P.row(x).minCoeff() == doctest::Approx(0.3 / 5));
  }
  // Doubly stochastic, so the stationary law is uniform.
  CHECK((m.chain.stationary().array() - 0.2).abs().maxCoeff() < 1e-14);
}

TEST_CASE("model zoo") {
  const std::vector<ModelInstance> z = zoo();
  std::set<std::string> names;
  for (const ModelInstance& m : z) {
    names.insert(m.name);
    CHECK(m.chain.aperiodic());
    CHECK(std::abs(stationary_mean(m.chain, m.functional.values())) < 1e-12);
    CHECK((m.raw.array() - m.functional.removed_mean() - m.functional.values().array()).abs().maxCoeff() < 1e-14);
  }
  CHECK(names.size() == z.size());
  CHECK(names.count("mm1") == 1);
  CHECK(names.count("iid") == 1);
  CHECK(names.count("doeblin") == 1);
}
