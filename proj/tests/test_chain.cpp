#include <doctest.h>

#include "ergo/chain.hpp"
#include "ergo/error.hpp"
#include "ergo/models.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace ergo;

TEST_CASE("identity kernel has two closed classes") {
  CHECK(code_of([] { validate_kernel(Matrix::Identity(2, 2)); }) == ErrorCode::Reducible);
}

TEST_CASE("malformed kernels are rejected with specific codes") {
  Matrix P(2, 2);
  P << 0.5, 0.4, 0.5, 0.5;
  CHECK(code_of([&] { validate_kernel(P); }) == ErrorCode::RowSum);
  P << 1.1, -0.1, 0.5, 0.5;
  CHECK(code_of([&] { validate_kernel(P); }) == ErrorCode::NegativeEntry);
  CHECK(code_of([] { validate_kernel(Matrix::Ones(2, 3) / 3); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("periodic chain validates but is refused where aperiodicity matters") {
  Matrix P(2, 2);
  P << 0, 1, 1, 0;
  const ValidatedChain c = validate_kernel(P);
  CHECK(c.period() == 2);
  CHECK_FALSE(c.aperiodic());
  CHECK(code_of([&] { require_ergodic(c, "test"); }) == ErrorCode::NotAperiodic);
}

TEST_CASE("two-state stationary law") {
  const ValidatedChain c = validate_kernel(oracle::two_state_kernel(0.3, 0.4));
  const oracle::Vec pi = oracle::stationary(oracle::two_state_kernel(0.3, 0.4));
  CHECK(c.stationary()(0) == doctest::Approx(4.0 / 7).epsilon(1e-14));
  CHECK(c.stationary()(1) == doctest::Approx(3.0 / 7).epsilon(1e-14));
  CHECK((c.stationary() - pi).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((c.stationary().transpose() * c.kernel() - c.stationary().transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("truncated queue stationary law is geometric in the interior") {
  const MM1Model m = mm1(0.25, 50);
  const Vector& pi = m.chain.stationary();
  const oracle::Vec ref = oracle::stationary(m.chain.kernel());
  CHECK((pi - ref).cwiseAbs().maxCoeff() < 1e-13);
  // Detailed balance pi(x) p = pi(x+1) q holds up to the reflecting end.
  const double rho = 1.0 / 3, pi0 = (1 - rho) / (1 - std::pow(rho, 51));
  for (int x = 0; x <= 50; ++x) CHECK(std::abs(pi(x) - pi0 * std::pow(rho, x)) < 1e-15);
  CHECK(pi(0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK((pi.transpose() * m.chain.kernel() - pi.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stationary residual holds on every zoo chain") {
  for (const ModelInstance& m : zoo()) {
    const Vector& pi = m.chain.stationary();
    CHECK((pi.transpose() * m.chain.kernel() - pi.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("centering") {
  const ValidatedChain c = validate_kernel(oracle::two_state_kernel(0.3, 0.4));
  SUBCASE("constant functional becomes zero") {
    const Functional f = center_functional(Functional(Vector::Constant(2, 2.5)), c);
    CHECK(f.values().cwiseAbs().maxCoeff() < 1e-15);
    CHECK(f.removed_mean() == doctest::Approx(2.5));
  }
  SUBCASE("indicator of state 1") {
    const Functional f = center_functional(Functional(Vector::Unit(2, 1)), c);
    CHECK(f[0] == doctest::Approx(-3.0 / 7).epsilon(1e-14));
    CHECK(f[1] == doctest::Approx(4.0 / 7).epsilon(1e-14));
    CHECK(f.bound() == doctest::Approx(4.0 / 7));
  }
  SUBCASE("idempotent") {
    const Functional once = center_functional(Functional(Vector::Unit(2, 1)), c);
    const Functional twice = center_functional(once, c);
    CHECK((once.values() - twice.values()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_NOTHROW(require_centered(c, once));
    CHECK(code_of([&] { require_centered(c, Functional(Vector::Unit(2, 1))); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("expectation iterate") {
  const oracle::Mat P = oracle::two_state_kernel(0.3, 0.4);
  const ValidatedChain c = validate_kernel(P);
  const Functional f = center_functional(Functional(Vector::Unit(2, 1)), c);

  SUBCASE("alpha = 0 and n = 0 give one") {
    for (int n : {0, 1, 5, 40}) CHECK(std::abs(expectation_iterate(c, f, 0.0, 1, n) - 1.0) < 1e-14);
    CHECK(std::abs(expectation_iterate(c, f, Complex(0.7, 0.3), 0, 0) - 1.0) < 1e-15);
  }
  SUBCASE("matches path enumeration") {
    for (double a : {-0.8, 0.25, 1.3}) {
      for (int x : {0, 1}) {
        const Complex got = expectation_iterate(c, f, a, static_cast<StateIndex>(x), 3);
        const Complex want = oracle::path_mgf(P, f.values(), a, x, 3);
        CHECK(std::abs(got - want) < 1e-14);
      }
    }
    const Complex alpha(0.2, 1.7);
    CHECK(std::abs(expectation_iterate(c, f, alpha, 0, 7) - oracle::path_mgf(P, f.values(), alpha, 0, 7)) < 1e-13);
  }
  SUBCASE("log-domain form survives where the plain value would overflow") {
    const LogComplex big = expectation_iterate_log(c, f, 3.0, 0, 2000);
    CHECK(std::isfinite(big.log_modulus));
    CHECK(big.log_modulus > 709.0);
    const LogComplex small = expectation_iterate_log(c, f, 3.0, 0, 12);
    CHECK(small.log_modulus ==
          doctest::Approx(std::log(std::abs(oracle::path_mgf(P, f.values(), 3.0, 0, 12)))).epsilon(1e-13));
  }
}
