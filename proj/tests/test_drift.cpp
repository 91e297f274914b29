#include <doctest.h>

#include <numbers>

#include "ergo/drift.hpp"
#include "ergo/error.hpp"
#include "ergo/models.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace ergo;

namespace {
constexpr double e = std::numbers::e;
}

TEST_CASE("resolvent of a single absorbing state") {
  const ResolventKernel r = resolvent(Matrix::Ones(1, 1));
  CHECK(r.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("resolvent rows sum to one and dominate the one-step term") {
  const ValidatedChain c = validate_kernel(oracle::two_state_kernel(0.3, 0.4));
  for (double theta : {0.3, 1.0, 2.5}) {
    const Matrix R = resolvent(c, theta).matrix;
    CHECK((R.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    const Matrix first = (1 - std::exp(-theta)) * std::exp(-theta) * c.kernel();
    CHECK((R - first).minCoeff() >= -1e-15);
    CHECK(R.minCoeff() > 0.0);
  }
}

TEST_CASE("resolvent of the truncated queue matches the series") {
  const MM1Model m = mm1(0.25, 60);
  const Matrix R = resolvent(m.chain, 1.0).matrix;
  const oracle::Mat ref = oracle::resolvent_series(m.chain.kernel(), 1.0, 60);
  CHECK((R - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Doeblin certificate with V = 1 has zero slack") {
  const ModelInstance m = doeblin_example();
  const auto mino = check_doeblin(m.chain);
  REQUIRE(mino.has_value());
  const Eigen::Index n = static_cast<Eigen::Index>(m.chain.size());
  for (double delta : {0.1, 0.5, 0.9}) {
    const DriftCertificateV4 cert =
        check_v4(m.chain, Vector::Ones(n), delta, delta / mino->epsilon, Vector::Constant(n, mino->epsilon), mino->nu);
    CHECK(cert.slack.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(alpha_bar(cert.delta, cert.b) ==
          doctest::Approx((e - 1) * mino->epsilon / (2 - mino->epsilon)).epsilon(1e-14));
    const PotentialBound pb = potential_norm_bound(cert);
    CHECK(pb.bound == doctest::Approx(2.0 / mino->epsilon));
    CHECK(pb.holds);
    CHECK(pb.computed_norm <= pb.bound + 1e-9);
  }
}

TEST_CASE("queue Lyapunov function contracts by sqrt(4pq) in the interior") {
  const MM1Model m = mm1(0.25, 80);
  const Vector V = m.lyapunov();
  const Vector PV = m.chain.kernel() * V;
  for (int x = 1; x < m.N; ++x) CHECK(PV(x) == doctest::Approx(std::sqrt(4 * m.p * m.q) * V(x)).epsilon(1e-14));
  CHECK(m.rho == doctest::Approx(1.0 / 3));
  CHECK(m.betabar == doctest::Approx(1.0 / std::sqrt(0.75)));
  CHECK(m.betabar > 1.0);
}

TEST_CASE("certificate violations are reported") {
  const ValidatedChain c = validate_kernel(oracle::two_state_kernel(0.3, 0.4));
  SUBCASE("minorization asks for more than the resolvent has") {
    CHECK(code_of([&] { check_v4(c, Vector::Ones(2), 0.5, 1.0, Vector::Ones(2), Vector::Unit(2, 1)); }) ==
          ErrorCode::V4Violation);
  }
  SUBCASE("drift inequality fails") {
    Vector V(2);
    V << 1.0, 50.0;
    const auto m = check_doeblin(c);
    CHECK(code_of([&] { check_v4(c, V, 0.5, 0.5, Vector::Constant(2, m->epsilon), m->nu); }) ==
          ErrorCode::V4Violation);
  }
  SUBCASE("b below delta") {
    CHECK(code_of([&] { check_v4(c, Vector::Ones(2), 0.5, 0.4, Vector::Constant(2, 0.1), Vector::Unit(2, 0)); }) ==
          ErrorCode::Domain);
  }
}

TEST_CASE("Doeblin minorization") {
  SUBCASE("i.i.d. kernel: nu is the common row, epsilon is the off-diagonal resolvent mass") {
    const ModelInstance m = iid_example();
    const auto mino = check_doeblin(m.chain);
    REQUIRE(mino.has_value());
    // R = (1 - 1/e) I + (1/e) 1 (x) mu, whose column minima are mu / e.
    CHECK(mino->epsilon == doctest::Approx(1.0 / e).epsilon(1e-14));
    CHECK((mino->nu - m.chain.kernel().row(0).transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("two-state chain: epsilon is the sum of resolvent column minima") {
    const oracle::Mat P = oracle::two_state_kernel(0.3, 0.4);
    const ValidatedChain c = validate_kernel(P);
    const oracle::Mat R = oracle::resolvent_series(P, 1.0, 80);
    const double want = R.colwise().minCoeff().sum();
    const auto mino = check_doeblin(c);
    REQUIRE(mino.has_value());
    CHECK(mino->epsilon == doctest::Approx(want).epsilon(1e-12));
    CHECK(mino->epsilon > 0.0);
  }
  SUBCASE("mixture chain recovers at least the uniform share seen through the resolvent") {
    const ModelInstance m = doeblin_example();
    const auto mino = check_doeblin(m.chain);
    REQUIRE(mino.has_value());
    // Every P^k, k >= 1, carries kDoeblinMixture uniform mass; R weights those terms by 1/e in total.
    CHECK(mino->epsilon >= kDoeblinMixture / e);
  }
  SUBCASE("every zoo chain is Doeblin") {
    for (const ModelInstance& m : zoo()) {
      const auto mino = check_doeblin(m.chain);
      REQUIRE(mino.has_value());
      CHECK(mino->epsilon > 0.0);
      CHECK(std::abs(mino->nu.sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("alpha_bar") {
  CHECK(alpha_bar(0.3, 0.3) == doctest::Approx(e - 1).epsilon(1e-15));
  CHECK(alpha_bar(0.1, 1.0) == doctest::Approx(0.1 * (e - 1) / 1.9).epsilon(1e-15));
  CHECK(alpha_bar(0.1, 1.0) == doctest::Approx(0.09043).epsilon(1e-4));
  for (double eps : {0.05, 0.3, 0.9}) {
    for (double delta : {0.2, 0.7}) {
      CHECK(alpha_bar(delta, delta / eps) == doctest::Approx((e - 1) * eps / (2 - eps)).epsilon(1e-14));
    }
  }
  CHECK(code_of([] { alpha_bar(1.2, 2.0); }) == ErrorCode::Domain);
  CHECK(code_of([] { alpha_bar(0.5, 0.4); }) == ErrorCode::Domain);
}

TEST_CASE("potential bound grows without limit as the small function shrinks") {
  const ValidatedChain c = validate_kernel(oracle::two_state_kernel(0.3, 0.4));
  const auto mino = check_doeblin(c);
  double last = 0.0;
  for (double scale : {1.0, 0.1, 0.01, 0.001}) {
    const double eps = mino->epsilon * scale;
    const double delta = 0.5;
    const DriftCertificateV4 cert = check_v4(c, Vector::Ones(2), delta, delta / eps, Vector::Constant(2, eps), mino->nu);
    const PotentialBound pb = potential_norm_bound(cert);
    CHECK(std::isfinite(pb.computed_norm));
    CHECK(pb.bound > last);
    CHECK(pb.holds);
    last = pb.bound;
  }
}

TEST_CASE("hand-built certificate on the two-state chain") {
  const oracle::Mat P = oracle::two_state_kernel(0.3, 0.4);
  const ValidatedChain c = validate_kernel(P);
  Vector V(2), s(2), nu(2);
  V << 1.0, 2.0;
  nu << 0.5, 0.5;
  const oracle::Mat R = oracle::resolvent_series(P, 1.0, 80);
  // Largest s with R >= s (x) nu.
  s << std::min(R(0, 0), R(0, 1)) / 0.5, std::min(R(1, 0), R(1, 1)) / 0.5;
  s *= 0.999;
  const double delta = 0.2;
  const Vector PV = P * V;
  double b = delta;
  for (int x = 0; x < 2; ++x) b = std::max(b, (PV(x) - (1 - delta) * V(x)) / s(x));
  const DriftCertificateV4 cert = check_v4(c, V, delta, b, s, nu);
  CHECK(cert.slack.minCoeff() >= -1e-14);
  const oracle::Mat U = (oracle::Mat::Identity(2, 2) - (R - s * nu.transpose())).inverse();
  double norm = 0.0;
  for (int x = 0; x < 2; ++x) norm = std::max(norm, U.row(x).cwiseAbs().dot(V) / V(x));
  const PotentialBound pb = potential_norm_bound(cert);
  CHECK(pb.computed_norm == doctest::Approx(norm).epsilon(1e-10));
  CHECK(pb.computed_norm <= pb.bound + 1e-9);
}

TEST_CASE("geometric Lyapunov helper") {
  const Vector v = geometric_lyapunov(4, 2.0);
  CHECK(v(0) == 1.0);
  CHECK(v(3) == 8.0);
}
