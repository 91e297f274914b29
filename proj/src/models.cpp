#include "ergo/models.hpp"

#include <cmath>

#include "ergo/error.hpp"
#include "ergo/spectral.hpp"

namespace ergo {
namespace {

ModelInstance make_instance(std::string name, const Matrix& kernel, const Vector& raw) {
  ValidatedChain chain = validate_kernel(kernel);
  Functional centered = center_functional(Functional(raw), chain);
  return ModelInstance{std::move(name), std::move(chain), raw, std::move(centered)};
}

}  // namespace

ModelInstance two_state(double p, double q, const Vector& F_raw) {
  if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "two-state chain needs p, q in (0, 1)", {{"p", p}, {"q", q}});
  }
  if (F_raw.size() != 2) throw Error(ErrorCode::InvalidArgument, "two-state functional needs two values");
  Matrix P(2, 2);
  P << 1 - p, p, q, 1 - q;
  return make_instance("two-state", P, F_raw);
}

double two_state_lambda(double p, double q, const Vector& F, double a) {
  const double e0 = std::exp(a * F(0));
  const double e1 = std::exp(a * F(1));
  const double tr = e0 * (1 - p) + e1 * (1 - q);
  const double det = e0 * e1 * ((1 - p) * (1 - q) - p * q);
  return 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
}

ModelInstance doeblin_example() {
  constexpr int n = 5;
  Matrix Q = 0.9 * Matrix::Identity(n, n);
  for (int x = 0; x < n; ++x) Q(x, (x + 1) % n) += 0.1;
  const Matrix P = kDoeblinMixture * Matrix::Constant(n, n, 1.0 / n) + (1.0 - kDoeblinMixture) * Q;
  Vector raw(n);
  for (int x = 0; x < n; ++x) raw(x) = x;
  return make_instance("doeblin", P, raw);
}

ModelInstance nonlattice_example() {
  Matrix P(3, 3);
  P << 0.6, 0.3, 0.1, 0.2, 0.6, 0.2, 0.1, 0.3, 0.6;
  Vector raw(3);
  raw << 0.0, 1.0, std::sqrt(2.0);
  return make_instance("three-state-nonlattice", P, raw);
}

ModelInstance iid_example() {
  Vector mu(3);
  mu << 0.2, 0.5, 0.3;
  const Matrix P = Vector::Ones(3) * mu.transpose();
  Vector raw(3);
  raw << 0.0, 1.0, 3.0;
  return make_instance("iid", P, raw);
}

Vector MM1Model::lyapunov() const {
  Vector V(N + 1);
  for (int x = 0; x <= N; ++x) V(x) = std::pow(rho, -0.5 * x);
  return V;
}

Functional MM1Model::functional() const {
  Vector raw = Vector::Ones(N + 1);
  raw(0) = 0.0;
  return center_functional(Functional(raw), chain);
}

MM1Model mm1(double p, int N) {
  if (!(p > 0.0)) throw Error(ErrorCode::InvalidArgument, "arrival probability must be positive", {{"p", p}});
  if (p >= 0.5) throw Error(ErrorCode::UnstableQueue, "queue is not positive recurrent for p >= 1/2", {{"p", p}});
  if (N < 20) throw Error(ErrorCode::InvalidArgument, "truncation level must be at least 20", {{"N", N}});
  const double q = 1.0 - p;
  Matrix P = Matrix::Zero(N + 1, N + 1);
  for (int x = 0; x <= N; ++x) {
    P(x, std::min(x + 1, N)) += p;
    P(x, std::max(x - 1, 0)) += q;
  }
  MM1Model m{p, q, p / q, 1.0 / std::sqrt(4.0 * p * q), 0.0, 1.0 - p / q, N, validate_kernel(P)};
  m.astar = std::log(q * m.betabar + 0.5);
  return m;
}

ModelInstance mm1_instance(double p, int N) {
  const MM1Model m = mm1(p, N);
  Vector raw = Vector::Ones(N + 1);
  raw(0) = 0.0;
  return ModelInstance{"mm1", m.chain, raw, m.functional()};
}

double mm1_return_generating_function(const MM1Model& model, double r) {
  if (r < 0.0 || r > model.betabar * (1.0 + 1e-15)) {
    throw Error(ErrorCode::Domain, "generating function diverges beyond betabar",
                {{"r", r}, {"betabar", model.betabar}});
  }
  const double disc = std::max(0.0, 1.0 - 4.0 * model.p * model.q * r * r);
  return model.q * r + 0.5 * (1.0 - std::sqrt(disc));
}

MM1Lambda mm1_lambda(const MM1Model& model, double a) {
  MM1Lambda out;
  out.a = a;
  if (a >= model.astar) {
    out.r = model.betabar;
    out.Lambda = model.pi0 * a - std::log(model.betabar);
    out.linear_regime = a > model.astar;
  } else {
    const double target = std::exp(a);
    double lo = 0.0, hi = model.betabar;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (mm1_return_generating_function(model, mid) < target ? lo : hi) = mid;
    }
    out.r = 0.5 * (lo + hi);
    out.Lambda = model.pi0 * a - std::log(out.r);
  }
  out.indicator_Lambda = out.Lambda + (1.0 - model.pi0) * a;
  return out;
}

double mm1_lambda_fixed_point(const MM1Model& model, double a) {
  const MM1Lambda l = mm1_lambda(model, a);
  if (l.linear_regime) {
    throw Error(ErrorCode::LinearRegime, "a exceeds astar; Lambda is linear there",
                {{"a", a},
                 {"astar", model.astar},
                 {"Lambda_centered", l.Lambda},
                 {"Lambda_indicator", l.indicator_Lambda}});
  }
  return l.Lambda;
}

TruncatedLambda mm1_truncated_lambda(const MM1Model& model, double a, const Settings& settings) {
  return {log_gpe(model.chain, model.functional(), a, settings), a > model.astar};
}

std::vector<ModelInstance> zoo() {
  std::vector<ModelInstance> out;
  out.push_back(two_state(0.3, 0.4, Vector::Unit(2, 1)));
  ModelInstance sym = two_state(0.3, 0.3, Vector::Unit(2, 1));
  sym.name = "symmetric-two-state";
  out.push_back(std::move(sym));
  out.push_back(nonlattice_example());
  out.push_back(doeblin_example());
  out.push_back(iid_example());
  out.push_back(mm1_instance(0.25, 50));
  return out;
}

}  // namespace ergo
