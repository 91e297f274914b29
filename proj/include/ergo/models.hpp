#pragma once

#include <string>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

// A chain with a raw functional and its centered version.
struct ModelInstance {
  std::string name;
  ValidatedChain chain;
  Vector raw;
  Functional functional;  // centered
};

// P = [[1 - p, p], [q, 1 - q]].
ModelInstance two_state(double p, double q, const Vector& F_raw);

// Larger root of z^2 - (e^{aF0}(1-p) + e^{aF1}(1-q)) z + e^{a(F0+F1)}((1-p)(1-q) - pq).
double two_state_lambda(double p, double q, const Vector& F, double a);

// Five states, P = 0.3 (1 (x) nu) + 0.7 Q with nu uniform and
// Q = 0.9 I + 0.1 (cyclic shift); F(x) = x.
ModelInstance doeblin_example();
inline constexpr double kDoeblinMixture = 0.3;

// Three states with an irrational value ratio: F = (0, 1, sqrt 2).
ModelInstance nonlattice_example();

// Rows all equal to mu = (0.2, 0.5, 0.3); F = (0, 1, 3).
ModelInstance iid_example();

struct MM1Model {
  double p = 0.0;
  double q = 0.0;
  double rho = 0.0;
  double betabar = 0.0;  // (4 p q)^{-1/2}
  double astar = 0.0;    // log E_0[betabar^tau_0] = log(q betabar + 1/2)
  double pi0 = 0.0;      // 1 - rho on the untruncated queue
  int N = 0;             // states 0..N
  ValidatedChain chain;

  // V(x) = rho^{-x/2}
  Vector lyapunov() const;
  // I_{x != 0} - pi(0^c), centered on the truncated chain.
  Functional functional() const;
};

// Reflected random walk P(x, x+1) = p, P(x, (x-1)_+) = q on {0..N}; the
// up-step mass at N stays at N. Throws UnstableQueue for p >= 1/2.
MM1Model mm1(double p, int N);

ModelInstance mm1_instance(double p, int N);

// E_0[r^tau_0] = q r + (1 - sqrt(1 - 4 p q r^2)) / 2 for 0 <= r <= betabar.
double mm1_return_generating_function(const MM1Model& model, double r);

struct MM1Lambda {
  double a = 0.0;
  double Lambda = 0.0;           // for the centered functional
  double indicator_Lambda = 0.0;  // for I_{x != 0} itself: Lambda + (1 - pi0) a
  bool linear_regime = false;     // a > astar
  double r = 0.0;                 // exp(pi0 a - Lambda)
};

// Solves E_0[exp((pi0 a - Lambda) tau_0)] = e^a by bisection in r. For
// a >= astar returns the closed form pi0 a - log betabar (indicator:
// a - log betabar) and sets linear_regime when a > astar.
MM1Lambda mm1_lambda(const MM1Model& model, double a);

// As mm1_lambda, but a > astar throws LinearRegime with the closed form in
// the error detail.
double mm1_lambda_fixed_point(const MM1Model& model, double a);

struct TruncatedLambda {
  double Lambda = 0.0;
  // Set for a > astar: the value is governed by the truncation boundary and
  // has no meaning for the untruncated queue.
  bool truncation_dominated = false;
};

TruncatedLambda mm1_truncated_lambda(const MM1Model& model, double a, const Settings& settings = default_settings());

// Two-state, symmetric two-state, three-state non-lattice, Doeblin, i.i.d.
// and M/M/1 (p = 0.25, N = 50).
std::vector<ModelInstance> zoo();

}  // namespace ergo
