#pragma once

#include "ergo/chain.hpp"

namespace ergo {

/// Z = [I - P + 1 (x) pi]^{-1}.
Matrix fundamental_kernel(const ValidatedChain& chain);

struct PoissonSolution {
  Vector Fhat;
  double residual = 0.0;       // ||P Fhat - Fhat + F - pi(F)||_inf
  double normalization = 0.0;  // pi(Fhat)
  double sigma2 = 0.0;
  /// sigma2 below settings.degenerate_variance. F is then a coboundary and
  /// Fhat is the function G with F = G - P G (up to constants).
  bool degenerate = false;
};

/// Fhat = Z F for a centered functional, with pi(Fhat) = 0.
PoissonSolution solve_poisson(const ValidatedChain& chain, const Functional& f,
                              const Settings& settings = default_settings());

/// sigma^2 = pi(Fhat^2) - pi((P Fhat)^2).
/// Cross-checked against asymptotic_variance_one_step(); throws Numerical if
/// the two disagree by more than 1e-10.
double asymptotic_variance(const ValidatedChain& chain, const Functional& f,
                           const Settings& settings = default_settings());

/// E_pi[(Fhat(Phi(1)) - Fhat(Phi(0)) + F(Phi(0)))^2], the one-step martingale
/// increment form of the same constant.
double asymptotic_variance_one_step(const ValidatedChain& chain, const Functional& f,
                                    const Settings& settings = default_settings());

/// Third cumulant rate rho3 = Lambda'''(0) in closed form through Z:
///   pi(F^3) + 6 pi(F PZ(F PZ F)) + 3 pi(F PZ(F^2 - s2)) + 3 pi((F^2 - s2) PZ F).
/// Throws DegenerateVariance when sigma^2 vanishes.
double rho3(const ValidatedChain& chain, const Functional& f,
            const Settings& settings = default_settings());

struct CltConstants {
  double sigma2 = 0.0;
  double rho3 = 0.0;
  bool degenerate = false;
};

CltConstants clt_constants(const ValidatedChain& chain, const Functional& f,
                           const Settings& settings = default_settings());

}  // namespace ergo
