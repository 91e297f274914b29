#pragma once

#include <map>

#include "ergo/chain.hpp"

namespace ergo::reference {

// Brute-force routes used by the reproduce targets to cross-check the main
// algorithms. Exponential or truncated; only for small inputs.

// E_x[exp(alpha S_n)] as a sum over all N^n paths.
Complex path_sum_mgf(const ValidatedChain& chain, const Functional& f, Complex alpha, StateIndex x, int n);

// Law of S_n over all N^n paths, keyed by round((S_n - n d) / h).
std::map<long, double> path_sum_law(const ValidatedChain& chain, const Functional& f, StateIndex x, int n,
                                    double span, double offset);

// rho3 as the lag series
//   E[F^3] + 3 sum_{i != 0} E[F^2(0) F(i)] + 6 sum_{i,j >= 1} E[F(0) F(i) F(i+j)]
// truncated once terms fall below tol.
double rho3_series(const ValidatedChain& chain, const Functional& f, double tol = 1e-14, int max_lag = 100000);

// Pi + sum_{k=0}^{lags} (P^k - Pi)
Matrix fundamental_kernel_series(const ValidatedChain& chain, int lags);

}  // namespace ergo::reference
