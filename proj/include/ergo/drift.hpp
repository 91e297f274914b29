#pragma once

#include <optional>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

/// R_theta = sum_n (1 - e^{-theta}) e^{-theta n} P^n.
struct ResolventKernel {
  Matrix matrix;
  double theta = 1.0;
};

/// Geometric-series solve R_theta = (1 - e^{-theta}) [I - e^{-theta} P]^{-1}.
/// Accepts any square stochastic matrix, including a single absorbing state.
ResolventKernel resolvent(const Matrix& kernel, double theta = 1.0);
ResolventKernel resolvent(const ValidatedChain& chain, double theta = 1.0);

/// Certificate that PV <= (1 - delta) V + b s with R >= s (x) nu.
struct DriftCertificateV4 {
  Vector V;
  double delta = 0.0;
  double b = 0.0;
  Vector s;
  Vector nu;
  Vector slack;                    // (1 - delta) V + b s - P V
  std::vector<StateIndex> S_V;     // {V < infinity}: every state on a finite space
  Matrix resolvent;                // R = R_1 used for the minorization
};

DriftCertificateV4 check_v4(const ValidatedChain& chain, const Vector& V, double delta, double b,
                            const Vector& s, const Vector& nu,
                            const Settings& settings = default_settings());

struct DoeblinMinorization {
  double epsilon = 0.0;
  Vector nu;
};

/// Largest uniform minorization R >= epsilon nu from the column minima of R.
std::optional<DoeblinMinorization> check_doeblin(const ValidatedChain& chain);

/// V = 1, s = epsilon, b = delta / epsilon: the bounded-Lyapunov version of
/// the drift condition satisfied by every Doeblin chain.
DriftCertificateV4 doeblin_certificate(const ValidatedChain& chain, double delta = 0.5);

/// abar = (e - 1) delta / (2 b - delta).
double alpha_bar(double delta, double b);

/// abar of doeblin_certificate(chain); the default real half-width of the
/// spectral domain used by the limit theorems.
double doeblin_alpha_bar(const ValidatedChain& chain);

/// |||M|||_V = sup_x sum_y |M(x, y)| V(y) / V(x).
double v_norm(const Matrix& m, const Vector& V);

struct PotentialBound {
  double bound = 0.0;          // 2 b / delta
  double computed_norm = 0.0;  // |||[I - (R - s (x) nu)]^{-1}|||_V
  bool holds = false;
};

PotentialBound potential_norm_bound(const DriftCertificateV4& certificate);

/// V(x) = r^x, the usual Lyapunov candidate for birth-death chains.
Vector geometric_lyapunov(std::size_t size, double r);

}  // namespace ergo
