#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ergo/types.hpp"

namespace ergo {

/// Row-stochastic kernel on a finite state space together with its
/// stationary law and a graph-theoretic structure certificate.
/// Instances are only produced by validate_kernel() and never change.
class ValidatedChain {
 public:
  std::size_t size() const noexcept { return static_cast<std::size_t>(kernel_.rows()); }
  const Matrix& kernel() const noexcept { return kernel_; }
  const Vector& stationary() const noexcept { return stationary_; }
  int period() const noexcept { return period_; }
  bool irreducible() const noexcept { return irreducible_; }
  bool aperiodic() const noexcept { return irreducible_ && period_ == 1; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  double stationary_residual() const noexcept { return stationary_residual_; }

  std::optional<StateIndex> index_of(std::string_view name) const;

 private:
  ValidatedChain() = default;
  friend ValidatedChain validate_kernel(const Matrix& raw, std::vector<std::string> names,
                                        const Settings& settings);

  Matrix kernel_;
  Vector stationary_;
  int period_ = 1;
  bool irreducible_ = false;
  double stationary_residual_ = 0.0;
  std::vector<std::string> names_;
};

/// Checks a raw kernel and builds the certificate.
///
/// Throws RowSum when a row deviates from 1 by more than settings.input_tol,
/// NegativeEntry on a negative entry and Reducible when more than one closed
/// communicating class exists (so the stationary law is not unique).
/// The stationary law solves (P^T - I) pi = 0 with one row replaced by the
/// normalization constraint.
ValidatedChain validate_kernel(const Matrix& raw, std::vector<std::string> names = {},
                               const Settings& settings = default_settings());

/// Throws unless the chain is irreducible and aperiodic.
void require_ergodic(const ValidatedChain& chain, std::string_view operation);

/// Real-valued function on the state space.
class Functional {
 public:
  explicit Functional(Vector values);

  const Vector& values() const noexcept { return values_; }
  double bound() const noexcept { return bound_; }
  /// Mean subtracted by center_functional (0 for a raw functional).
  double removed_mean() const noexcept { return removed_mean_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](StateIndex x) const { return values_(static_cast<Eigen::Index>(x)); }

 private:
  Functional(Vector values, double removed_mean);
  friend Functional center_functional(const Functional& f, const ValidatedChain& chain);

  Vector values_;
  double bound_ = 0.0;
  double removed_mean_ = 0.0;
};

/// pi(g)
double stationary_mean(const ValidatedChain& chain, const Vector& g);

/// Returns F - pi(F) 1 and records pi(F).
Functional center_functional(const Functional& f, const ValidatedChain& chain);

/// Throws InvalidArgument unless |pi(F)| is below settings.residual_tol
/// (scaled by max(1, ||F||)).
void require_centered(const ValidatedChain& chain, const Functional& f,
                      const Settings& settings = default_settings());

/// A complex number held as log-modulus and phase so that E_x[exp(alpha S_n)]
/// can be represented for horizons where the modulus over/underflows.
struct LogComplex {
  double log_modulus = 0.0;
  double phase = 0.0;

  Complex value() const;
};

/// m_n(alpha) = E_x[exp(alpha S_n)] for every start state x, computed exactly
/// as n applications of the twisted kernel exp(alpha F(x)) P(x, y) to the
/// all-ones vector, renormalizing after each step.
std::vector<LogComplex> expectation_iterate_all(const ValidatedChain& chain, const Functional& f,
                                                Complex alpha, int n);

LogComplex expectation_iterate_log(const ValidatedChain& chain, const Functional& f, Complex alpha,
                                   StateIndex x, int n);

/// Convenience form of expectation_iterate_log(); may overflow for large n.
Complex expectation_iterate(const ValidatedChain& chain, const Functional& f, Complex alpha,
                            StateIndex x, int n);

}  // namespace ergo
