#pragma once

#include <optional>

#include "ergo/chain.hpp"
#include "ergo/spectral.hpp"

namespace ergo {

// Chain, centered functional and the real half-width abar of the domain on
// which Lambda is evaluated. abar defaults to the Doeblin value.
class CumulantModel {
 public:
  CumulantModel(ValidatedChain chain, Functional f, std::optional<double> abar = std::nullopt,
                const Settings& settings = default_settings());

  const ValidatedChain& chain() const noexcept { return chain_; }
  const Functional& functional() const noexcept { return f_; }
  double abar() const noexcept { return abar_; }
  const Settings& settings() const noexcept { return settings_; }

  double Lambda(double a) const;
  double dLambda(double a) const;
  CgfPoint point(double a, bool third_derivative = false) const;

  // (A', A) = (Lambda'(-abar), Lambda'(abar)).
  double lower_limit() const noexcept { return lower_; }
  double upper_limit() const noexcept { return upper_; }

  // The same model for -F, used for lower tails.
  CumulantModel negated() const;

 private:
  ValidatedChain chain_;
  Functional f_;
  double abar_ = 0.0;
  Settings settings_;
  double lower_ = 0.0;
  double upper_ = 0.0;
};

struct LegendreSolution {
  double c = 0.0;
  double a = 0.0;
  double rate = 0.0;  // Lambda*(c) = a c - Lambda(a)
  int iterations = 0;
};

// Solves Lambda'(a) = c by Newton steps safeguarded with bisection on
// [-abar, abar]. Throws OutOfRange outside the open interval (A', A).
LegendreSolution legendre(const CumulantModel& model, double c);

enum class EdgeworthKind { NonLattice, Lattice };

struct EdgeworthValue {
  double value = 0.0;
  bool clamped = false;
};

// G(y) + gamma(y) / (sigma sqrt n) [rho3 / (6 sigma^2) (1 - y^2) - Fhat(x)]
// for the law of S_n / (sigma sqrt n) under P_x.
struct EdgeworthApproximation {
  StateIndex x = 0;
  int n = 1;
  double sigma = 1.0;
  double rho3 = 0.0;
  double Fhat_x = 0.0;
  EdgeworthKind kind = EdgeworthKind::NonLattice;
  double span = 0.0;    // h
  double offset = 0.0;  // d, with S_n in n d + h Z

  double raw(double y) const;
  EdgeworthValue operator()(double y) const;

  // h_n = h / (sigma sqrt n)
  double scaled_span() const;
  // Standardized midpoint (n d + (k + 1/2) h) / (sigma sqrt n) and lattice
  // point (n d + k h) / (sigma sqrt n) of the support of S_n.
  double midpoint(long k) const;
  double lattice_point(long k) const;
  // Index k of the support point n d + k h nearest to sigma sqrt(n) y.
  long nearest_index(double y) const;
};

double normal_cdf(double y);
double normal_pdf(double y);

EdgeworthApproximation edgeworth_nonlattice(const ValidatedChain& chain, const Functional& f, StateIndex x,
                                            int n, const Settings& settings = default_settings());

EdgeworthApproximation edgeworth_lattice(const ValidatedChain& chain, const Functional& f, StateIndex x,
                                         int n, const Settings& settings = default_settings());

// y^2 / (2 sigma^2)
double mdp_rate(double sigma2, double y);

// Lambda_n(a) = (1/n) log E_x[exp(a S_n)] computed exactly.
class FiniteNCgf {
 public:
  FiniteNCgf(const ValidatedChain& chain, const Functional& f, StateIndex x, int n);

  double Lambda_n(double a) const;
  double dLambda_n(double a) const;   // central difference, step 1e-5
  double d2Lambda_n(double a) const;  // central difference, step 1e-4
  int n() const noexcept { return n_; }
  StateIndex x() const noexcept { return x_; }

  // a_n with Lambda_n'(a_n) = c, searched on [-abar, abar].
  LegendreSolution solve(double c, double abar) const;

 private:
  ValidatedChain chain_;
  Functional f_;
  StateIndex x_;
  int n_;
};

enum class Tail { Upper, Lower };

struct LdpEstimate {
  int n = 0;
  StateIndex x = 0;
  double c = 0.0;       // threshold actually used (c_n for the lattice form)
  double a = 0.0;
  double rate = 0.0;
  double prefactor = 0.0;
  double estimate = 0.0;      // prefactor * exp(-n rate); may underflow
  double log_estimate = 0.0;  // log prefactor - n rate
};

// f_a(x) / (a sqrt(2 pi n Lambda''(a))) exp(-n Lambda*(c)), approximating
// P_x{S_n >= n c}; for Tail::Lower, P_x{S_n <= n c} through -F.
LdpEstimate bahadur_rao_nonlattice(const CumulantModel& model, StateIndex x, int n, double c,
                                   Tail tail = Tail::Upper);

// h / ((1 - exp(-h a_n)) sqrt(2 pi n Lambda_n''(a_n))) exp(-n Lambda_n*(c_n))
// with finite-n quantities and c_n snapped to the support of S_n / n
// (nearest point, ties upward).
LdpEstimate bahadur_rao_lattice(const CumulantModel& model, StateIndex x, int n, double c,
                                Tail tail = Tail::Upper);

// h f_a(x) / ((1 - exp(-h a)) sqrt(2 pi n Lambda''(a))) exp(-n Lambda*(c)) at
// the snapped c_n.
LdpEstimate bahadur_rao_lattice_limit(const CumulantModel& model, StateIndex x, int n, double c,
                                      Tail tail = Tail::Upper);

// c_n for a value-lattice functional: the support point of S_n / n nearest
// to c, ties toward +infinity.
double snap_to_support(double c, int n, double span, double offset);

}  // namespace ergo
