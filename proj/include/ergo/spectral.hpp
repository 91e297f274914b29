#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

/// exp(alpha F(x)) P(x, y).
struct TwistedKernel {
  Complex alpha{0.0, 0.0};
  CMatrix matrix;
};

TwistedKernel twist(const ValidatedChain& chain, const Functional& f, Complex alpha);

/// Dominant eigen-triple of a twisted kernel, normalized so that
/// mu(1) = mu(f) = 1.
struct SpectralTriple {
  Complex lambda{1.0, 0.0};
  CVector feigen;
  CVector mueigen;
  double gap = 0.0;  // |lambda_2| / |lambda|
  double right_residual = 0.0;
  double left_residual = 0.0;
  int iterations = 0;
  bool used_dense_fallback = false;

  bool is_real() const;
  /// Real parts; only meaningful for real alpha.
  Vector f_real() const { return feigen.real(); }
  Vector mu_real() const { return mueigen.real(); }
};

/// Generalized principal eigenvalue with its eigenfunction and eigenmeasure.
///
/// Power iteration from the all-ones vector, switching to Rayleigh-quotient
/// shifted inverse iteration once lambda has settled. The spectral gap comes
/// from a dense eigenvalue solve, which also serves as the fallback locator
/// when the iteration lands on a non-dominant eigenvalue.
/// Throws GapTooSmall when |lambda_2| / |lambda| > 1 - settings.gap_tol and
/// NonConvergence when the residual never drops below settings.eigen_residual_tol.
SpectralTriple gpe(const TwistedKernel& twisted, const Settings& settings = default_settings());

/// All eigenvalues of the twisted kernel, by decreasing modulus.
std::vector<Complex> twisted_spectrum(const TwistedKernel& twisted);

/// Spectral radius of the twisted kernel.
double spectral_radius(const TwistedKernel& twisted);

/// U_z = [I z - (P_alpha - s0 (x) nu0)]^{-1}.
CMatrix potential_operator(const TwistedKernel& twisted, const CVector& s0, const CVector& nu0,
                           Complex z);

/// Probabilistic twisted chain check P_a(x, y) = P_a-hat(x, y) f(y) / (lambda f(x)).
struct TwistedChain {
  double a = 0.0;
  ValidatedChain kernel;
  Vector pi_a;
  SpectralTriple triple;
};

TwistedChain twisted_chain(const ValidatedChain& chain, const Functional& f, double a,
                           const Settings& settings = default_settings());

/// Lambda(a) = log lambda_a and its derivatives on a grid of real twists.
/// Lambda' is the twisted stationary mean of F, Lambda'' the asymptotic
/// variance of F under the twisted chain, Lambda''' the third cumulant rate
/// of F under the twisted chain.
struct CgfCurve {
  double abar = 0.0;
  std::vector<double> grid;
  std::vector<double> Lambda;
  std::vector<double> dLambda;
  std::vector<double> d2Lambda;
  std::vector<double> d3Lambda;
  /// Hellmann-Feynman derivative mu_a(F f_a), an independent route to Lambda'.
  std::vector<double> dLambda_eigen;
};

CgfCurve cgf_curve(const ValidatedChain& chain, const Functional& f, std::span<const double> grid,
                   double abar, const Settings& settings = default_settings());

/// Evenly spaced grid of `points` values on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, int points);

/// Pointwise cumulant quantities at one real twist.
struct CgfPoint {
  double a = 0.0;
  double Lambda = 0.0;
  double dLambda = 0.0;
  double d2Lambda = 0.0;
  double d3Lambda = 0.0;
  double dLambda_eigen = 0.0;
  Vector feigen;
  Vector mueigen;
  Vector pi_a;
  double gap = 0.0;
};

CgfPoint cgf_point(const ValidatedChain& chain, const Functional& f, double a,
                   bool third_derivative = true, const Settings& settings = default_settings());

/// Lambda(a) alone.
double log_gpe(const ValidatedChain& chain, const Functional& f, double a,
               const Settings& settings = default_settings());

struct MmetDeviation {
  std::vector<double> deviation;  // index n = 0..n_max
  double fitted_rate = 0.0;       // b0 from a least-squares fit of log deviation
  double gap = 0.0;
  int fit_first = 0;
  int fit_last = 0;
};

/// |E_x[exp(alpha S_n - n Lambda(alpha))] - f_alpha(x)| for n = 0..n_max.
MmetDeviation mmet_deviation(const ValidatedChain& chain, const Functional& f, Complex alpha,
                             StateIndex x, int n_max, const Settings& settings = default_settings());

enum class LatticeKind { StronglyNonLattice, Lattice };

struct LatticeStructure {
  LatticeKind kind = LatticeKind::StronglyNonLattice;
  double span = 0.0;    // h
  double offset = 0.0;  // d in [0, h)
  /// Theta(x) in [0, h): F(x) - d - (Theta(y) - Theta(x)) is a multiple of h
  /// along every transition x -> y.
  std::optional<Vector> phase;
  /// Value lattice: every (F(x) - d) / h is an integer. Absent for
  /// almost-lattice functionals.
  std::optional<std::pair<double, double>> values_lattice;
  /// |lambda_{i 2 pi / h}| for a lattice verdict.
  double modulus_at_span = 0.0;
  /// max |lambda_{i omega}| over the verification grid.
  double max_grid_modulus = 0.0;
  bool arithmetic_ambiguous = false;
};

/// Span and offset of a value lattice, or nullopt if F is not lattice.
/// Uses rational reconstruction with denominators up to max_denominator.
std::optional<std::pair<double, double>> value_lattice(const Vector& values, double tol,
                                                       long max_denominator,
                                                       long* largest_denominator = nullptr);
// As above with the settings' tolerances; a reconstruction that needs a
// denominator above lattice_clean_denominator must also pass ambiguous_tol.
std::optional<std::pair<double, double>> value_lattice(const Vector& values, const Settings& settings);

/// Lattice / strongly non-lattice classification, checked two ways:
/// the arithmetic span of F-increments around cycles, and the modulus of
/// lambda_{i omega} on the imaginary axis. Throws Inconsistent when the two
/// verdicts disagree.
LatticeStructure classify_lattice(const ValidatedChain& chain, const Functional& f,
                                  const Settings& settings = default_settings());

/// |lambda_{i omega}| on the grid omega_k = k * omega_max / points, k = 1..points.
std::vector<double> imaginary_axis_moduli(const ValidatedChain& chain, const Functional& f,
                                          double omega_max, int points);

/// Largest omega on a bisection grid over (0, cap] for which the dominant
/// eigenvalue of P_{i omega} stays isolated (gap < 1 - 1e-6).
double estimate_omega_bar(const ValidatedChain& chain, const Functional& f, double cap = 3.0);

}  // namespace ergo
