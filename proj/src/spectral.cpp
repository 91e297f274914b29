#include "ergo/spectral.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>

#include "ergo/error.hpp"
#include "ergo/poisson.hpp"
#include "parallel.hpp"

namespace ergo {
namespace {

double rel_residual(const CMatrix& a, const CVector& v, Complex lambda) {
  const double scale = std::max(std::abs(lambda), 1e-300) * v.cwiseAbs().maxCoeff();
  return (a * v - lambda * v).cwiseAbs().maxCoeff() / scale;
}

Complex rayleigh(const CMatrix& a, const CVector& v) { return v.dot(a * v) / v.squaredNorm(); }

CVector normalized(const CVector& v) { return v / v.cwiseAbs().maxCoeff(); }

struct Eigenpair {
  Complex lambda;
  CVector vec;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Rayleigh-quotient iteration from (lambda, v). Stops when lambda changes by
// less than change_tol and the residual is below stop_residual.
Eigenpair rayleigh_refine(const CMatrix& a, Complex lambda, CVector v, const Settings& settings,
                          int max_steps = 60) {
  const Eigen::Index n = a.rows();
  Eigenpair best{lambda, v, rel_residual(a, v, lambda), 0};
  for (int step = 0; step < max_steps; ++step) {
    const CMatrix shifted = a - lambda * CMatrix::Identity(n, n);
    const CVector y = shifted.partialPivLu().solve(v);
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() == 0.0) break;
    v = normalized(y);
    const Complex next = rayleigh(a, v);
    const double res = rel_residual(a, v, next);
    const double change = std::abs(next - lambda);
    lambda = next;
    ++best.iterations;
    if (res < best.residual) {
      best.lambda = lambda;
      best.vec = v;
      best.residual = res;
    }
    if (change < settings.eigen_change_tol * std::abs(lambda) && res < settings.eigen_stop_residual) {
      break;
    }
  }
  return best;
}

// Inverse iteration with a fixed shift very close to a known eigenvalue.
CVector inverse_iteration(const CMatrix& a, Complex shift, int steps) {
  const Eigen::Index n = a.rows();
  const auto lu = (a - shift * CMatrix::Identity(n, n)).partialPivLu();
  CVector v = CVector::Ones(n);
  for (int i = 0; i < steps; ++i) {
    const CVector y = lu.solve(v);
    if (!y.allFinite()) break;
    v = normalized(y);
  }
  return v;
}

Complex perturbed_shift(Complex lambda) {
  const double eps = 1e-10 * std::max(std::abs(lambda), 1e-300);
  return lambda + Complex(eps, eps);
}

// Diagonal similarity b <- D^{-1} b D with power-of-two entries, so that
// off-diagonal row and column norms are comparable (the LAPACK gebal
// scheme without permutations). Returns D.
Vector balance(CMatrix& b) {
  const Eigen::Index n = b.rows();
  Vector d = Vector::Ones(n);
  bool converged = false;
  for (int sweep = 0; sweep < 1000 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = b.col(i).cwiseAbs().sum() - std::abs(b(i, i));
      const double r = b.row(i).cwiseAbs().sum() - std::abs(b(i, i));
      if (c == 0.0 || r == 0.0) continue;
      double cc = c, rr = r, g = 1.0;
      while (cc < rr / 2.0) { cc *= 2.0; rr /= 2.0; g *= 2.0; }
      while (cc >= rr * 2.0) { cc /= 2.0; rr *= 2.0; g /= 2.0; }
      if (cc + rr < 0.95 * (c + r)) {
        converged = false;
        d(i) *= g;
        b.row(i) /= g;
        b.col(i) *= g;
      }
    }
  }
  return d;
}

std::vector<Complex> dense_spectrum(const CMatrix& m, bool real) {
  const Eigen::Index n = m.rows();
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(n));
  if (real) {
    const Eigen::EigenSolver<Matrix> es(m.real(), false);
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
  } else {
    const Eigen::ComplexEigenSolver<CMatrix> es(m, false);
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
  }
  std::sort(out.begin(), out.end(), [](Complex l, Complex r) { return std::abs(l) > std::abs(r); });
  return out;
}

// Real twist: the kernel is nonnegative, so its Perron vectors can be found
// without cancellation. Lazy power iteration keeps every entry positive and
// brackets the eigenvalue (Collatz-Wielandt); a Doob transform by that vector
// leaves a matrix whose Perron vector is close to 1, which Rayleigh refinement
// then polishes to full relative accuracy in every entry.
struct PerronPair {
  double lambda = 0.0;
  Vector vec;
  int iterations = 0;
};

PerronPair perron_vector(const Matrix& a, const Settings& settings) {
  const Eigen::Index n = a.rows();
  const Eigen::SparseMatrix<double> sp = a.sparseView();
  const double lazy = 0.5 * a.cwiseAbs().rowwise().sum().maxCoeff();

  Vector v = Vector::Ones(n);
  double lo = 0.0, hi = 0.0;
  int iterations = 0;
  const int cap = std::min(settings.max_iterations, 20 * static_cast<int>(n) + 200);
  for (; iterations < cap; ++iterations) {
    const Vector w = sp * v + lazy * v;
    const Vector ratio = w.cwiseQuotient(v);
    lo = ratio.minCoeff();
    hi = ratio.maxCoeff();
    v = w / w.maxCoeff();
    if (!(lo > 0.0) || hi - lo < 1e-9 * hi) break;
  }
  lo -= lazy;
  hi -= lazy;
  // Still far apart: the vector spans many orders of magnitude. For sigma
  // above the spectral radius (sigma I - a)^{-1} is entrywise nonnegative,
  // so shifted inverse iteration keeps v positive and reaches the tail at once.
  for (int step = 0; step < 200 && !(hi - lo < 1e-9 * hi); ++step, ++iterations) {
    const double sigma = hi + std::max(1e-3 * (hi - lo), 1e-12 * hi);
    const Vector w = (sigma * Matrix::Identity(n, n) - a).partialPivLu().solve(v);
    if (!w.allFinite() || !(w.array() > 0.0).all()) break;
    v = w / w.maxCoeff();
    const Vector ratio = (a * v).cwiseQuotient(v);
    lo = ratio.minCoeff();
    hi = ratio.maxCoeff();
  }
  if (v.allFinite() && (v.array() >= 0.0).all() && !(v.array() > 0.0).all()) {
    double smallest = 1.0;
    for (double x : v) {
      if (x > 0.0) smallest = std::min(smallest, x);
    }
    throw Error(ErrorCode::Numerical, "Perron eigenvector underflows the double range",
                {{"states", n}, {"smallest_positive", smallest}});
  }
  if (!(v.array() > 0.0).all() || !v.allFinite()) {
    throw Error(ErrorCode::Numerical, "Perron eigenvector is not positive");
  }

  const CMatrix b = (v.cwiseInverse().asDiagonal() * a * v.asDiagonal()).cast<Complex>();
  const Eigenpair refined = rayleigh_refine(b, Complex(0.5 * (lo + hi), 0.0), CVector::Ones(n), settings);
  if (refined.residual > settings.eigen_residual_tol) {
    throw Error(ErrorCode::NonConvergence, "dominant eigenvector did not converge",
                {{"residual", refined.residual}, {"iterations", iterations + refined.iterations}});
  }
  Vector g = refined.vec.real();
  g /= g.maxCoeff();
  if (!(g.array() > 0.0).all() || refined.lambda.real() <= 0.0) {
    throw Error(ErrorCode::Numerical, "Perron eigenvector is not positive");
  }
  return {refined.lambda.real(), v.cwiseProduct(g), iterations + refined.iterations};
}

SpectralTriple gpe_real(const Matrix& a, const Settings& settings) {
  const PerronPair right = perron_vector(a, settings);
  const PerronPair left = perron_vector(a.transpose(), settings);
  const double lam = right.lambda;

  // Dense spectra of strongly drifting kernels are unreliable (their
  // pseudospectra are large), so the gap is read from a diagonally similar
  // copy that is symmetric whenever the twisted chain is reversible:
  // scale = sqrt(mu f) / f = sqrt(mu / f).
  const Vector scale = (0.5 * (left.vec.array().log() - right.vec.array().log())).exp().max(1e-300).min(1e300);
  const Matrix c = scale.asDiagonal() * a * scale.cwiseInverse().asDiagonal();
  const std::vector<Complex> spectrum = dense_spectrum(c.cast<Complex>(), true);
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < spectrum.size(); ++i) {
    if (std::abs(spectrum[i] - lam) < std::abs(spectrum[nearest] - lam)) nearest = i;
  }
  double second = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (i != nearest) second = std::max(second, std::abs(spectrum[i]));
  }

  SpectralTriple out;
  out.lambda = Complex(lam, 0.0);
  out.gap = second / lam;
  Vector mu = left.vec / left.vec.sum();
  Vector f = right.vec / mu.dot(right.vec);
  out.feigen = f.cast<Complex>();
  out.mueigen = mu.cast<Complex>();
  out.iterations = right.iterations + left.iterations;
  return out;
}

}  // namespace

TwistedKernel twist(const ValidatedChain& chain, const Functional& f, Complex alpha) {
  if (f.size() != chain.size()) {
    throw Error(ErrorCode::InvalidArgument, "functional size does not match chain");
  }
  TwistedKernel t;
  t.alpha = alpha;
  const CVector weight = (alpha * f.values().cast<Complex>()).array().exp();
  t.matrix = weight.asDiagonal() * chain.kernel().cast<Complex>();
  if (alpha == Complex(0.0, 0.0)) t.matrix = chain.kernel().cast<Complex>();
  return t;
}

bool SpectralTriple::is_real() const { return lambda.imag() == 0.0 && feigen.imag().isZero(0.0); }

std::vector<Complex> twisted_spectrum(const TwistedKernel& twisted) {
  CMatrix b = twisted.matrix;
  balance(b);
  return dense_spectrum(b, twisted.alpha.imag() == 0.0);
}

double spectral_radius(const TwistedKernel& twisted) {
  const auto spec = twisted_spectrum(twisted);
  return spec.empty() ? 0.0 : std::abs(spec.front());
}

SpectralTriple gpe(const TwistedKernel& twisted, const Settings& settings) {
  const CMatrix& original = twisted.matrix;
  // Work on a balanced copy; eigenvectors of kernels with strong drift span
  // many orders of magnitude and lose their small entries otherwise.
  CMatrix a = original;
  const Vector d = balance(a);
  const Eigen::Index n = a.rows();
  if (n == 0 || a.cols() != n) throw Error(ErrorCode::InvalidArgument, "twisted kernel must be square");
  const bool real_alpha = twisted.alpha.imag() == 0.0;

  SpectralTriple out;
  if (n == 1) {
    out.lambda = a(0, 0);
    out.feigen = CVector::Ones(1);
    out.mueigen = CVector::Ones(1);
    return out;
  }

  if (real_alpha) {
    out = gpe_real(original.real(), settings);
    if (out.gap > 1.0 - settings.gap_tol) {
      throw Error(ErrorCode::GapTooSmall, "dominant eigenvalue is not isolated",
                  {{"gap", out.gap}, {"alpha_re", twisted.alpha.real()}, {"alpha_im", 0.0}});
    }
    out.right_residual = rel_residual(original, out.feigen, out.lambda);
    out.left_residual = rel_residual(original.transpose(), out.mueigen, out.lambda);
    if (out.left_residual > settings.eigen_residual_tol) {
      throw Error(ErrorCode::NonConvergence, "dominant eigenmeasure did not converge",
                  {{"residual", out.left_residual}});
    }
    return out;
  }

  // Power phase.
  CVector v = CVector::Ones(n);
  Complex lambda = rayleigh(a, v);
  int iterations = 0;
  const int power_cap = std::min(settings.max_iterations, 2000);
  bool power_done = false;
  for (; iterations < power_cap; ++iterations) {
    const CVector w = a * v;
    const double scale = w.cwiseAbs().maxCoeff();
    if (scale == 0.0) break;
    const Complex next = v.dot(w) / v.squaredNorm();
    v = w / scale;
    const double change = std::abs(next - lambda);
    lambda = next;
    if (change < settings.eigen_change_tol * std::abs(lambda) &&
        rel_residual(a, v, lambda) < settings.eigen_stop_residual) {
      power_done = true;
      break;
    }
    if (change < 1e-8 * std::abs(lambda)) break;
  }

  Eigenpair right{lambda, v, rel_residual(a, v, lambda), 0};
  if (!power_done) right = rayleigh_refine(a, lambda, v, settings);
  iterations += right.iterations;

  const std::vector<Complex> spectrum = dense_spectrum(a, real_alpha);
  const double top = std::abs(spectrum.front());
  if (std::abs(right.lambda) < top * (1.0 - 1e-9) || right.residual > settings.eigen_residual_tol) {
    // Landed on a subdominant eigenvalue or stalled: restart from the dense
    // estimate of the dominant one.
    const CVector start = inverse_iteration(a, perturbed_shift(spectrum.front()), 4);
    right = rayleigh_refine(a, rayleigh(a, start), start, settings);
    out.used_dense_fallback = true;
    iterations += right.iterations;
  }
  if (right.residual > settings.eigen_residual_tol) {
    throw Error(ErrorCode::NonConvergence, "dominant eigenvector did not converge",
                {{"residual", right.residual}, {"iterations", iterations}});
  }

  // Gap: drop the computed eigenvalue from the dense spectrum.
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < spectrum.size(); ++i) {
    if (std::abs(spectrum[i] - right.lambda) < std::abs(spectrum[nearest] - right.lambda)) nearest = i;
  }
  double second = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (i != nearest) second = std::max(second, std::abs(spectrum[i]));
  }
  out.gap = second / std::abs(right.lambda);
  if (out.gap > 1.0 - settings.gap_tol) {
    throw Error(ErrorCode::GapTooSmall, "dominant eigenvalue is not isolated",
                {{"gap", out.gap},
                 {"alpha_re", twisted.alpha.real()},
                 {"alpha_im", twisted.alpha.imag()}});
  }

  // Left eigenvector from the transpose with the same eigenvalue.
  const CMatrix at = a.transpose();
  CVector mu = inverse_iteration(at, perturbed_shift(right.lambda), 4);
  CVector f = right.vec;
  Complex lam = right.lambda;
  f = d.cast<Complex>().asDiagonal() * f;
  mu = d.cwiseInverse().cast<Complex>().asDiagonal() * mu;

  const Complex mass = mu.sum();
  if (std::abs(mass) < 1e-300) throw Error(ErrorCode::Numerical, "eigenmeasure has zero total mass");
  mu /= mass;
  const Complex pairing = (mu.array() * f.array()).sum();
  if (std::abs(pairing) < 1e-300) throw Error(ErrorCode::Numerical, "eigenmeasure annihilates eigenfunction");
  f /= pairing;

  if (real_alpha) {
    lam = Complex(lam.real(), 0.0);
    f = f.real().cast<Complex>();
    mu = mu.real().cast<Complex>();
    if ((f.real().array() <= 0.0).any() || lam.real() <= 0.0) {
      throw Error(ErrorCode::Numerical, "Perron eigenvector is not positive");
    }
  }

  out.lambda = lam;
  out.feigen = f;
  out.mueigen = mu;
  out.right_residual = rel_residual(original, f, lam);
  out.left_residual = rel_residual(original.transpose(), mu, lam);
  out.iterations = iterations;
  if (out.left_residual > settings.eigen_residual_tol) {
    throw Error(ErrorCode::NonConvergence, "dominant eigenmeasure did not converge",
                {{"residual", out.left_residual}});
  }
  return out;
}

CMatrix potential_operator(const TwistedKernel& twisted, const CVector& s0, const CVector& nu0,
                           Complex z) {
  const Eigen::Index n = twisted.matrix.rows();
  if (s0.size() != n || nu0.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "s0 and nu0 must match the kernel size");
  }
  const CMatrix m = z * CMatrix::Identity(n, n) - (twisted.matrix - s0 * nu0.transpose());
  const Eigen::FullPivLU<CMatrix> lu(m);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::Numerical, "z lies in the spectrum of the reduced kernel",
                {{"z_re", z.real()}, {"z_im", z.imag()}});
  }
  return lu.inverse();
}

TwistedChain twisted_chain(const ValidatedChain& chain, const Functional& f, double a,
                           const Settings& settings) {
  require_ergodic(chain, "twisted_chain");
  const TwistedKernel t = twist(chain, f, Complex(a, 0.0));
  SpectralTriple triple = gpe(t, settings);
  const Vector fe = triple.f_real();
  const double lambda = triple.lambda.real();
  const auto n = static_cast<Eigen::Index>(chain.size());
  Matrix checked(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      checked(x, y) = t.matrix(x, y).real() * fe(y) / (lambda * fe(x));
    }
  }
  const double row_error = (checked.rowwise().sum().array() - 1.0).abs().maxCoeff();
  if (row_error > 1e-12) {
    throw Error(ErrorCode::Numerical, "twisted chain is not stochastic", {{"row_error", row_error}, {"a", a}});
  }
  ValidatedChain validated = validate_kernel(checked, chain.names(), settings);
  Vector pi_a = validated.stationary();
  return TwistedChain{a, std::move(validated), std::move(pi_a), std::move(triple)};
}

CgfPoint cgf_point(const ValidatedChain& chain, const Functional& f, double a, bool third_derivative,
                   const Settings& settings) {
  const TwistedChain tc = twisted_chain(chain, f, a, settings);
  CgfPoint p;
  p.a = a;
  p.Lambda = std::log(tc.triple.lambda.real());
  p.dLambda = tc.pi_a.dot(f.values());
  p.feigen = tc.triple.f_real();
  p.mueigen = tc.triple.mu_real();
  p.pi_a = tc.pi_a;
  p.gap = tc.triple.gap;
  p.dLambda_eigen = (p.mueigen.array() * f.values().array() * p.feigen.array()).sum();
  const Functional centered = center_functional(f, tc.kernel);
  p.d2Lambda = asymptotic_variance(tc.kernel, centered, settings);
  if (third_derivative) p.d3Lambda = rho3(tc.kernel, centered, settings);
  return p;
}

double log_gpe(const ValidatedChain& chain, const Functional& f, double a, const Settings& settings) {
  return std::log(gpe(twist(chain, f, Complex(a, 0.0)), settings).lambda.real());
}

std::vector<double> linear_grid(double lo, double hi, int points) {
  if (points < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one point");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  }
  return g;
}

CgfCurve cgf_curve(const ValidatedChain& chain, const Functional& f, std::span<const double> grid,
                   double abar, const Settings& settings) {
  require_centered(chain, f, settings);
  for (double a : grid) {
    if (std::abs(a) > abar * (1.0 + 1e-12)) {
      throw Error(ErrorCode::Domain, "grid point outside [-abar, abar]", {{"a", a}, {"abar", abar}});
    }
  }
  CgfCurve curve;
  curve.abar = abar;
  curve.grid.assign(grid.begin(), grid.end());
  const std::size_t m = grid.size();
  std::vector<CgfPoint> points(m);
  detail::parallel_for(m, [&](std::size_t i) { points[i] = cgf_point(chain, f, grid[i], true, settings); });
  for (const auto& p : points) {
    curve.Lambda.push_back(p.Lambda);
    curve.dLambda.push_back(p.dLambda);
    curve.d2Lambda.push_back(p.d2Lambda);
    curve.d3Lambda.push_back(p.d3Lambda);
    curve.dLambda_eigen.push_back(p.dLambda_eigen);
  }
  return curve;
}

MmetDeviation mmet_deviation(const ValidatedChain& chain, const Functional& f, Complex alpha,
                             StateIndex x, int n_max, const Settings& settings) {
  if (x >= chain.size()) throw Error(ErrorCode::InvalidArgument, "start state out of range");
  if (n_max < 0) throw Error(ErrorCode::InvalidArgument, "n_max must be non-negative");
  const TwistedKernel t = twist(chain, f, alpha);
  const SpectralTriple triple = gpe(t, settings);
  MmetDeviation out;
  out.gap = triple.gap;
  out.deviation.reserve(static_cast<std::size_t>(n_max) + 1);
  // w_n = lambda^{-n} P_alpha^n 1, so w_n(x) = E_x[exp(alpha S_n - n Lambda(alpha))].
  CVector w = CVector::Ones(t.matrix.rows());
  const auto xi = static_cast<Eigen::Index>(x);
  for (int n = 0; n <= n_max; ++n) {
    out.deviation.push_back(std::abs(w(xi) - triple.feigen(xi)));
    w = (t.matrix * w) / triple.lambda;
  }

  // The subtraction above bottoms out near 1e-16 |f(x)|, which for slowly
  // rotating subdominant pairs leaves too few periods to fit. The same
  // quantity is lambda^{-n} P_alpha^n (1 - f); iterating that with the f
  // direction projected out keeps full relative precision.
  CVector e = CVector::Ones(t.matrix.rows()) - triple.feigen;
  std::vector<double> residual;
  residual.reserve(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) {
    residual.push_back(std::abs(e(xi)));
    e = (t.matrix * e) / triple.lambda;
    e -= triple.feigen * (triple.mueigen.transpose() * e)(0);
  }
  int last = -1;
  // A rank-one twisted kernel leaves only roundoff after the first step.
  if (n_max >= 1 && residual[1] > 1e-14 * (1.0 + residual[0])) {
    for (int n = 1; n <= n_max; ++n) {
      if (residual[static_cast<std::size_t>(n)] > 1e-280) last = n;
    }
  }
  if (last < 4) {
    out.fitted_rate = std::numeric_limits<double>::infinity();
    return out;
  }
  // Least squares of log(sup_{m >= n} residual_m) on the later half; the
  // running sup flattens the zeros of oscillating terms.
  const int first = std::max(1, last / 2);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, env = 0;
  int count = 0;
  for (int n = last; n >= first; --n) {
    env = std::max(env, residual[static_cast<std::size_t>(n)]);
    const double y = std::log(env);
    sx += n;
    sy += y;
    sxx += static_cast<double>(n) * n;
    sxy += n * y;
    ++count;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  out.fitted_rate = -slope;
  out.fit_first = first;
  out.fit_last = last;
  return out;
}

// ----------------------------------------------------------------------------
// Lattice structure

namespace {

struct ReconstructedGcd {
  double g = 0.0;
  long denominator = 1;
};

// gcd of the reals g and u: find p/q with |u - (p/q) g| small and q bounded,
// after which gcd(g, u) = g / q.
std::optional<ReconstructedGcd> real_gcd(double g, double u, double tol, long max_den) {
  const double scale = std::max(1.0, std::max(std::abs(g), std::abs(u)));
  if (std::abs(u) <= tol * scale) return ReconstructedGcd{g, 1};
  if (std::abs(g) <= tol * scale) return ReconstructedGcd{std::abs(u), 1};
  const double x = u / g;
  double r = x;
  long double h1 = 1, h2 = 0, k1 = 0, k2 = 1;
  for (int iter = 0; iter < 64; ++iter) {
    const double a = std::floor(r);
    const long double h = a * h1 + h2;
    const long double k = a * k1 + k2;
    if (k > static_cast<long double>(max_den)) return std::nullopt;
    if (std::abs(u - static_cast<double>(h / k) * g) <= tol * scale) {
      return ReconstructedGcd{std::abs(g) / static_cast<double>(k), static_cast<long>(k)};
    }
    const double frac = r - a;
    if (frac < 1e-300) return std::nullopt;
    r = 1.0 / frac;
    h2 = h1;
    h1 = h;
    k2 = k1;
    k1 = k;
  }
  return std::nullopt;
}

std::optional<ReconstructedGcd> real_gcd_all(const std::vector<double>& values, double tol, long max_den) {
  ReconstructedGcd acc{0.0, 1};
  for (double u : values) {
    const auto next = real_gcd(acc.g, u, tol, max_den);
    if (!next) return std::nullopt;
    acc.denominator = std::max(acc.denominator, next->denominator);
    acc.g = next->g;
  }
  if (acc.g == 0.0) return std::nullopt;
  return acc;
}

double positive_mod(double v, double h) {
  double r = std::fmod(v, h);
  if (r < 0) r += h;
  if (r >= h) r -= h;
  return r;
}

struct CycleSpan {
  std::optional<ReconstructedGcd> gcd;
  double offset_raw = 0.0;
  Vector potential;  // phi(x) with phi(root) = 0 along the BFS tree
  std::vector<long> depth;
  bool all_zero = false;
};

// Reduces the edge generators (u_e, k_e) of the group spanned by F-sums
// around cycles. Tree edges contribute (0, 0); the integer coordinate of the
// pivot ends at the period (1 for an aperiodic chain), its real coordinate is
// the offset, and the k = 0 remainders generate h Z.
CycleSpan cycle_span(const ValidatedChain& chain, const Functional& f, const Settings& settings) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  const Matrix& p = chain.kernel();
  const Vector& F = f.values();
  CycleSpan cs;
  cs.potential = Vector::Zero(n);
  cs.depth.assign(static_cast<std::size_t>(n), -1);
  std::queue<Eigen::Index> frontier;
  cs.depth[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const Eigen::Index u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (p(u, v) > 0.0 && cs.depth[static_cast<std::size_t>(v)] < 0) {
        cs.depth[static_cast<std::size_t>(v)] = cs.depth[static_cast<std::size_t>(u)] + 1;
        cs.potential(v) = cs.potential(u) + F(u);
        frontier.push(v);
      }
    }
  }

  struct Gen {
    double u;
    long k;
  };
  std::optional<Gen> pivot;
  std::vector<double> remainders;
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      if (!(p(x, y) > 0.0)) continue;
      Gen g{cs.potential(x) + F(x) - cs.potential(y),
            1 + cs.depth[static_cast<std::size_t>(x)] - cs.depth[static_cast<std::size_t>(y)]};
      if (g.k == 0) {
        remainders.push_back(g.u);
        continue;
      }
      if (g.k < 0) g = {-g.u, -g.k};
      if (!pivot) {
        pivot = g;
        continue;
      }
      Gen a = *pivot, b = g;
      while (b.k != 0) {
        const long q = a.k / b.k;
        a = {a.u - static_cast<double>(q) * b.u, a.k - q * b.k};
        std::swap(a, b);
      }
      remainders.push_back(a.k == 0 ? a.u : b.u);
      pivot = a.k != 0 ? a : b;
    }
  }
  cs.offset_raw = pivot ? pivot->u : 0.0;
  const double scale = std::max(1.0, f.bound());
  cs.all_zero = std::all_of(remainders.begin(), remainders.end(),
                            [&](double u) { return std::abs(u) <= settings.lattice_tol * scale; });
  cs.gcd = real_gcd_all(remainders, settings.lattice_tol * scale, settings.lattice_max_denominator);
  return cs;
}

// Checks |lambda_{i omega}| < 1 - margin on omega_k = k omega_max / points,
// skipping omega within `window` of a multiple of `period` (of 0 when period
// is 0).
bool grid_below_margin(const ValidatedChain& chain, const Functional& f, double omega_max, int points,
                       double window, double period, double margin, double& max_mod) {
  max_mod = 0.0;
  bool ok = true;
  for (int k = 1; k <= points; ++k) {
    const double w = omega_max * k / points;
    const double dist = period > 0.0 ? std::abs(w - std::round(w / period) * period) : w;
    if (dist < window) continue;
    const double m = spectral_radius(twist(chain, f, Complex(0.0, w)));
    max_mod = std::max(max_mod, m);
    if (m > 1.0 - margin) ok = false;
  }
  return ok;
}

}  // namespace

std::optional<std::pair<double, double>> value_lattice(const Vector& values, double tol,
                                                       long max_denominator, long* largest_denominator) {
  if (values.size() == 0) return std::nullopt;
  std::vector<double> diffs;
  for (Eigen::Index i = 1; i < values.size(); ++i) diffs.push_back(values(i) - values(0));
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  const auto g = real_gcd_all(diffs, tol * scale, max_denominator);
  if (!g) return std::nullopt;
  if (largest_denominator) *largest_denominator = g->denominator;
  const double h = g->g;
  const double d = positive_mod(values(0), h);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double t = (values(i) - d) / h;
    if (std::abs(t - std::round(t)) * h > tol * scale) return std::nullopt;
  }
  return std::make_pair(h, d);
}

std::optional<std::pair<double, double>> value_lattice(const Vector& values, const Settings& settings) {
  long denominator = 0;
  auto vl = value_lattice(values, settings.lattice_tol, settings.lattice_max_denominator, &denominator);
  if (vl && denominator > settings.lattice_clean_denominator) {
    vl = value_lattice(values, settings.ambiguous_tol, settings.lattice_max_denominator);
  }
  return vl;
}

LatticeStructure classify_lattice(const ValidatedChain& chain, const Functional& f, const Settings& settings) {
  require_ergodic(chain, "classify_lattice");
  require_centered(chain, f, settings);
  const double sigma2 = asymptotic_variance(chain, f, settings);
  if (sigma2 < settings.degenerate_variance) {
    throw Error(ErrorCode::DegenerateVariance, "lattice classification requires sigma^2 > 0",
                {{"sigma2", sigma2}});
  }

  LatticeStructure out;
  const CycleSpan cs = cycle_span(chain, f, settings);
  const double margin = settings.lattice_margin;
  const double window = std::max(0.05, 3.0 * std::sqrt(2.0 * margin / sigma2));
  constexpr double kGridMax = 8.0;
  constexpr int kGridPoints = 100;

  const bool arithmetic_lattice = cs.gcd.has_value();
  out.arithmetic_ambiguous = arithmetic_lattice && cs.gcd->denominator > settings.lattice_clean_denominator;

  if (arithmetic_lattice) {
    const double h = cs.gcd->g;
    const double period = 2.0 * std::numbers::pi / h;
    out.modulus_at_span = spectral_radius(twist(chain, f, Complex(0.0, period)));
    const double unit_tol = out.arithmetic_ambiguous ? settings.ambiguous_tol : settings.lattice_tol;
    const bool unit = std::abs(out.modulus_at_span - 1.0) < unit_tol;
    // An ambiguous span (large reconstruction denominator) is only a
    // candidate; without a unit modulus it defers to the non-lattice check.
    if (unit || !out.arithmetic_ambiguous) {
      double max_mod = 0.0;
      const bool grid_ok = grid_below_margin(chain, f, kGridMax, kGridPoints, window, period, margin, max_mod);
      out.max_grid_modulus = max_mod;
      if (unit && grid_ok) {
        out.kind = LatticeKind::Lattice;
        out.span = h;
        out.offset = positive_mod(cs.offset_raw, h);
        Vector phase(static_cast<Eigen::Index>(chain.size()));
        for (Eigen::Index x = 0; x < phase.size(); ++x) {
          const double depth = static_cast<double>(cs.depth[static_cast<std::size_t>(x)]);
          phase(x) = positive_mod(cs.potential(x) - depth * out.offset, h);
        }
        out.phase = phase;
        out.values_lattice = value_lattice(f.values(), settings);
        return out;
      }
      if (!out.arithmetic_ambiguous) {
        throw Error(ErrorCode::Inconsistent, "arithmetic and spectral lattice verdicts disagree",
                    {{"arithmetic", "lattice"},
                     {"span", h},
                     {"modulus_at_span", out.modulus_at_span},
                     {"max_grid_modulus", max_mod}});
      }
    }
  }

  double max_mod = 0.0;
  const bool grid_ok = grid_below_margin(chain, f, kGridMax, kGridPoints, window, 0.0, margin, max_mod);
  out.max_grid_modulus = max_mod;
  if (!grid_ok) {
    throw Error(ErrorCode::Inconsistent, "arithmetic and spectral lattice verdicts disagree",
                {{"arithmetic", arithmetic_lattice ? "ambiguous" : "non-lattice"},
                 {"max_grid_modulus", max_mod}});
  }
  out.kind = LatticeKind::StronglyNonLattice;
  return out;
}

std::vector<double> imaginary_axis_moduli(const ValidatedChain& chain, const Functional& f, double omega_max,
                                          int points) {
  std::vector<double> out(static_cast<std::size_t>(points));
  detail::parallel_for(out.size(), [&](std::size_t k) {
    const double w = omega_max * static_cast<double>(k + 1) / points;
    out[k] = spectral_radius(twist(chain, f, Complex(0.0, w)));
  });
  return out;
}

double estimate_omega_bar(const ValidatedChain& chain, const Functional& f, double cap) {
  auto isolated = [&](double w) {
    const auto spec = twisted_spectrum(twist(chain, f, Complex(0.0, w)));
    if (spec.size() < 2) return true;
    return std::abs(spec[1]) / std::abs(spec[0]) < 1.0 - 1e-6;
  };
  constexpr int kScan = 64;
  double good = 0.0;
  for (int i = 1; i <= kScan; ++i) {
    const double w = cap * i / kScan;
    if (!isolated(w)) {
      double lo = good, hi = w;
      for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        (isolated(mid) ? lo : hi) = mid;
      }
      return lo;
    }
    good = w;
  }
  return cap;
}

}  // namespace ergo
