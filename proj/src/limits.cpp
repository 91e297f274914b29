#include "ergo/limits.hpp"

#include <cmath>
#include <numbers>

#include "ergo/drift.hpp"
#include "ergo/error.hpp"
#include "ergo/poisson.hpp"

namespace ergo {
namespace {

constexpr double kFirstStep = 1e-5;
constexpr double kSecondStep = 1e-4;

// Newton on a monotone g with a bracketing fallback. g returns (value, slope).
template <typename G>
LegendreSolution monotone_root(G&& g, double c, double lo, double hi, double tol) {
  LegendreSolution out;
  out.c = c;
  double a = std::clamp(0.0, lo, hi);
  for (int it = 0; it < 200; ++it) {
    out.iterations = it + 1;
    const auto [value, slope] = g(a);
    const double r = value - c;
    if (std::abs(r) <= tol) break;
    if (r > 0) {
      hi = a;
    } else {
      lo = a;
    }
    double next = a - r / slope;
    if (!(slope > 0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - a) < 1e-15 * std::max(1.0, std::abs(a))) {
      a = next;
      break;
    }
    a = next;
  }
  out.a = a;
  return out;
}

const std::pair<double, double>& require_value_lattice(const LatticeStructure& ls) {
  if (ls.kind != LatticeKind::Lattice) {
    throw Error(ErrorCode::NonLatticeFunctional, "functional is strongly non-lattice");
  }
  if (!ls.values_lattice) {
    throw Error(ErrorCode::InvalidArgument,
                "almost-lattice functional: the support of S_n depends on the terminal phase",
                {{"span", ls.span}});
  }
  return *ls.values_lattice;
}

LdpEstimate finish(LdpEstimate e, double log_prefactor) {
  e.log_estimate = log_prefactor - e.n * e.rate;
  e.prefactor = std::exp(log_prefactor);
  e.estimate = std::exp(e.log_estimate);
  return e;
}

void require_horizon(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be at least 1", {{"n", n}});
}

}  // namespace

CumulantModel::CumulantModel(ValidatedChain chain, Functional f, std::optional<double> abar,
                             const Settings& settings)
    : chain_(std::move(chain)), f_(std::move(f)), settings_(settings) {
  require_ergodic(chain_, "cumulant model");
  require_centered(chain_, f_, settings_);
  abar_ = abar ? *abar : doeblin_alpha_bar(chain_);
  if (!(abar_ > 0.0)) throw Error(ErrorCode::Domain, "abar must be positive", {{"abar", abar_}});
  lower_ = dLambda(-abar_);
  upper_ = dLambda(abar_);
}

double CumulantModel::Lambda(double a) const { return log_gpe(chain_, f_, a, settings_); }

double CumulantModel::dLambda(double a) const {
  const TwistedChain tc = twisted_chain(chain_, f_, a, settings_);
  return tc.pi_a.dot(f_.values());
}

CgfPoint CumulantModel::point(double a, bool third_derivative) const {
  return cgf_point(chain_, f_, a, third_derivative, settings_);
}

CumulantModel CumulantModel::negated() const {
  return CumulantModel(chain_, Functional(-f_.values()), abar_, settings_);
}

LegendreSolution legendre(const CumulantModel& model, double c) {
  if (!(c > model.lower_limit() && c < model.upper_limit())) {
    throw Error(ErrorCode::OutOfRange, "threshold outside the realizable interval (A', A)",
                {{"c", c}, {"A_lower", model.lower_limit()}, {"A_upper", model.upper_limit()}});
  }
  LegendreSolution s = monotone_root(
      [&](double a) {
        const CgfPoint p = model.point(a);
        return std::pair{p.dLambda, p.d2Lambda};
      },
      c, -model.abar(), model.abar(), 1e-13 * std::max(1.0, std::abs(c)));
  s.rate = s.a * c - model.Lambda(s.a);
  return s;
}

double normal_cdf(double y) { return 0.5 * std::erfc(-y / std::numbers::sqrt2); }

double normal_pdf(double y) { return std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi); }

double EdgeworthApproximation::raw(double y) const {
  const double correction = rho3 / (6.0 * sigma * sigma) * (1.0 - y * y) - Fhat_x;
  return normal_cdf(y) + normal_pdf(y) / (sigma * std::sqrt(static_cast<double>(n))) * correction;
}

EdgeworthValue EdgeworthApproximation::operator()(double y) const {
  const double v = raw(y);
  if (v < 0.0) return {0.0, true};
  if (v > 1.0) return {1.0, true};
  return {v, false};
}

double EdgeworthApproximation::scaled_span() const { return span / (sigma * std::sqrt(static_cast<double>(n))); }

double EdgeworthApproximation::midpoint(long k) const {
  return (n * offset + (static_cast<double>(k) + 0.5) * span) / (sigma * std::sqrt(static_cast<double>(n)));
}

double EdgeworthApproximation::lattice_point(long k) const {
  return (n * offset + static_cast<double>(k) * span) / (sigma * std::sqrt(static_cast<double>(n)));
}

long EdgeworthApproximation::nearest_index(double y) const {
  const double s = y * sigma * std::sqrt(static_cast<double>(n));
  return static_cast<long>(std::llround((s - n * offset) / span));
}

namespace {

EdgeworthApproximation edgeworth_common(const ValidatedChain& chain, const Functional& f, StateIndex x, int n,
                                        const Settings& settings) {
  require_horizon(n);
  if (x >= chain.size()) throw Error(ErrorCode::InvalidArgument, "start state out of range", {{"x", x}});
  const CltConstants k = clt_constants(chain, f, settings);
  if (k.degenerate) {
    throw Error(ErrorCode::DegenerateVariance, "Edgeworth expansion requires sigma^2 > 0", {{"sigma2", k.sigma2}});
  }
  const PoissonSolution ps = solve_poisson(chain, f, settings);
  EdgeworthApproximation e;
  e.x = x;
  e.n = n;
  e.sigma = std::sqrt(k.sigma2);
  e.rho3 = k.rho3;
  e.Fhat_x = ps.Fhat(static_cast<Eigen::Index>(x));
  return e;
}

}  // namespace

EdgeworthApproximation edgeworth_nonlattice(const ValidatedChain& chain, const Functional& f, StateIndex x,
                                            int n, const Settings& settings) {
  EdgeworthApproximation e = edgeworth_common(chain, f, x, n, settings);
  const LatticeStructure ls = classify_lattice(chain, f, settings);
  if (ls.kind == LatticeKind::Lattice) {
    throw Error(ErrorCode::LatticeFunctional, "functional is lattice; use the lattice expansion",
                {{"span", ls.span}});
  }
  e.kind = EdgeworthKind::NonLattice;
  return e;
}

EdgeworthApproximation edgeworth_lattice(const ValidatedChain& chain, const Functional& f, StateIndex x, int n,
                                         const Settings& settings) {
  EdgeworthApproximation e = edgeworth_common(chain, f, x, n, settings);
  const LatticeStructure ls = classify_lattice(chain, f, settings);
  if (ls.kind != LatticeKind::Lattice) {
    throw Error(ErrorCode::NonLatticeFunctional, "functional is strongly non-lattice");
  }
  e.kind = EdgeworthKind::Lattice;
  e.span = ls.span;
  e.offset = ls.values_lattice ? ls.values_lattice->second : ls.offset;
  return e;
}

double mdp_rate(double sigma2, double y) {
  if (!(sigma2 > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "moderate deviations rate requires sigma^2 > 0",
                {{"sigma2", sigma2}});
  }
  return y * y / (2.0 * sigma2);
}

FiniteNCgf::FiniteNCgf(const ValidatedChain& chain, const Functional& f, StateIndex x, int n)
    : chain_(chain), f_(f), x_(x), n_(n) {
  require_horizon(n);
  if (x >= chain.size()) throw Error(ErrorCode::InvalidArgument, "start state out of range", {{"x", x}});
  if (f.size() != chain.size()) throw Error(ErrorCode::InvalidArgument, "functional size does not match chain");
}

double FiniteNCgf::Lambda_n(double a) const {
  return expectation_iterate_log(chain_, f_, Complex(a, 0.0), x_, n_).log_modulus / n_;
}

double FiniteNCgf::dLambda_n(double a) const {
  return (Lambda_n(a + kFirstStep) - Lambda_n(a - kFirstStep)) / (2.0 * kFirstStep);
}

double FiniteNCgf::d2Lambda_n(double a) const {
  return (Lambda_n(a + kSecondStep) - 2.0 * Lambda_n(a) + Lambda_n(a - kSecondStep)) / (kSecondStep * kSecondStep);
}

LegendreSolution FiniteNCgf::solve(double c, double abar) const {
  const double lo = dLambda_n(-abar);
  const double hi = dLambda_n(abar);
  if (!(c > lo && c < hi)) {
    throw Error(ErrorCode::OutOfRange, "threshold outside the finite-n realizable interval",
                {{"c", c}, {"A_lower", lo}, {"A_upper", hi}, {"n", n_}});
  }
  LegendreSolution s = monotone_root(
      [&](double a) { return std::pair{dLambda_n(a), d2Lambda_n(a)}; }, c, -abar, abar,
      1e-10 * std::max(1.0, std::abs(c)));
  s.rate = s.a * c - Lambda_n(s.a);
  return s;
}

double snap_to_support(double c, int n, double span, double offset) {
  const double k = std::floor((n * c - n * offset) / span + 0.5);
  return (n * offset + k * span) / n;
}

LdpEstimate bahadur_rao_nonlattice(const CumulantModel& model, StateIndex x, int n, double c, Tail tail) {
  if (tail == Tail::Lower) {
    LdpEstimate e = bahadur_rao_nonlattice(model.negated(), x, n, -c, Tail::Upper);
    e.c = c;
    return e;
  }
  require_horizon(n);
  if (x >= model.chain().size()) throw Error(ErrorCode::InvalidArgument, "start state out of range", {{"x", x}});
  const LatticeStructure ls = classify_lattice(model.chain(), model.functional(), model.settings());
  if (ls.kind == LatticeKind::Lattice) {
    throw Error(ErrorCode::LatticeFunctional, "functional is lattice; use the lattice estimate",
                {{"span", ls.span}});
  }
  if (!(c > 0.0)) throw Error(ErrorCode::OutOfRange, "upper-tail threshold must be positive", {{"c", c}});
  const LegendreSolution s = legendre(model, c);
  const CgfPoint p = model.point(s.a);
  LdpEstimate e;
  e.n = n;
  e.x = x;
  e.c = c;
  e.a = s.a;
  e.rate = s.rate;
  const double log_pref = std::log(p.feigen(static_cast<Eigen::Index>(x))) - std::log(s.a) -
                          0.5 * std::log(2.0 * std::numbers::pi * n * p.d2Lambda);
  return finish(e, log_pref);
}

LdpEstimate bahadur_rao_lattice(const CumulantModel& model, StateIndex x, int n, double c, Tail tail) {
  if (tail == Tail::Lower) {
    LdpEstimate e = bahadur_rao_lattice(model.negated(), x, n, -c, Tail::Upper);
    e.c = -e.c;
    return e;
  }
  require_horizon(n);
  const LatticeStructure ls = classify_lattice(model.chain(), model.functional(), model.settings());
  const auto [h, d] = require_value_lattice(ls);
  const double cn = snap_to_support(c, n, h, d);
  if (!(cn > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "snapped threshold must be positive", {{"c", c}, {"c_n", cn}});
  }
  const FiniteNCgf cgf(model.chain(), model.functional(), x, n);
  const LegendreSolution s = cgf.solve(cn, model.abar());
  const double d2 = cgf.d2Lambda_n(s.a);
  LdpEstimate e;
  e.n = n;
  e.x = x;
  e.c = cn;
  e.a = s.a;
  e.rate = s.rate;
  const double log_pref =
      std::log(h) - std::log1p(-std::exp(-h * s.a)) - 0.5 * std::log(2.0 * std::numbers::pi * n * d2);
  return finish(e, log_pref);
}

LdpEstimate bahadur_rao_lattice_limit(const CumulantModel& model, StateIndex x, int n, double c, Tail tail) {
  if (tail == Tail::Lower) {
    LdpEstimate e = bahadur_rao_lattice_limit(model.negated(), x, n, -c, Tail::Upper);
    e.c = -e.c;
    return e;
  }
  require_horizon(n);
  if (x >= model.chain().size()) throw Error(ErrorCode::InvalidArgument, "start state out of range", {{"x", x}});
  const LatticeStructure ls = classify_lattice(model.chain(), model.functional(), model.settings());
  const auto [h, d] = require_value_lattice(ls);
  const double cn = snap_to_support(c, n, h, d);
  if (!(cn > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "snapped threshold must be positive", {{"c", c}, {"c_n", cn}});
  }
  const LegendreSolution s = legendre(model, cn);
  const CgfPoint p = model.point(s.a);
  LdpEstimate e;
  e.n = n;
  e.x = x;
  e.c = cn;
  e.a = s.a;
  e.rate = s.rate;
  const double log_pref = std::log(h) + std::log(p.feigen(static_cast<Eigen::Index>(x))) -
                          std::log1p(-std::exp(-h * s.a)) -
                          0.5 * std::log(2.0 * std::numbers::pi * n * p.d2Lambda);
  return finish(e, log_pref);
}

}  // namespace ergo
