#include "ergo/poisson.hpp"

#include <cmath>

#include "ergo/error.hpp"

namespace ergo {
namespace {

struct Workspace {
  Matrix z;
  Vector fhat;
};

Workspace prepare(const ValidatedChain& chain, const Functional& f, const Settings& settings) {
  require_ergodic(chain, "poisson");
  require_centered(chain, f, settings);
  Workspace w;
  w.z = fundamental_kernel(chain);
  w.fhat = w.z * f.values();
  w.fhat.array() -= stationary_mean(chain, w.fhat);
  return w;
}

double variance_from_fhat(const ValidatedChain& chain, const Vector& fhat) {
  const Vector pf = chain.kernel() * fhat;
  const double s2 = stationary_mean(chain, fhat.cwiseAbs2()) - stationary_mean(chain, pf.cwiseAbs2());
  return std::max(s2, 0.0);
}

double one_step_variance(const ValidatedChain& chain, const Functional& f, const Vector& fhat) {
  const Matrix& p = chain.kernel();
  const Vector& pi = chain.stationary();
  double acc = 0.0;
  for (Eigen::Index x = 0; x < p.rows(); ++x) {
    double row = 0.0;
    for (Eigen::Index y = 0; y < p.cols(); ++y) {
      const double d = fhat(y) - fhat(x) + f.values()(x);
      row += p(x, y) * d * d;
    }
    acc += pi(x) * row;
  }
  return acc;
}

}  // namespace

Matrix fundamental_kernel(const ValidatedChain& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  const Matrix a = Matrix::Identity(n, n) - chain.kernel() +
                   Vector::Ones(n) * chain.stationary().transpose();
  const Eigen::PartialPivLU<Matrix> lu(a);
  Matrix z = lu.solve(Matrix::Identity(n, n));
  if (!z.allFinite()) throw Error(ErrorCode::Numerical, "fundamental kernel solve failed");
  return z;
}

PoissonSolution solve_poisson(const ValidatedChain& chain, const Functional& f,
                              const Settings& settings) {
  const Workspace w = prepare(chain, f, settings);
  PoissonSolution sol;
  sol.Fhat = w.fhat;
  sol.residual = (chain.kernel() * w.fhat - w.fhat + f.values()).cwiseAbs().maxCoeff();
  sol.normalization = stationary_mean(chain, w.fhat);
  sol.sigma2 = variance_from_fhat(chain, w.fhat);
  sol.degenerate = sol.sigma2 < settings.degenerate_variance;
  return sol;
}

double asymptotic_variance(const ValidatedChain& chain, const Functional& f,
                           const Settings& settings) {
  const Workspace w = prepare(chain, f, settings);
  const double s2 = variance_from_fhat(chain, w.fhat);
  const double alt = one_step_variance(chain, f, w.fhat);
  if (std::abs(s2 - alt) > 1e-10 * std::max(1.0, std::abs(s2))) {
    throw Error(ErrorCode::Numerical, "variance representations disagree",
                {{"formula", s2}, {"one_step", alt}});
  }
  return s2;
}

double asymptotic_variance_one_step(const ValidatedChain& chain, const Functional& f,
                                    const Settings& settings) {
  const Workspace w = prepare(chain, f, settings);
  return one_step_variance(chain, f, w.fhat);
}

double rho3(const ValidatedChain& chain, const Functional& f, const Settings& settings) {
  const Workspace w = prepare(chain, f, settings);
  const double s2 = variance_from_fhat(chain, w.fhat);
  if (s2 < settings.degenerate_variance) {
    throw Error(ErrorCode::DegenerateVariance, "rho3 requires a positive asymptotic variance",
                {{"sigma2", s2}});
  }
  const Matrix pz = chain.kernel() * w.z;
  const Vector& F = f.values();
  const Vector F2c = F.cwiseAbs2().array() - s2;
  const Vector pzF = pz * F;

  const double cubic = stationary_mean(chain, F.cwiseAbs2().cwiseProduct(F));
  const double nested = stationary_mean(chain, F.cwiseProduct(pz * F.cwiseProduct(pzF)));
  const double forward = stationary_mean(chain, F.cwiseProduct(pz * F2c));
  const double backward = stationary_mean(chain, F2c.cwiseProduct(pzF));
  return cubic + 6.0 * nested + 3.0 * forward + 3.0 * backward;
}

CltConstants clt_constants(const ValidatedChain& chain, const Functional& f,
                           const Settings& settings) {
  CltConstants c;
  c.sigma2 = asymptotic_variance(chain, f, settings);
  c.degenerate = c.sigma2 < settings.degenerate_variance;
  if (!c.degenerate) c.rho3 = rho3(chain, f, settings);
  return c;
}

}  // namespace ergo
