#include "ergo/drift.hpp"

#include <cmath>
#include <numbers>

#include "ergo/error.hpp"

namespace ergo {

ResolventKernel resolvent(const Matrix& kernel, double theta) {
  if (!(theta > 0.0)) {
    throw Error(ErrorCode::Domain, "resolvent requires theta > 0", {{"theta", theta}});
  }
  if (kernel.rows() != kernel.cols()) {
    throw Error(ErrorCode::InvalidArgument, "kernel must be square");
  }
  const Eigen::Index n = kernel.rows();
  const double q = std::exp(-theta);
  const Matrix a = Matrix::Identity(n, n) - q * kernel;
  ResolventKernel r;
  r.theta = theta;
  r.matrix = (1.0 - q) * a.partialPivLu().solve(Matrix::Identity(n, n));
  return r;
}

ResolventKernel resolvent(const ValidatedChain& chain, double theta) {
  return resolvent(chain.kernel(), theta);
}

DriftCertificateV4 check_v4(const ValidatedChain& chain, const Vector& V, double delta, double b,
                            const Vector& s, const Vector& nu, const Settings& settings) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (V.size() != n || s.size() != n || nu.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "certificate vectors must match the chain size");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "delta must lie in (0, 1)", {{"delta", delta}});
  }
  if ((V.array() < 1.0).any()) throw Error(ErrorCode::InvalidArgument, "V must be >= 1");
  if ((s.array() <= 0.0).any() || (s.array() > 1.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "s must take values in (0, 1]");
  }
  if ((nu.array() < 0.0).any() || std::abs(nu.sum() - 1.0) > settings.input_tol) {
    throw Error(ErrorCode::InvalidArgument, "nu must be a probability vector");
  }
  if (b < delta) {
    throw Error(ErrorCode::Domain, "drift constant b must be at least delta",
                {{"b", b}, {"delta", delta}});
  }

  DriftCertificateV4 cert;
  cert.V = V;
  cert.delta = delta;
  cert.b = b;
  cert.s = s;
  cert.nu = nu;
  const Vector pv = chain.kernel() * V;
  cert.slack = (1.0 - delta) * V + b * s - pv;
  for (Eigen::Index x = 0; x < n; ++x) {
    const double rhs = (1.0 - delta) * V(x) + b * s(x);
    if (cert.slack(x) < -settings.residual_tol * std::max(1.0, rhs)) {
      throw Error(ErrorCode::V4Violation, "drift inequality fails",
                  {{"state", x}, {"kind", "drift"}, {"lhs", pv(x)}, {"rhs", rhs}});
    }
  }

  cert.resolvent = resolvent(chain).matrix;
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const double lhs = cert.resolvent(x, y);
      const double rhs = s(x) * nu(y);
      if (lhs < rhs - settings.residual_tol) {
        throw Error(ErrorCode::V4Violation, "resolvent minorization fails",
                    {{"state", x}, {"target", y}, {"kind", "minorization"}, {"lhs", lhs}, {"rhs", rhs}});
      }
    }
  }
  cert.S_V.resize(chain.size());
  for (std::size_t x = 0; x < chain.size(); ++x) cert.S_V[x] = x;
  return cert;
}

std::optional<DoeblinMinorization> check_doeblin(const ValidatedChain& chain) {
  const Matrix r = resolvent(chain).matrix;
  const Vector column_min = r.colwise().minCoeff().transpose();
  const double eps = column_min.sum();
  if (!(eps > 0.0)) return std::nullopt;
  return DoeblinMinorization{eps, column_min / eps};
}

DriftCertificateV4 doeblin_certificate(const ValidatedChain& chain, double delta) {
  const auto m = check_doeblin(chain);
  if (!m) throw Error(ErrorCode::Domain, "chain is not Doeblin");
  const auto n = static_cast<Eigen::Index>(chain.size());
  return check_v4(chain, Vector::Ones(n), delta, delta / m->epsilon,
                  Vector::Constant(n, m->epsilon), m->nu);
}

double alpha_bar(double delta, double b) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::Domain, "delta must lie in (0, 1)", {{"delta", delta}});
  }
  if (b < delta) throw Error(ErrorCode::Domain, "b must be at least delta", {{"b", b}, {"delta", delta}});
  return (std::numbers::e - 1.0) / (2.0 * b - delta) * delta;
}

double doeblin_alpha_bar(const ValidatedChain& chain) {
  const auto cert = doeblin_certificate(chain);
  return alpha_bar(cert.delta, cert.b);
}

double v_norm(const Matrix& m, const Vector& V) {
  double best = 0.0;
  for (Eigen::Index x = 0; x < m.rows(); ++x) {
    best = std::max(best, m.row(x).cwiseAbs().dot(V) / V(x));
  }
  return best;
}

PotentialBound potential_norm_bound(const DriftCertificateV4& certificate) {
  const Eigen::Index n = certificate.resolvent.rows();
  const Matrix a = Matrix::Identity(n, n) - (certificate.resolvent - certificate.s * certificate.nu.transpose());
  const Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::Numerical, "certificate inconsistent: I - (R - s nu) is singular");
  }
  PotentialBound out;
  out.bound = 2.0 * certificate.b / certificate.delta;
  out.computed_norm = v_norm(lu.inverse(), certificate.V);
  out.holds = out.computed_norm <= out.bound + 1e-9;
  return out;
}

Vector geometric_lyapunov(std::size_t size, double r) {
  Vector v(static_cast<Eigen::Index>(size));
  for (Eigen::Index x = 0; x < v.size(); ++x) v(x) = std::pow(r, static_cast<double>(x));
  return v;
}

}  // namespace ergo
