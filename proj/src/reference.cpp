#include "ergo/reference.hpp"

#include <cmath>

#include "ergo/error.hpp"

namespace ergo::reference {
namespace {

template <typename Visit>
void for_each_path(const ValidatedChain& chain, StateIndex x, int n, Visit&& visit) {
  const std::size_t N = chain.size();
  if (std::pow(static_cast<double>(N), n) > 5e7) {
    throw Error(ErrorCode::BudgetExceeded, "too many paths to enumerate", {{"N", N}, {"n", n}});
  }
  const Matrix& P = chain.kernel();
  std::vector<std::size_t> path(static_cast<std::size_t>(n) + 1, 0);
  path[0] = x;
  // Odometer over steps 1..n.
  while (true) {
    double prob = 1.0;
    for (int i = 0; i < n; ++i) {
      prob *= P(static_cast<Eigen::Index>(path[i]), static_cast<Eigen::Index>(path[i + 1]));
    }
    visit(path, prob);
    int i = n;
    while (i >= 1 && path[static_cast<std::size_t>(i)] + 1 == N) path[static_cast<std::size_t>(i--)] = 0;
    if (i < 1) break;
    ++path[static_cast<std::size_t>(i)];
  }
}

}  // namespace

Complex path_sum_mgf(const ValidatedChain& chain, const Functional& f, Complex alpha, StateIndex x, int n) {
  Complex total = 0.0;
  for_each_path(chain, x, n, [&](const std::vector<std::size_t>& path, double prob) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += f[path[static_cast<std::size_t>(i)]];
    total += prob * std::exp(alpha * s);
  });
  return total;
}

std::map<long, double> path_sum_law(const ValidatedChain& chain, const Functional& f, StateIndex x, int n,
                                    double span, double offset) {
  std::map<long, double> law;
  for_each_path(chain, x, n, [&](const std::vector<std::size_t>& path, double prob) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += f[path[static_cast<std::size_t>(i)]];
    if (prob > 0.0) law[std::lround((s - n * offset) / span)] += prob;
  });
  return law;
}

double rho3_series(const ValidatedChain& chain, const Functional& f, double tol, int max_lag) {
  const Matrix& P = chain.kernel();
  const Vector& pi = chain.stationary();
  const Vector F = f.values();
  const Vector F2 = F.array().square();

  double total = pi.dot(F2.cwiseProduct(F));
  // pi(F) = 0, so every term below is a correlation of something with a
  // quantity converging to its mean; stop once that distance is below tol.
  // Two-point terms: i > 0 gives pi(F^2 P^i F), i < 0 gives pi(F P^i F^2).
  const double mean_f2 = pi.dot(F2);
  Vector u = F, w = F2;
  for (int i = 1; i <= max_lag; ++i) {
    u = P * u;
    w = P * w;
    total += 3.0 * (pi.dot(F2.cwiseProduct(u)) + pi.dot(F.cwiseProduct(w)));
    if (u.cwiseAbs().maxCoeff() < tol && (w.array() - mean_f2).abs().maxCoeff() < tol) break;
  }
  // Three-point terms: sum_{i >= 1} pi(F P^i (F G)) with G = sum_{j >= 1} P^j F.
  Vector G = Vector::Zero(F.size());
  u = F;
  for (int j = 1; j <= max_lag; ++j) {
    u = P * u;
    G += u;
    if (u.cwiseAbs().maxCoeff() < tol) break;
  }
  Vector v = F.cwiseProduct(G);
  const double mean_v = pi.dot(v);
  for (int i = 1; i <= max_lag; ++i) {
    v = P * v;
    total += 6.0 * pi.dot(F.cwiseProduct(v));
    if ((v.array() - mean_v).abs().maxCoeff() < tol) break;
  }
  return total;
}

Matrix fundamental_kernel_series(const ValidatedChain& chain, int lags) {
  const auto N = static_cast<Eigen::Index>(chain.size());
  const Matrix Pi = Vector::Ones(N) * chain.stationary().transpose();
  Matrix Z = Pi;
  Matrix Pk = Matrix::Identity(N, N);
  for (int k = 0; k <= lags; ++k) {
    Z += Pk - Pi;
    Pk = Pk * chain.kernel();
  }
  return Z;
}

}  // namespace ergo::reference
