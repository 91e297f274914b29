#pragma once

// Independent reference computations used only by the unit tests. Nothing
// here calls into the library: each oracle is a direct, slow restatement of
// a definition.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat two_state_kernel(double p, double q) {
  Mat P(2, 2);
  P << 1 - p, p, q, 1 - q;
  return P;
}

// pi P = pi, sum pi = 1, by a bordered linear solve.
inline Vec stationary(const Mat& P) {
  const Eigen::Index n = P.rows();
  Mat A = P.transpose() - Mat::Identity(n, n);
  A.row(n - 1).setOnes();
  Vec b = Vec::Zero(n);
  b(n - 1) = 1.0;
  return A.fullPivLu().solve(b);
}

// Larger root of z^2 - tr z + det for the 2x2 matrix diag(e^{aF}) P.
inline double quadratic_lambda(const Mat& P, const Vec& F, double a) {
  const double e0 = std::exp(a * F(0)), e1 = std::exp(a * F(1));
  const double tr = e0 * P(0, 0) + e1 * P(1, 1);
  const double det = e0 * e1 * (P(0, 0) * P(1, 1) - P(0, 1) * P(1, 0));
  return 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
}

// Visits every path x = y0, y1, ..., yn with its probability and the sum
// F(y0) + ... + F(y_{n-1}).
inline void paths(const Mat& P, const Vec& F, int x, int n,
                  const std::function<void(double prob, double sum)>& visit) {
  std::function<void(int, int, double, double)> rec = [&](int y, int left, double prob, double sum) {
    if (left == 0) {
      visit(prob, sum);
      return;
    }
    for (int z = 0; z < P.cols(); ++z) {
      if (P(y, z) > 0.0) rec(z, left - 1, prob * P(y, z), sum + F(y));
    }
  };
  rec(x, n, 1.0, 0.0);
}

inline std::complex<double> path_mgf(const Mat& P, const Vec& F, std::complex<double> alpha, int x, int n) {
  std::complex<double> total = 0.0;
  paths(P, F, x, n, [&](double prob, double sum) { total += prob * std::exp(alpha * sum); });
  return total;
}

// Law of S_n keyed by sum rounded to 1e-9.
inline std::map<long long, double> path_law(const Mat& P, const Vec& F, int x, int n) {
  std::map<long long, double> law;
  paths(P, F, x, n, [&](double prob, double sum) { law[std::llround(sum * 1e9)] += prob; });
  return law;
}

// Law of S_n for integer-valued F by a plain (state, sum) recursion.
struct IntegerLaw {
  long lo = 0;
  std::vector<double> prob;  // prob[k] = P{S_n = lo + k}
  double mean() const {
    double m = 0;
    for (std::size_t k = 0; k < prob.size(); ++k) m += prob[k] * static_cast<double>(lo + static_cast<long>(k));
    return m;
  }
  double variance() const {
    const double m = mean();
    double v = 0;
    for (std::size_t k = 0; k < prob.size(); ++k) {
      const double d = static_cast<double>(lo + static_cast<long>(k)) - m;
      v += prob[k] * d * d;
    }
    return v;
  }
  double tail(double s) const {  // P{S_n >= s}
    double t = 0;
    for (std::size_t k = 0; k < prob.size(); ++k) {
      if (static_cast<double>(lo + static_cast<long>(k)) >= s - 1e-9) t += prob[k];
    }
    return t;
  }
};

inline IntegerLaw integer_law(const Mat& P, const std::vector<int>& F, const Vec& start, int n) {
  const int N = static_cast<int>(P.rows());
  const int fmin = *std::min_element(F.begin(), F.end());
  const int fmax = *std::max_element(F.begin(), F.end());
  const long lo = static_cast<long>(n) * fmin;
  const std::size_t width = static_cast<std::size_t>(n) * static_cast<std::size_t>(fmax - fmin) + 1;
  // cur[y][k]: P{Phi(i) = y, S_i = i fmin + k}, stored against the final offset.
  std::vector<std::vector<double>> cur(static_cast<std::size_t>(N), std::vector<double>(width, 0.0));
  for (int y = 0; y < N; ++y) cur[static_cast<std::size_t>(y)][0] = start(y);
  for (int i = 0; i < n; ++i) {
    std::vector<std::vector<double>> next(static_cast<std::size_t>(N), std::vector<double>(width, 0.0));
    for (int y = 0; y < N; ++y) {
      const int step = F[static_cast<std::size_t>(y)] - fmin;
      for (std::size_t k = 0; k + static_cast<std::size_t>(step) < width; ++k) {
        const double m = cur[static_cast<std::size_t>(y)][k];
        if (m == 0.0) continue;
        for (int z = 0; z < N; ++z) next[static_cast<std::size_t>(z)][k + static_cast<std::size_t>(step)] += m * P(y, z);
      }
    }
    cur.swap(next);
  }
  IntegerLaw law;
  law.lo = lo;
  law.prob.assign(width, 0.0);
  for (int y = 0; y < N; ++y) {
    for (std::size_t k = 0; k < width; ++k) law.prob[k] += cur[static_cast<std::size_t>(y)][k];
  }
  return law;
}

inline Vec point_mass(int n, int x) {
  Vec v = Vec::Zero(n);
  v(x) = 1.0;
  return v;
}

// Pi + sum_{k=0}^{K} (P^k - Pi), stopping once the terms reach the roundoff floor.
inline Mat fundamental_series(const Mat& P, int K) {
  const Eigen::Index n = P.rows();
  const Vec pi = stationary(P);
  const Mat Pi = Vec::Ones(n) * pi.transpose();
  Mat Z = Pi, Pk = Mat::Identity(n, n);
  for (int k = 0; k <= K; ++k) {
    const Mat term = Pk - Pi;
    if (term.cwiseAbs().maxCoeff() < 1e-15) break;
    Z += term;
    Pk = Pk * P;
  }
  return Z;
}

// (1 - e^{-theta}) sum_{k=0}^{K-1} e^{-theta k} P^k
inline Mat resolvent_series(const Mat& P, double theta, int K) {
  const Eigen::Index n = P.rows();
  Mat R = Mat::Zero(n, n), Pk = Mat::Identity(n, n);
  for (int k = 0; k < K; ++k) {
    R += (1.0 - std::exp(-theta)) * std::exp(-theta * k) * Pk;
    Pk = Pk * P;
  }
  return R;
}

// E_x[S_n] - n pi(F) for all x by iterating the kernel.
inline Vec centered_mean_sums(const Mat& P, const Vec& F, int n) {
  const Vec pi = stationary(P);
  const double m = pi.dot(F);
  Vec total = Vec::Zero(P.rows()), g = F.array() - m;
  for (int i = 0; i < n; ++i) {
    total += g;
    g = P * g;
  }
  return total;
}

// rho3 as the stationary lag series with explicit matrix powers:
//   E F0^3 + 3 sum_{i>=1} (E F0^2 Fi + E F0 Fi^2) + 6 sum_{i,j>=1} E F0 Fi F(i+j)
inline double rho3_lags(const Mat& P, const Vec& Fraw, int L) {
  const Eigen::Index n = P.rows();
  const Vec pi = stationary(P);
  const Vec F = Fraw.array() - pi.dot(Fraw);
  std::vector<Mat> powers{Mat::Identity(n, n)};
  for (int k = 1; k <= 2 * L; ++k) powers.push_back(powers.back() * P);
  auto E2 = [&](const Vec& g0, int i, const Vec& gi) { return pi.dot(g0.cwiseProduct(powers[static_cast<std::size_t>(i)] * gi)); };
  const Vec F2 = F.cwiseProduct(F);
  double total = pi.dot(F2.cwiseProduct(F));
  for (int i = 1; i <= L; ++i) total += 3.0 * (E2(F2, i, F) + E2(F, i, F2));
  for (int i = 1; i <= L; ++i) {
    for (int j = 1; j <= L; ++j) {
      const Vec inner = F.cwiseProduct(powers[static_cast<std::size_t>(j)] * F);
      total += 6.0 * E2(F, i, inner);
    }
  }
  return total;
}

// Central differences.
inline double d1(const std::function<double(double)>& g, double a, double h) {
  return (g(a + h) - g(a - h)) / (2 * h);
}
inline double d2(const std::function<double(double)>& g, double a, double h) {
  return (g(a + h) - 2 * g(a) + g(a - h)) / (h * h);
}
inline double d3(const std::function<double(double)>& g, double a, double h) {
  return (g(a + 2 * h) - 2 * g(a + h) + 2 * g(a - h) - g(a - 2 * h)) / (2 * h * h * h);
}

// E_0[r^{tau_0}] for the reflected walk (up p, down q) on {0, ..., N} by a
// tridiagonal (Thomas) solve for h(x) = E_x[r^{tau_0}], x >= 1. Keep N
// moderate for r > 1: the growing homogeneous solution overflows otherwise.
//   h(x) = r (p h(x+1) + q h(x-1)), h(0) = 1, h(N) = r (p h(N) + q h(N-1)).
inline double mm1_return_gf(double p, double r, int N) {
  const double q = 1 - p;
  std::vector<double> sub(N, -r * q), diag(N, 1.0), sup(N, -r * p), rhs(N, 0.0);
  rhs[0] = r * q;
  sub[0] = 0.0;
  diag[N - 1] -= r * p;
  sup[N - 1] = 0.0;
  for (int i = 1; i < N; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> h(N);
  h[N - 1] = rhs[N - 1] / diag[N - 1];
  for (int i = N - 2; i >= 0; --i) h[i] = (rhs[i] - sup[i] * h[i + 1]) / diag[i];
  return r * (q + p * h[0]);
}

}  // namespace oracle
