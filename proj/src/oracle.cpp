#include "ergo/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ergo/error.hpp"
#include "ergo/spectral.hpp"
#include "parallel.hpp"

namespace ergo {
namespace {

struct LatticeCoordinates {
  double span;
  double offset;
  std::vector<long> k;  // F(x) = offset + k[x] span
};

LatticeCoordinates lattice_coordinates(const Functional& f, const Settings& settings) {
  const auto vl = value_lattice(f.values(), settings);
  if (!vl) throw Error(ErrorCode::NonLatticeFunctional, "exact law needs a value-lattice functional");
  LatticeCoordinates lc{vl->first, vl->second, {}};
  for (Eigen::Index i = 0; i < f.values().size(); ++i) {
    lc.k.push_back(std::lround((f.values()(i) - lc.offset) / lc.span));
  }
  return lc;
}

ExactSumDistribution run_dp(const ValidatedChain& chain, const Functional& f, const Vector& initial, int n,
                            const Settings& settings) {
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "horizon must be non-negative", {{"n", n}});
  if (f.size() != chain.size()) throw Error(ErrorCode::InvalidArgument, "functional size does not match chain");
  const LatticeCoordinates lc = lattice_coordinates(f, settings);
  const auto N = static_cast<Eigen::Index>(chain.size());
  const long kmin = *std::min_element(lc.k.begin(), lc.k.end());
  const long kmax = *std::max_element(lc.k.begin(), lc.k.end());
  const long width = static_cast<long>(n) * (kmax - kmin) + 1;
  const double cells = static_cast<double>(n) * static_cast<double>(N) * static_cast<double>(width);
  if (cells > static_cast<double>(settings.dp_cell_budget)) {
    throw Error(ErrorCode::BudgetExceeded, "dynamic program exceeds the cell budget",
                {{"required_cells", cells}, {"budget", settings.dp_cell_budget}});
  }

  const Matrix& p = chain.kernel();
  // Column j holds K = n kmin + j. Each step moves right by k[x] - kmin >= 0.
  Matrix cur = Matrix::Zero(N, width);
  const long base = static_cast<long>(n) * kmin;
  cur.col(0) = initial;
  Matrix next(N, width);
  for (int step = 0; step < n; ++step) {
    next.setZero();
    const long used = static_cast<long>(step) * (kmax - kmin) + 1;
    for (Eigen::Index s = 0; s < N; ++s) {
      const long shift = lc.k[static_cast<std::size_t>(s)] - kmin;
      for (Eigen::Index t = 0; t < N; ++t) {
        const double w = p(s, t);
        if (w == 0.0) continue;
        next.row(t).segment(shift, used) += w * cur.row(s).segment(0, used);
      }
    }
    std::swap(cur, next);
  }

  ExactSumDistribution out;
  out.n = n;
  out.span = lc.span;
  out.offset = lc.offset;
  out.k_min = base;
  out.joint = std::move(cur);
  out.marginal = out.joint.colwise().sum().transpose();
  return out;
}

}  // namespace

double ExactSumDistribution::probability(long k) const {
  if (k < k_min || k > k_max()) return 0.0;
  return marginal(static_cast<Eigen::Index>(k - k_min));
}

double ExactSumDistribution::mass() const { return marginal.sum(); }

double ExactSumDistribution::mean() const {
  double m = 0.0;
  for (Eigen::Index j = 0; j < marginal.size(); ++j) m += marginal(j) * value(k_min + j);
  return m;
}

double ExactSumDistribution::variance() const {
  const double mu = mean();
  double v = 0.0;
  for (Eigen::Index j = 0; j < marginal.size(); ++j) {
    const double d = value(k_min + j) - mu;
    v += marginal(j) * d * d;
  }
  return v;
}

namespace {

// Relative slack for comparing support points against thresholds.
double support_slack(const ExactSumDistribution& d) { return 1e-9 * d.span; }

}  // namespace

double ExactSumDistribution::cdf(double s) const {
  double total = 0.0;
  for (Eigen::Index j = 0; j < marginal.size(); ++j) {
    if (value(k_min + j) <= s + support_slack(*this)) total += marginal(j);
  }
  return total;
}

double ExactSumDistribution::cdf_left(double s) const {
  double total = 0.0;
  for (Eigen::Index j = 0; j < marginal.size(); ++j) {
    if (value(k_min + j) < s - support_slack(*this)) total += marginal(j);
  }
  return total;
}

double ExactSumDistribution::tail(double s) const {
  double total = 0.0;
  for (Eigen::Index j = 0; j < marginal.size(); ++j) {
    if (value(k_min + j) >= s - support_slack(*this)) total += marginal(j);
  }
  return total;
}

ExactSumDistribution exact_sum_distribution(const ValidatedChain& chain, const Functional& f, StateIndex x, int n,
                                            const Settings& settings) {
  if (x >= chain.size()) throw Error(ErrorCode::InvalidArgument, "start state out of range", {{"x", x}});
  Vector initial = Vector::Zero(static_cast<Eigen::Index>(chain.size()));
  initial(static_cast<Eigen::Index>(x)) = 1.0;
  ExactSumDistribution d = run_dp(chain, f, initial, n, settings);
  d.x = x;
  return d;
}

ExactSumDistribution exact_sum_distribution(const ValidatedChain& chain, const Functional& f,
                                            const Vector& initial, int n, const Settings& settings) {
  if (initial.size() != static_cast<Eigen::Index>(chain.size()) || (initial.array() < 0.0).any() ||
      std::abs(initial.sum() - 1.0) > settings.input_tol) {
    throw Error(ErrorCode::InvalidArgument, "initial law must be a probability vector on the states");
  }
  return run_dp(chain, f, initial, n, settings);
}

double exact_tail(const ValidatedChain& chain, const Functional& f, StateIndex x, int n, double c,
                  const Settings& settings) {
  return exact_sum_distribution(chain, f, x, n, settings).tail(n * c);
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

double uniform_draw(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ path) ^ step);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

McSample simulate_paths(const ValidatedChain& chain, const Functional& f, StateIndex x, int n, std::size_t m,
                        std::uint64_t seed, std::optional<double> tilt, const Settings& settings) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "path count must be positive");
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "horizon must be non-negative", {{"n", n}});
  if (x >= chain.size()) throw Error(ErrorCode::InvalidArgument, "start state out of range", {{"x", x}});
  if (f.size() != chain.size()) throw Error(ErrorCode::InvalidArgument, "functional size does not match chain");

  const auto N = static_cast<Eigen::Index>(chain.size());
  Matrix kernel = chain.kernel();
  Vector log_f = Vector::Zero(N);
  double log_lambda = 0.0;
  if (tilt) {
    const TwistedChain tc = twisted_chain(chain, f, *tilt, settings);
    kernel = tc.kernel.kernel();
    log_f = tc.triple.f_real().array().log();
    log_lambda = std::log(tc.triple.lambda.real());
  }
  Matrix cumulative(N, N);
  for (Eigen::Index r = 0; r < N; ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < N; ++c) {
      acc += kernel(r, c);
      cumulative(r, c) = acc;
    }
    cumulative(r, N - 1) = std::numeric_limits<double>::infinity();
  }
  // Last state reachable with positive probability from each row, so that a
  // draw landing in a rounding gap never selects a zero-probability move.
  std::vector<Eigen::Index> last_positive(static_cast<std::size_t>(N));
  for (Eigen::Index r = 0; r < N; ++r) {
    Eigen::Index last = 0;
    for (Eigen::Index c = 0; c < N; ++c) {
      if (kernel(r, c) > 0.0) last = c;
    }
    last_positive[static_cast<std::size_t>(r)] = last;
  }

  McSample out;
  out.seed = seed;
  out.n = n;
  out.x = x;
  out.tilt = tilt;
  out.values.resize(m);
  if (tilt) out.log_weights.resize(m);
  const Vector& F = f.values();

  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (m + kBlock - 1) / kBlock;
  detail::parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(m, (b + 1) * kBlock);
    for (std::size_t path = b * kBlock; path < end; ++path) {
      auto state = static_cast<Eigen::Index>(x);
      double s = 0.0;
      for (int step = 0; step < n; ++step) {
        s += F(state);
        const double u = uniform_draw(seed, path, static_cast<std::uint64_t>(step));
        Eigen::Index next = 0;
        while (u >= cumulative(state, next)) ++next;
        if (kernel(state, next) == 0.0) next = last_positive[static_cast<std::size_t>(state)];
        state = next;
      }
      out.values[path] = s;
      if (tilt) {
        out.log_weights[path] =
            n * log_lambda + log_f(static_cast<Eigen::Index>(x)) - log_f(state) - *tilt * s;
      }
    }
  });
  return out;
}

TailEstimate tail_estimate(const McSample& sample, double threshold) {
  const std::size_t m = sample.values.size();
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "empty sample");
  const bool weighted = sample.tilt.has_value();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (sample.values[i] >= threshold) {
      const double w = weighted ? std::exp(sample.log_weights[i]) : 1.0;
      sum += w;
      sum_sq += w * w;
    }
  }
  const double md = static_cast<double>(m);
  const double mean = sum / md;
  const double var = std::max(0.0, sum_sq / md - mean * mean);
  return {mean, std::sqrt(var / md)};
}

double dkw_half_width(std::size_t m, double level) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "empty sample");
  return std::sqrt(std::log(2.0 / level) / (2.0 * static_cast<double>(m)));
}

EmpiricalCdf empirical_cdf(std::span<const double> sample, std::span<const double> grid) {
  if (sample.size() < 100) {
    throw Error(ErrorCode::InvalidArgument, "empirical CDF needs at least 100 sample points",
                {{"m", sample.size()}});
  }
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  EmpiricalCdf out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.reserve(grid.size());
  for (double y : grid) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), y) - sorted.begin();
    out.values.push_back(static_cast<double>(count) / static_cast<double>(sorted.size()));
  }
  out.band = dkw_half_width(sorted.size());
  return out;
}

double sup_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  double best = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double g = cdf(sorted[i]);
    best = std::max({best, std::abs(g - static_cast<double>(i) / m), std::abs(g - static_cast<double>(j) / m)});
    i = j;
  }
  return best;
}

}  // namespace ergo
