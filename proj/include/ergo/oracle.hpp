#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

// Law of S_n = n d + K h jointly with the terminal state.
struct ExactSumDistribution {
  int n = 0;
  std::optional<StateIndex> x;  // empty for a non-degenerate initial law
  double span = 1.0;
  double offset = 0.0;
  long k_min = 0;
  Matrix joint;     // joint(y, K - k_min) = P{Phi(n) = y, S_n = n d + K h}
  Vector marginal;  // over K - k_min

  long k_max() const { return k_min + static_cast<long>(marginal.size()) - 1; }
  double value(long k) const { return n * offset + static_cast<double>(k) * span; }
  double probability(long k) const;
  double mass() const;
  double mean() const;
  double variance() const;
  double cdf(double s) const;       // P{S_n <= s}
  double cdf_left(double s) const;  // P{S_n < s}
  double tail(double s) const;      // P{S_n >= s}
};

// Forward dynamic program over (state, K). Requires a value-lattice F and at
// most settings.dp_cell_budget cells n * N * width; throws
// NonLatticeFunctional or BudgetExceeded otherwise.
ExactSumDistribution exact_sum_distribution(const ValidatedChain& chain, const Functional& f, StateIndex x,
                                            int n, const Settings& settings = default_settings());

ExactSumDistribution exact_sum_distribution(const ValidatedChain& chain, const Functional& f,
                                            const Vector& initial, int n,
                                            const Settings& settings = default_settings());

// P_x{S_n >= n c}, weak inequality.
double exact_tail(const ValidatedChain& chain, const Functional& f, StateIndex x, int n, double c,
                  const Settings& settings = default_settings());

// Counter-based generator: the draw for (seed, path, step) is a pure function
// of the three numbers.
double uniform_draw(std::uint64_t seed, std::uint64_t path, std::uint64_t step);

struct McSample {
  std::uint64_t seed = 0;
  int n = 0;
  StateIndex x = 0;
  std::optional<double> tilt;
  std::vector<double> values;       // S_n per path
  std::vector<double> log_weights;  // tilted only: log dP/dP_a along the path
};

// m paths of length n from x under P, or under the twisted chain P_a when
// tilt is given. Paths are split across threads; the result does not depend
// on the split.
McSample simulate_paths(const ValidatedChain& chain, const Functional& f, StateIndex x, int n, std::size_t m,
                        std::uint64_t seed, std::optional<double> tilt = std::nullopt,
                        const Settings& settings = default_settings());

struct TailEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

// P_x{S_n >= threshold}; weighted when the sample is tilted.
TailEstimate tail_estimate(const McSample& sample, double threshold);

struct EmpiricalCdf {
  std::vector<double> grid;
  std::vector<double> values;
  double band = 0.0;  // DKW half-width at level 0.99
};

double dkw_half_width(std::size_t m, double level = 0.01);

EmpiricalCdf empirical_cdf(std::span<const double> sample, std::span<const double> grid);

// sup_y |F_m(y) - G(y)| for the empirical CDF F_m of the sample and a
// continuous G, checked on both sides of every jump.
double sup_distance(std::span<const double> sample, const std::function<double(double)>& cdf);

}  // namespace ergo
