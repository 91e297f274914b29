#include "ergo/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "ergo/error.hpp"

namespace ergo {
namespace {

using Adjacency = std::vector<std::vector<std::size_t>>;

Adjacency positive_digraph(const Matrix& p) {
  const auto n = static_cast<std::size_t>(p.rows());
  Adjacency adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) adj[i].push_back(j);
    }
  }
  return adj;
}

// Iterative Tarjan; returns the component id of every vertex.
std::vector<int> strongly_connected_components(const Adjacency& adj, int& count) {
  const std::size_t n = adj.size();
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  int next_index = 0;
  count = 0;

  struct Frame {
    std::size_t v;
    std::size_t edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.edge < adj[f.v].size()) {
        const std::size_t w = adj[f.v][f.edge++];
        if (index[w] < 0) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      if (low[v] == index[v]) {
        std::size_t w = 0;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }
  return comp;
}

// gcd of cycle lengths inside one closed class, from BFS levels.
int class_period(const Adjacency& adj, const std::vector<int>& comp, int cls) {
  std::size_t root = 0;
  while (comp[root] != cls) ++root;
  std::vector<long> level(adj.size(), -1);
  std::queue<std::size_t> frontier;
  level[root] = 0;
  frontier.push(root);
  long g = 0;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : adj[u]) {
      if (comp[v] != cls) continue;
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        frontier.push(v);
      } else {
        g = std::gcd(g, std::labs(level[u] + 1 - level[v]));
      }
    }
  }
  return static_cast<int>(g);
}

Vector solve_stationary(const Matrix& p) {
  const Eigen::Index n = p.rows();
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::PartialPivLU<Matrix> lu(a);
  Vector pi = lu.solve(rhs);
  // One step of iterative refinement keeps the residual at roundoff level
  // for the larger truncated models.
  for (int step = 0; step < 2; ++step) {
    const Vector r = rhs - a * pi;
    pi += lu.solve(r);
  }
  return pi;
}

}  // namespace

std::optional<StateIndex> ValidatedChain::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<StateIndex>(it - names_.begin());
}

ValidatedChain validate_kernel(const Matrix& raw, std::vector<std::string> names,
                               const Settings& settings) {
  if (raw.rows() != raw.cols()) {
    throw Error(ErrorCode::InvalidArgument, "kernel must be square",
                {{"rows", raw.rows()}, {"cols", raw.cols()}});
  }
  const Eigen::Index n = raw.rows();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "kernel needs at least two states", {{"size", n}});
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "state name count does not match kernel size",
                {{"names", names.size()}, {"size", n}});
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = raw(i, j);
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::InvalidArgument, "kernel entry is not finite", {{"row", i}, {"col", j}});
      }
      if (v < 0.0) {
        throw Error(ErrorCode::NegativeEntry, "negative transition probability",
                    {{"row", i}, {"col", j}, {"value", v}});
      }
    }
    const double sum = raw.row(i).sum();
    if (std::abs(sum - 1.0) > settings.input_tol) {
      throw Error(ErrorCode::RowSum, "row does not sum to one", {{"row", i}, {"sum", sum}});
    }
  }

  ValidatedChain chain;
  chain.kernel_ = raw;
  // Rows within input_tol are rescaled so stochasticity holds to roundoff.
  for (Eigen::Index i = 0; i < n; ++i) chain.kernel_.row(i) /= chain.kernel_.row(i).sum();

  const Adjacency adj = positive_digraph(chain.kernel_);
  int components = 0;
  const std::vector<int> comp = strongly_connected_components(adj, components);
  std::vector<bool> closed(static_cast<std::size_t>(components), true);
  for (std::size_t u = 0; u < adj.size(); ++u) {
    for (std::size_t v : adj[u]) {
      if (comp[u] != comp[v]) closed[static_cast<std::size_t>(comp[u])] = false;
    }
  }
  std::vector<int> closed_classes;
  for (int c = 0; c < components; ++c) {
    if (closed[static_cast<std::size_t>(c)]) closed_classes.push_back(c);
  }
  if (closed_classes.size() != 1) {
    throw Error(ErrorCode::Reducible, "more than one closed communicating class",
                {{"closed_classes", closed_classes.size()}});
  }
  chain.irreducible_ = components == 1;
  chain.period_ = class_period(adj, comp, closed_classes.front());

  chain.stationary_ = solve_stationary(chain.kernel_);
  chain.stationary_residual_ =
      (chain.stationary_.transpose() * chain.kernel_ - chain.stationary_.transpose())
          .cwiseAbs()
          .maxCoeff();
  if (chain.stationary_residual_ > settings.residual_tol) {
    throw Error(ErrorCode::Numerical, "stationary solve did not reach the residual tolerance",
                {{"residual", chain.stationary_residual_}});
  }

  if (names.empty()) {
    names.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) names.push_back(std::to_string(i));
  }
  chain.names_ = std::move(names);
  return chain;
}

void require_ergodic(const ValidatedChain& chain, std::string_view operation) {
  if (!chain.irreducible()) {
    throw Error(ErrorCode::Reducible, std::string(operation) + " requires an irreducible chain");
  }
  if (chain.period() != 1) {
    throw Error(ErrorCode::NotAperiodic, std::string(operation) + " requires an aperiodic chain",
                {{"period", chain.period()}});
  }
}

Functional::Functional(Vector values) : Functional(std::move(values), 0.0) {}

Functional::Functional(Vector values, double removed_mean)
    : values_(std::move(values)), removed_mean_(removed_mean) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_(i))) {
      throw Error(ErrorCode::InvalidArgument, "functional value is not finite", {{"state", i}});
    }
  }
  bound_ = values_.size() == 0 ? 0.0 : values_.cwiseAbs().maxCoeff();
}

double stationary_mean(const ValidatedChain& chain, const Vector& g) {
  return chain.stationary().dot(g);
}

Functional center_functional(const Functional& f, const ValidatedChain& chain) {
  if (f.size() != chain.size()) {
    throw Error(ErrorCode::InvalidArgument, "functional size does not match chain",
                {{"functional", f.size()}, {"chain", chain.size()}});
  }
  const double m = stationary_mean(chain, f.values());
  Vector centered = f.values().array() - m;
  return Functional(std::move(centered), f.removed_mean() + m);
}

void require_centered(const ValidatedChain& chain, const Functional& f, const Settings& settings) {
  if (f.size() != chain.size()) {
    throw Error(ErrorCode::InvalidArgument, "functional size does not match chain",
                {{"functional", f.size()}, {"chain", chain.size()}});
  }
  const double m = stationary_mean(chain, f.values());
  if (std::abs(m) > settings.residual_tol * std::max(1.0, f.bound())) {
    throw Error(ErrorCode::InvalidArgument, "functional is not centered", {{"mean", m}});
  }
}

Complex LogComplex::value() const { return std::polar(std::exp(log_modulus), phase); }

std::vector<LogComplex> expectation_iterate_all(const ValidatedChain& chain, const Functional& f,
                                                Complex alpha, int n) {
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "horizon must be non-negative", {{"n", n}});
  if (f.size() != chain.size()) {
    throw Error(ErrorCode::InvalidArgument, "functional size does not match chain");
  }
  const CMatrix p = chain.kernel().cast<Complex>();
  const CVector weight = (alpha * f.values().cast<Complex>()).array().exp();
  CVector v = CVector::Ones(p.rows());
  double log_scale = 0.0;
  for (int step = 0; step < n; ++step) {
    v = weight.cwiseProduct(p * v);
    const double s = v.cwiseAbs().maxCoeff();
    if (s == 0.0 || !std::isfinite(s)) {
      throw Error(ErrorCode::Numerical, "moment iteration lost all mass", {{"step", step}});
    }
    v /= s;
    log_scale += std::log(s);
  }
  std::vector<LogComplex> out(chain.size());
  for (std::size_t x = 0; x < out.size(); ++x) {
    const Complex vx = v(static_cast<Eigen::Index>(x));
    out[x].log_modulus = log_scale + std::log(std::abs(vx));
    out[x].phase = std::arg(vx);
  }
  return out;
}

LogComplex expectation_iterate_log(const ValidatedChain& chain, const Functional& f, Complex alpha,
                                   StateIndex x, int n) {
  if (x >= chain.size()) throw Error(ErrorCode::InvalidArgument, "start state out of range", {{"x", x}});
  return expectation_iterate_all(chain, f, alpha, n)[x];
}

Complex expectation_iterate(const ValidatedChain& chain, const Functional& f, Complex alpha,
                            StateIndex x, int n) {
  return expectation_iterate_log(chain, f, alpha, x, n).value();
}

}  // namespace ergo
