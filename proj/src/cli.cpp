#include "ergo/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>

#include "ergo/acceptance.hpp"
#include "ergo/drift.hpp"
#include "ergo/error.hpp"
#include "ergo/io.hpp"
#include "ergo/limits.hpp"
#include "ergo/models.hpp"
#include "ergo/oracle.hpp"
#include "ergo/poisson.hpp"
#include "ergo/spectral.hpp"

namespace ergo::cli {
namespace {

using ergo::to_json;

constexpr const char* kOutputDirVariable = "ERGO_OUTPUT_DIR";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string csv_header(const std::string& columns) {
  return "# schema_version=" + std::to_string(kSchemaVersion) + "\n" + columns + "\n";
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
  }
  return out;
}

// lo:hi:steps
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("grid must be lo:hi:steps, got '" + text + "'");
    }
  }
  if (parts.size() != 3 || parts[2] < 1 || parts[2] != std::floor(parts[2])) {
    throw UsageError("grid must be lo:hi:steps, got '" + text + "'");
  }
  return linear_grid(parts[0], parts[1], static_cast<int>(parts[2]));
}

// a, a+iw, a-iw, a+wi, iw
Complex parse_alpha(const std::string& text) {
  static const std::regex pattern(
      R"(^\s*([+-]?[0-9.eE+-]*?[0-9.])?\s*(?:([+-])\s*(?:i\s*([0-9.eE+-]+)|([0-9.eE+-]+)\s*i))?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern) || (!m[1].matched && !m[2].matched)) {
    throw UsageError("alpha must look like a or a+iw, got '" + text + "'");
  }
  try {
    const double re = m[1].matched ? std::stod(m[1].str()) : 0.0;
    double im = 0.0;
    if (m[2].matched) {
      im = std::stod(m[3].matched ? m[3].str() : m[4].str());
      if (m[2].str() == "-") im = -im;
    }
    return {re, im};
  } catch (const std::exception&) {
    throw UsageError("alpha must look like a or a+iw, got '" + text + "'");
  }
}

std::filesystem::path resolve_output(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative()) {
    if (const char* dir = std::getenv(kOutputDirVariable); dir != nullptr && *dir != '\0') {
      p = std::filesystem::path(dir) / p;
    }
  }
  return p;
}

struct Common {
  std::string chain;
  std::string functional;
  std::string functional_values;
  std::string x = "0";
  std::string out;
  std::string format;  // empty: the subcommand's default
};

void add_chain_options(CLI::App* app, Common& c, bool need_functional = true) {
  app->add_option("--chain", c.chain, "chain definition (JSON)")->required();
  if (need_functional) {
    app->add_option("--functional", c.functional, "functional as CSV with columns state,value");
    app->add_option("--functional-values", c.functional_values, "functional inline, comma separated");
  }
}

void add_output_options(CLI::App* app, Common& c, const std::string& default_format) {
  app->add_option("--out", c.out, "write here instead of stdout (relative to $ERGO_OUTPUT_DIR if set)");
  app->add_option("--format", c.format, "json or csv (default " + default_format + ")")
      ->check(CLI::IsMember({"json", "csv"}));
}

struct Loaded {
  ValidatedChain chain;
  Functional raw;
  Functional centered;
};

ValidatedChain load_chain(const Common& c, ChainDefinition* def_out = nullptr) {
  ChainDefinition def = read_chain_file(c.chain);
  ValidatedChain chain = validate_kernel(def.kernel, def.states);
  if (def_out != nullptr) *def_out = std::move(def);
  return chain;
}

Loaded load(const Common& c) {
  ChainDefinition def;
  ValidatedChain chain = load_chain(c, &def);
  std::optional<Vector> values = def.functional;
  if (!c.functional.empty()) values = read_vector_file(c.functional, chain.names());
  if (!c.functional_values.empty()) {
    const std::vector<double> v = parse_list(c.functional_values);
    values = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (!values) {
    throw Error(ErrorCode::InvalidArgument, "no functional given: add one to the chain file or pass --functional");
  }
  if (values->size() != static_cast<Eigen::Index>(chain.size())) {
    throw Error(ErrorCode::InvalidArgument, "functional must have one value per state",
                {{"states", chain.size()}, {"values", values->size()}});
  }
  Functional raw(*values);
  require_ergodic(chain, "functional analysis");
  Functional centered = center_functional(raw, chain);
  return {std::move(chain), std::move(raw), std::move(centered)};
}

StateIndex state_of(const ValidatedChain& chain, const std::string& name) {
  if (auto idx = chain.index_of(name)) return *idx;
  try {
    std::size_t used = 0;
    const long v = std::stol(name, &used);
    if (used == name.size() && v >= 0 && static_cast<std::size_t>(v) < chain.size()) return static_cast<StateIndex>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidArgument, "unknown start state", {{"state", name}});
}

void emit(const Common& c, std::ostream& out, const std::string& text) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  const std::filesystem::path p = resolve_output(c.out);
  std::ofstream file(p);
  if (!file) throw Error(ErrorCode::Io, "cannot write output", {{"path", p.string()}});
  file << text;
}

void emit_json(const Common& c, std::ostream& out, nlohmann::json j) {
  j["schema_version"] = kSchemaVersion;
  emit(c, out, j.dump(2) + "\n");
}

nlohmann::json complex_vector(const CVector& v) {
  if (v.imag().isZero(0.0)) return to_json(Vector(v.real()));
  return {{"re", to_json(Vector(v.real()))}, {"im", to_json(Vector(v.imag()))}};
}

nlohmann::json complex_value(Complex z) {
  if (z.imag() == 0.0) return z.real();
  return {{"re", z.real()}, {"im", z.imag()}};
}

// ---------------------------------------------------------------------------

int cmd_validate(const Common& c, std::ostream& out) {
  const ValidatedChain chain = load_chain(c);
  nlohmann::json j = {{"states", chain.names()},
                      {"size", chain.size()},
                      {"irreducible", chain.irreducible()},
                      {"period", chain.period()},
                      {"aperiodic", chain.aperiodic()},
                      {"stationary", to_json(chain.stationary())},
                      {"stationary_residual", chain.stationary_residual()}};
  if (chain.aperiodic()) {
    if (const auto m = check_doeblin(chain)) {
      j["doeblin_epsilon"] = m->epsilon;
      j["alpha_bar"] = doeblin_alpha_bar(chain);
    }
  }
  emit_json(c, out, j);
  return 0;
}

struct DriftArgs {
  std::string lyapunov, s, nu;
  double delta = 0.5;
  double b = 1.0;
};

int cmd_drift(const Common& c, const DriftArgs& d, std::ostream& out) {
  const ValidatedChain chain = load_chain(c);
  const Vector V = read_vector_file(d.lyapunov, chain.names());
  Vector s, nu;
  if (d.s.empty() || d.nu.empty()) {
    const auto m = check_doeblin(chain);
    if (!m) throw Error(ErrorCode::Domain, "no Doeblin minorization; pass --s and --nu");
    s = Vector::Constant(static_cast<Eigen::Index>(chain.size()), m->epsilon);
    nu = m->nu;
  }
  if (!d.s.empty()) s = read_vector_file(d.s, chain.names());
  if (!d.nu.empty()) nu = read_vector_file(d.nu, chain.names());
  const DriftCertificateV4 cert = check_v4(chain, V, d.delta, d.b, s, nu);
  const PotentialBound pb = potential_norm_bound(cert);
  emit_json(c, out,
            {{"delta", cert.delta},
             {"b", cert.b},
             {"alpha_bar", alpha_bar(cert.delta, cert.b)},
             {"slack", to_json(cert.slack)},
             {"s", to_json(cert.s)},
             {"nu", to_json(cert.nu)},
             {"potential_norm", pb.computed_norm},
             {"potential_bound", pb.bound},
             {"potential_bound_holds", pb.holds}});
  return 0;
}

int cmd_poisson(const Common& c, std::ostream& out) {
  const Loaded l = load(c);
  const PoissonSolution sol = solve_poisson(l.chain, l.centered);
  const double r3 = sol.degenerate ? 0.0 : rho3(l.chain, l.centered);
  if (c.format == "csv") {
    std::string text = vector_to_csv(l.chain.names(), sol.Fhat);
    const auto body = text.find('\n') + 1;
    text.insert(body, "# sigma2=" + fmt(sol.sigma2) + "\n# rho3=" + fmt(r3) + "\n");
    emit(c, out, text);
    return 0;
  }
  emit_json(c, out,
            {{"Fhat", to_json(sol.Fhat)},
             {"sigma2", sol.sigma2},
             {"rho3", r3},
             {"degenerate", sol.degenerate},
             {"residual", sol.residual},
             {"normalization", sol.normalization},
             {"removed_mean", l.centered.removed_mean()}});
  return 0;
}

int cmd_gpe(const Common& c, const std::string& alpha_text, std::ostream& out) {
  const Loaded l = load(c);
  const Complex alpha = parse_alpha(alpha_text);
  const SpectralTriple t = gpe(twist(l.chain, l.centered, alpha));
  if (c.format == "csv") {
    std::ostringstream s;
    s << csv_header("state,f_re,f_im,mu_re,mu_im");
    for (Eigen::Index i = 0; i < t.feigen.size(); ++i) {
      s << l.chain.names()[static_cast<std::size_t>(i)] << "," << fmt(t.feigen(i).real()) << ","
        << fmt(t.feigen(i).imag()) << "," << fmt(t.mueigen(i).real()) << "," << fmt(t.mueigen(i).imag()) << "\n";
    }
    emit(c, out, s.str());
    return 0;
  }
  emit_json(c, out,
            {{"alpha", complex_value(alpha)},
             {"lambda", complex_value(t.lambda)},
             {"Lambda", complex_value(std::log(t.lambda))},
             {"f", complex_vector(t.feigen)},
             {"mu", complex_vector(t.mueigen)},
             {"gap", t.gap},
             {"right_residual", t.right_residual},
             {"left_residual", t.left_residual},
             {"removed_mean", l.centered.removed_mean()}});
  return 0;
}

int cmd_lambda_curve(const Common& c, const std::string& grid_text, std::optional<double> abar,
                     std::ostream& out) {
  const Loaded l = load(c);
  const std::vector<double> grid = parse_grid(grid_text);
  const double bound = abar ? *abar : doeblin_alpha_bar(l.chain);
  const CgfCurve curve = cgf_curve(l.chain, l.centered, grid, bound);
  if (c.format == "csv") {
    std::ostringstream s;
    s << csv_header("a,Lambda,dLambda,d2Lambda");
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
      s << fmt(curve.grid[i]) << "," << fmt(curve.Lambda[i]) << "," << fmt(curve.dLambda[i]) << ","
        << fmt(curve.d2Lambda[i]) << "\n";
    }
    emit(c, out, s.str());
    return 0;
  }
  emit_json(c, out,
            {{"abar", curve.abar},
             {"a", curve.grid},
             {"Lambda", curve.Lambda},
             {"dLambda", curve.dLambda},
             {"d2Lambda", curve.d2Lambda},
             {"d3Lambda", curve.d3Lambda}});
  return 0;
}

int cmd_lattice(const Common& c, std::ostream& out) {
  const Loaded l = load(c);
  const LatticeStructure ls = classify_lattice(l.chain, l.centered);
  nlohmann::json j = {{"kind", ls.kind == LatticeKind::Lattice ? "lattice" : "strongly-non-lattice"},
                      {"max_grid_modulus", ls.max_grid_modulus},
                      {"arithmetic_ambiguous", ls.arithmetic_ambiguous}};
  if (ls.kind == LatticeKind::Lattice) {
    j["span"] = ls.span;
    // offset of the raw functional: S_n(raw) lies in n (d + mean) + h Z
    j["offset"] = ls.offset;
    j["raw_offset"] = std::fmod(ls.offset + l.centered.removed_mean(), ls.span);
    j["modulus_at_span"] = ls.modulus_at_span;
    if (ls.phase) j["phase"] = to_json(Vector(ls.phase->array() + 0.0));
  }
  emit_json(c, out, j);
  return 0;
}

bool is_lattice(const Loaded& l) { return classify_lattice(l.chain, l.centered).kind == LatticeKind::Lattice; }

struct EdgeworthArgs {
  int n = 100;
  std::string y_grid = "-3:3:61";
  bool exact = false;
};

int cmd_edgeworth(const Common& c, const EdgeworthArgs& e, std::ostream& out) {
  const Loaded l = load(c);
  const StateIndex x = state_of(l.chain, c.x);
  const bool lattice = is_lattice(l);
  const EdgeworthApproximation approx =
      lattice ? edgeworth_lattice(l.chain, l.centered, x, e.n) : edgeworth_nonlattice(l.chain, l.centered, x, e.n);
  std::optional<ExactSumDistribution> dist;
  if (e.exact) {
    if (!lattice) {
      throw Error(ErrorCode::NonLatticeFunctional, "exact distribution needs a lattice functional; use oracle --mc");
    }
    dist = exact_sum_distribution(l.chain, l.centered, x, e.n);
  }
  const std::vector<double> ys = parse_grid(e.y_grid);
  const double scale = approx.sigma * std::sqrt(static_cast<double>(e.n));
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream s;
  s << csv_header(dist ? "y,edgeworth,normal,exact" : "y,edgeworth,normal");
  for (double y : ys) {
    const EdgeworthValue v = approx(y);
    s << fmt(y) << "," << fmt(v.value) << "," << fmt(normal_cdf(y));
    nlohmann::json row = {{"y", y}, {"edgeworth", v.value}, {"normal", normal_cdf(y)}, {"clamped", v.clamped}};
    if (dist) {
      const double exact = dist->cdf(scale * y);
      s << "," << fmt(exact);
      row["exact"] = exact;
    }
    s << "\n";
    rows.push_back(row);
  }
  if (c.format == "csv") {
    emit(c, out, s.str());
    return 0;
  }
  emit_json(c, out,
            {{"kind", lattice ? "lattice" : "non-lattice"},
             {"n", e.n},
             {"x", l.chain.names()[x]},
             {"sigma", approx.sigma},
             {"rho3", approx.rho3},
             {"Fhat_x", approx.Fhat_x},
             {"rows", rows}});
  return 0;
}

struct LdpArgs {
  double c = 0.0;
  std::string n = "50,100,200,400";
  bool lattice = false;
  std::string tail = "upper";
  std::optional<double> abar;
};

std::vector<int> parse_counts(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_list(text)) {
    if (v < 1 || v != std::floor(v)) throw UsageError("n must be a positive integer list");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

int cmd_ldp(const Common& c, const LdpArgs& a, std::ostream& out) {
  const Loaded l = load(c);
  const StateIndex x = state_of(l.chain, c.x);
  const CumulantModel model(l.chain, l.centered, a.abar);
  const Tail tail = a.tail == "lower" ? Tail::Lower : Tail::Upper;
  const double threshold = a.c - l.centered.removed_mean();
  const bool exact_available = is_lattice(l);
  std::ostringstream s;
  s << csv_header("n,estimate,exact,ratio");
  nlohmann::json rows = nlohmann::json::array();
  for (int n : parse_counts(a.n)) {
    const LdpEstimate est = a.lattice ? bahadur_rao_lattice(model, x, n, threshold, tail)
                                      : bahadur_rao_nonlattice(model, x, n, threshold, tail);
    nlohmann::json row = {{"n", n}, {"c", est.c + l.centered.removed_mean()}, {"a", est.a}, {"rate", est.rate},
                          {"estimate", est.estimate}, {"log_estimate", est.log_estimate}};
    s << n << "," << fmt(est.estimate) << ",";
    if (exact_available) {
      double exact = 0.0;
      if (tail == Tail::Upper) {
        exact = exact_tail(l.chain, l.centered, x, n, est.c);
      } else {
        const ExactSumDistribution d = exact_sum_distribution(l.chain, l.centered, x, n);
        exact = d.cdf(n * est.c);
      }
      row["exact"] = exact;
      row["ratio"] = exact / est.estimate;
      s << fmt(exact) << "," << fmt(exact / est.estimate);
    } else {
      s << ",";
    }
    s << "\n";
    rows.push_back(row);
  }
  if (c.format == "csv") {
    emit(c, out, s.str());
    return 0;
  }
  emit_json(c, out, {{"tail", a.tail}, {"form", a.lattice ? "lattice" : "non-lattice"}, {"rows", rows}});
  return 0;
}

struct MdpArgs {
  std::string n = "250,500,1000,2000";
  double exponent = 0.75;
  double y = 1.0;
};

int cmd_mdp(const Common& c, const MdpArgs& m, std::ostream& out) {
  const Loaded l = load(c);
  const StateIndex x = state_of(l.chain, c.x);
  if (!(m.exponent > 0.5 && m.exponent < 1.0)) throw UsageError("--exponent must lie in (1/2, 1)");
  const double sigma2 = asymptotic_variance(l.chain, l.centered);
  const double limit = -mdp_rate(sigma2, m.y);
  const bool exact_available = is_lattice(l);
  std::ostringstream s;
  s << csv_header("n,b_n,scaled_log_tail,limit");
  nlohmann::json rows = nlohmann::json::array();
  for (int n : parse_counts(m.n)) {
    const double bn = std::pow(static_cast<double>(n), m.exponent);
    nlohmann::json row = {{"n", n}, {"b_n", bn}, {"limit", limit}};
    s << n << "," << fmt(bn) << ",";
    if (exact_available) {
      const ExactSumDistribution d = exact_sum_distribution(l.chain, l.centered, x, n);
      const double scaled = n / (bn * bn) * std::log(d.tail(m.y * bn));
      row["scaled_log_tail"] = scaled;
      s << fmt(scaled);
    }
    s << "," << fmt(limit) << "\n";
    rows.push_back(row);
  }
  if (c.format == "csv") {
    emit(c, out, s.str());
    return 0;
  }
  emit_json(c, out, {{"sigma2", sigma2}, {"y", m.y}, {"exponent", m.exponent}, {"rows", rows}});
  return 0;
}

struct OracleArgs {
  int n = 10;
  bool exact = false;
  std::size_t mc = 0;
  std::uint64_t seed = 0;
  std::optional<double> tilt;
};

int cmd_oracle(const Common& c, const OracleArgs& o, std::ostream& out) {
  const Loaded l = load(c);
  const StateIndex x = state_of(l.chain, c.x);
  const double shift = o.n * l.centered.removed_mean();
  std::ostringstream s;
  s << csv_header("k,s_value,prob");
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json meta = {{"n", o.n}, {"x", l.chain.names()[x]}};
  if (o.mc == 0) {
    const ExactSumDistribution d = exact_sum_distribution(l.chain, l.centered, x, o.n);
    for (long k = d.k_min; k <= d.k_max(); ++k) {
      const double p = d.probability(k);
      if (p == 0.0) continue;
      s << k << "," << fmt(d.value(k) + shift) << "," << fmt(p) << "\n";
      rows.push_back({{"k", k}, {"s_value", d.value(k) + shift}, {"prob", p}});
    }
    meta["method"] = "exact";
    meta["span"] = d.span;
    meta["mean"] = d.mean() + shift;
    meta["variance"] = d.variance();
  } else {
    const McSample sample = simulate_paths(l.chain, l.centered, x, o.n, o.mc, o.seed, o.tilt);
    // Pool equal sums; k numbers the distinct values in increasing order.
    std::map<double, double> pooled;
    const double m = static_cast<double>(sample.values.size());
    for (std::size_t i = 0; i < sample.values.size(); ++i) {
      const double w = sample.log_weights.empty() ? 1.0 : std::exp(sample.log_weights[i]);
      pooled[std::round((sample.values[i] + shift) * 1e9) / 1e9] += w / m;
    }
    long k = 0;
    for (const auto& [value, prob] : pooled) {
      s << k << "," << fmt(value) << "," << fmt(prob) << "\n";
      rows.push_back({{"k", k}, {"s_value", value}, {"prob", prob}});
      ++k;
    }
    meta["method"] = "monte-carlo";
    meta["paths"] = o.mc;
    meta["seed"] = o.seed;
    if (o.tilt) meta["tilt"] = *o.tilt;
  }
  if (c.format == "csv") {
    emit(c, out, s.str());
    return 0;
  }
  meta["pmf"] = rows;
  emit_json(c, out, meta);
  return 0;
}

struct ModelArgs {
  std::string kind;
  double p = 0.25;
  double q = 0.4;
  int trunc = 200;
  std::string f = "0,1";
};

int cmd_model(const Common& c, const ModelArgs& m, std::ostream& out) {
  ModelInstance inst = [&] {
    if (m.kind == "mm1") return mm1_instance(m.p, m.trunc);
    if (m.kind == "two-state") {
      const std::vector<double> f = parse_list(m.f);
      if (f.size() != 2) throw UsageError("two-state --f needs two values");
      return two_state(m.p, m.q, Eigen::Map<const Vector>(f.data(), 2));
    }
    if (m.kind == "doeblin") return doeblin_example();
    if (m.kind == "nonlattice") return nonlattice_example();
    if (m.kind == "iid") return iid_example();
    throw UsageError("unknown model '" + m.kind + "'");
  }();
  emit(c, out, chain_to_json(definition_of(inst.chain, inst.raw)).dump(2) + "\n");
  return 0;
}

int cmd_reproduce(const Common& c, const std::string& name, std::ostream& out) {
  const auto& names = criterion_names();
  if (name == "list") {
    std::string text;
    for (const auto& n : names) text += n + "\n";
    emit(c, out, text);
    return 0;
  }
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw UsageError("unknown reproduce target '" + name + "'; try 'reproduce list'");
  }
  const CriterionReport r = run_criterion(name);
  emit_json(c, out, to_json(r));
  return r.passed ? 0 : 1;
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json to_json(const ExperimentConfig& config) {
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"command", config.command},
                      {"arguments", config.arguments},
                      {"params", config.params},
                      {"format", config.format}};
  if (config.chain) j["chain"] = *config.chain;
  if (config.functional) {
    std::visit([&](const auto& v) { j["functional"] = v; }, *config.functional);
  }
  if (config.seed) j["seed"] = *config.seed;
  if (config.output) j["output"] = *config.output;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"schema_version", "command", "arguments", "chain", "functional",
                                                 "params",         "seed",    "output",    "format"};
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown field in experiment config", {{"field", key}});
    }
  }
  if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion) {
    throw Error(ErrorCode::InvalidArgument, "unsupported schema version", {{"schema_version", j["schema_version"]}});
  }
  ExperimentConfig c;
  try {
    c.command = j.at("command").get<std::string>();
    if (j.contains("arguments")) c.arguments = j["arguments"].get<std::vector<std::string>>();
    if (j.contains("chain")) c.chain = j["chain"].get<std::string>();
    if (j.contains("functional")) {
      if (j["functional"].is_string()) {
        c.functional = j["functional"].get<std::string>();
      } else {
        c.functional = j["functional"].get<std::vector<double>>();
      }
    }
    if (j.contains("params")) {
      if (!j["params"].is_object()) throw Error(ErrorCode::InvalidArgument, "params must be an object");
      c.params = j["params"];
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("format")) c.format = j["format"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "malformed experiment config", {{"what", e.what()}});
  }
  return c;
}

std::vector<std::string> to_arguments(const ExperimentConfig& config) {
  std::vector<std::string> args{config.command};
  args.insert(args.end(), config.arguments.begin(), config.arguments.end());
  if (config.chain) args.insert(args.end(), {"--chain", *config.chain});
  if (config.functional) {
    if (const auto* path = std::get_if<std::string>(&*config.functional)) {
      args.insert(args.end(), {"--functional", *path});
    } else {
      std::string joined;
      for (double v : std::get<std::vector<double>>(*config.functional)) {
        joined += (joined.empty() ? "" : ",") + nlohmann::json(v).dump();
      }
      args.insert(args.end(), {"--functional-values", joined});
    }
  }
  for (const auto& [key, value] : config.params.items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
    } else if (value.is_string()) {
      args.insert(args.end(), {"--" + key, value.get<std::string>()});
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      args.insert(args.end(), {"--" + key, joined});
    } else {
      args.insert(args.end(), {"--" + key, value.dump()});
    }
  }
  if (config.seed) args.insert(args.end(), {"--seed", std::to_string(*config.seed)});
  if (config.output) args.insert(args.end(), {"--out", *config.output});
  if (config.command != "model" && config.command != "reproduce") {
    args.insert(args.end(), {"--format", config.format});
  }
  return args;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral theory and limit theorems for finite Markov chains", "ergo"};
  app.require_subcommand(0, 1);
  std::string config_path;
  app.add_option("--config", config_path, "replay an experiment config (JSON)");

  Common common;
  auto* validate = app.add_subcommand("validate", "check a kernel and report its stationary law");
  add_chain_options(validate, common, false);
  add_output_options(validate, common, "json");

  DriftArgs drift;
  auto* drift_cmd = app.add_subcommand("drift-check", "verify a (V4) drift certificate");
  add_chain_options(drift_cmd, common, false);
  add_output_options(drift_cmd, common, "json");
  drift_cmd->add_option("--lyapunov", drift.lyapunov, "V as CSV state,value")->required();
  drift_cmd->add_option("--delta", drift.delta)->required();
  drift_cmd->add_option("--b", drift.b)->required();
  drift_cmd->add_option("--s", drift.s, "small function as CSV (default: Doeblin minorization)");
  drift_cmd->add_option("--nu", drift.nu, "minorizing measure as CSV (default: Doeblin minorization)");

  auto* poisson = app.add_subcommand("poisson", "solve the Poisson equation; report sigma^2 and rho3");
  add_chain_options(poisson, common);
  add_output_options(poisson, common, "json");

  std::string alpha = "0";
  auto* gpe_cmd = app.add_subcommand("gpe", "generalized principal eigen-triple of the twisted kernel");
  add_chain_options(gpe_cmd, common);
  add_output_options(gpe_cmd, common, "json");
  gpe_cmd->add_option("--alpha", alpha, "a or a+iw")->required();

  std::string grid;
  std::optional<double> curve_abar;
  auto* curve = app.add_subcommand("lambda-curve", "log-eigenvalue and derivatives on a grid");
  add_chain_options(curve, common);
  add_output_options(curve, common, "csv");
  curve->add_option("--grid", grid, "lo:hi:steps")->required();
  curve->add_option("--abar", curve_abar, "domain bound (default: from the Doeblin certificate)");

  auto* lattice = app.add_subcommand("lattice-check", "classify the functional as lattice or non-lattice");
  add_chain_options(lattice, common);
  add_output_options(lattice, common, "json");

  EdgeworthArgs edge;
  auto* edgeworth = app.add_subcommand("edgeworth", "one-term Edgeworth expansion of the CDF of S_n");
  add_chain_options(edgeworth, common);
  add_output_options(edgeworth, common, "csv");
  edgeworth->add_option("--x", common.x, "start state (name or index)")->capture_default_str();
  edgeworth->add_option("--n", edge.n)->required()->check(CLI::PositiveNumber);
  edgeworth->add_option("--y-grid", edge.y_grid, "lo:hi:steps")->capture_default_str();
  edgeworth->add_flag("--exact", edge.exact, "add the exact CDF (lattice functionals)");

  LdpArgs ldp;
  auto* ldp_cmd = app.add_subcommand("ldp", "Bahadur-Rao tail estimates");
  add_chain_options(ldp_cmd, common);
  add_output_options(ldp_cmd, common, "csv");
  ldp_cmd->add_option("--x", common.x, "start state (name or index)")->capture_default_str();
  ldp_cmd->add_option("--c", ldp.c, "threshold for S_n / n on the scale of the functional")->required();
  ldp_cmd->add_option("--n", ldp.n, "comma separated")->capture_default_str();
  ldp_cmd->add_flag("--lattice", ldp.lattice, "use the lattice form");
  ldp_cmd->add_option("--tail", ldp.tail)->check(CLI::IsMember({"upper", "lower"}))->capture_default_str();
  ldp_cmd->add_option("--abar", ldp.abar, "domain bound (default: from the Doeblin certificate)");

  MdpArgs mdp;
  auto* mdp_cmd = app.add_subcommand("mdp", "moderate deviations of S_n at scale n^exponent");
  add_chain_options(mdp_cmd, common);
  add_output_options(mdp_cmd, common, "csv");
  mdp_cmd->add_option("--x", common.x, "start state (name or index)")->capture_default_str();
  mdp_cmd->add_option("--n", mdp.n, "comma separated")->capture_default_str();
  mdp_cmd->add_option("--exponent", mdp.exponent, "b_n = n^exponent")->capture_default_str();
  mdp_cmd->add_option("--y", mdp.y, "threshold S_n >= y b_n")->capture_default_str();

  OracleArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact or simulated law of S_n");
  add_chain_options(oracle_cmd, common);
  add_output_options(oracle_cmd, common, "csv");
  oracle_cmd->add_option("--x", common.x, "start state (name or index)")->capture_default_str();
  oracle_cmd->add_option("--n", oracle.n)->required()->check(CLI::PositiveNumber);
  auto* exact_flag = oracle_cmd->add_flag("--exact", oracle.exact, "dynamic programming (default)");
  auto* mc_opt = oracle_cmd->add_option("--mc", oracle.mc, "number of simulated paths");
  exact_flag->excludes(mc_opt);
  oracle_cmd->add_option("--seed", oracle.seed)->needs(mc_opt);
  oracle_cmd->add_option("--tilt", oracle.tilt, "exponential tilt a")->needs(mc_opt);

  ModelArgs model;
  auto* model_cmd = app.add_subcommand("model", "write a built-in chain as JSON");
  model_cmd->add_option("kind", model.kind, "mm1, two-state, doeblin, nonlattice, iid")->required();
  model_cmd->add_option("--p", model.p)->capture_default_str();
  model_cmd->add_option("--q", model.q, "two-state only")->capture_default_str();
  model_cmd->add_option("--trunc", model.trunc, "mm1 truncation level")->capture_default_str();
  model_cmd->add_option("--f", model.f, "two-state functional")->capture_default_str();
  model_cmd->add_option("--out", common.out);

  std::string target;
  auto* reproduce = app.add_subcommand("reproduce", "run a named acceptance experiment");
  reproduce->add_option("name", target, "experiment name, or 'list'")->required();
  reproduce->add_option("--out", common.out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (!config_path.empty()) {
      if (app.get_subcommands().size() > 0) throw UsageError("--config replaces the subcommand");
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::Io, "cannot open config", {{"path", config_path}});
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Io, "config is not valid JSON", {{"path", config_path}, {"what", e.what()}});
      }
      return run(to_arguments(config_from_json(j)), out, err);
    }
    for (const auto* csv_default : {curve, edgeworth, ldp_cmd, mdp_cmd, oracle_cmd}) {
      if (common.format.empty() && csv_default->parsed()) common.format = "csv";
    }
    if (common.format.empty()) common.format = "json";
    if (validate->parsed()) return cmd_validate(common, out);
    if (drift_cmd->parsed()) return cmd_drift(common, drift, out);
    if (poisson->parsed()) return cmd_poisson(common, out);
    if (gpe_cmd->parsed()) return cmd_gpe(common, alpha, out);
    if (curve->parsed()) return cmd_lambda_curve(common, grid, curve_abar, out);
    if (lattice->parsed()) return cmd_lattice(common, out);
    if (edgeworth->parsed()) return cmd_edgeworth(common, edge, out);
    if (ldp_cmd->parsed()) return cmd_ldp(common, ldp, out);
    if (mdp_cmd->parsed()) return cmd_mdp(common, mdp, out);
    if (oracle_cmd->parsed()) return cmd_oracle(common, oracle, out);
    if (model_cmd->parsed()) return cmd_model(common, model, out);
    if (reproduce->parsed()) return cmd_reproduce(common, target, out);
    err << app.help();
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << e.to_json().dump(2) << "\n";
    return 1;
  }
}

}  // namespace ergo::cli
