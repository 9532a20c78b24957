#include "dagmip/sem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dagmip/error.hpp"

namespace dagmip {

namespace {

struct KindName {
  FunctionKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {FunctionKind::Linear, "linear"},       {FunctionKind::Sin, "sin"},
    {FunctionKind::CosMix, "cos_mix"},      {FunctionKind::SinSin, "sin_sin"},
    {FunctionKind::SinInverse, "sin_inv"},  {FunctionKind::Square, "square"},
    {FunctionKind::Abs, "abs"},             {FunctionKind::ArctanSq, "arctan_sq"},
    {FunctionKind::Exp, "exp"},             {FunctionKind::HalfCube, "half_cube"},
    {FunctionKind::Poly, "poly"},
};

double base_value(const EdgeFunction& fn, double x) {
  switch (fn.kind) {
    case FunctionKind::Linear: return x;
    case FunctionKind::Sin: return std::sin(x);
    case FunctionKind::CosMix: return 0.5 * (std::sin(x) + std::cos(x));
    case FunctionKind::SinSin: return std::sin(x + std::sin(x));
    case FunctionKind::SinInverse: return std::abs(x) < 1e-12 ? 0.0 : std::sin(20.0 / x);
    case FunctionKind::Square: return x * x;
    case FunctionKind::Abs: return std::abs(x);
    case FunctionKind::ArctanSq: return std::atan(x * x);
    case FunctionKind::Exp: return std::exp(x);
    case FunctionKind::HalfCube: return 0.5 * x * x * x;
    case FunctionKind::Poly: {
      double acc = 0.0, power = x;
      for (double c : fn.coefficients) {
        acc += c * power;
        power *= x;
      }
      return acc;
    }
  }
  return 0.0;
}

// E[Z^k] for Z ~ N(0, s^2).
double gaussian_moment(int k, double s) {
  if (k % 2) return 0.0;
  double v = 1.0;
  for (int i = k - 1; i > 0; i -= 2) v *= i;
  return v * std::pow(s, k);
}

}  // namespace

double EdgeFunction::operator()(double x) const { return scale * base_value(*this, x); }

std::string EdgeFunction::tag() const {
  for (const auto& kn : kKindNames)
    if (kn.kind == kind) return kn.name;
  return "linear";
}

EdgeFunction EdgeFunction::parse(const std::string& tag, const nlohmann::json& params) {
  EdgeFunction fn;
  bool found = false;
  for (const auto& kn : kKindNames)
    if (tag == kn.name) {
      fn.kind = kn.kind;
      found = true;
    }
  if (!found) throw InvalidInput("unknown edge function '" + tag + "'");
  if (params.is_object()) {
    if (params.contains("scale")) fn.scale = params.at("scale").get<double>();
    if (params.contains("coefficients")) fn.coefficients = params.at("coefficients").get<std::vector<double>>();
  }
  if (fn.kind == FunctionKind::Poly && fn.coefficients.empty())
    throw InvalidInput("poly edge function needs coefficients");
  return fn;
}

nlohmann::json EdgeFunction::params() const {
  nlohmann::json j = {{"scale", scale}};
  if (kind == FunctionKind::Poly) j["coefficients"] = coefficients;
  return j;
}

std::optional<double> gaussian_mean(const EdgeFunction& fn, double s) {
  double m = 0.0;
  switch (fn.kind) {
    case FunctionKind::Linear:
    case FunctionKind::Sin:
    case FunctionKind::SinSin:
    case FunctionKind::SinInverse:
    case FunctionKind::HalfCube: m = 0.0; break;
    case FunctionKind::CosMix: m = 0.5 * std::exp(-0.5 * s * s); break;
    case FunctionKind::Square: m = s * s; break;
    case FunctionKind::Abs: m = s * std::sqrt(2.0 / std::numbers::pi); break;
    case FunctionKind::Exp: m = std::exp(0.5 * s * s); break;
    case FunctionKind::ArctanSq: return std::nullopt;
    case FunctionKind::Poly:
      for (std::size_t i = 0; i < fn.coefficients.size(); ++i)
        m += fn.coefficients[i] * gaussian_moment(static_cast<int>(i) + 1, s);
      break;
  }
  return fn.scale * m;
}

Dag SemSpec::dag() const {
  EdgeMatrix adj(p);
  for (const auto& e : edges) adj.set(e.from, e.to);
  return Dag(adj);
}

void SemSpec::validate() const {
  if (p < 1) throw InvalidInput("SEM spec: p must be positive");
  if (static_cast<int>(sigmas.size()) != p) throw InvalidInput("SEM spec: need one sigma per node");
  for (double s : sigmas)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidInput("SEM spec: sigmas must be positive");
  EdgeMatrix adj(p);
  for (const auto& e : edges) {
    if (e.from < 0 || e.to < 0 || e.from >= p || e.to >= p) throw InvalidInput("SEM spec: edge endpoint out of range");
    if (e.from == e.to) throw InvalidInput("SEM spec: self-loop");
    if (adj(e.from, e.to)) throw InvalidInput("SEM spec: duplicate edge");
    adj.set(e.from, e.to);
  }
  (void)Dag(adj);
}

SemSpec SemSpec::from_json(const nlohmann::json& j) {
  try {
    SemSpec spec;
    for (const auto& [key, v] : j.items())
      if (key != "p" && key != "edges" && key != "sigmas" && key != "seed")
        throw InvalidInput("SEM spec JSON: unknown key '" + key + "'");
    spec.p = j.at("p").get<int>();
    for (const auto& e : j.at("edges")) {
      for (const auto& [key, v] : e.items())
        if (key != "from" && key != "to" && key != "fn" && key != "params")
          throw InvalidInput("SEM spec JSON: unknown edge key '" + key + "'");
      EdgeSpec es;
      es.from = e.at("from").get<int>() - 1;
      es.to = e.at("to").get<int>() - 1;
      es.fn = EdgeFunction::parse(e.value("fn", std::string("linear")), e.value("params", nlohmann::json::object()));
      spec.edges.push_back(es);
    }
    spec.sigmas = j.at("sigmas").get<std::vector<double>>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("SEM spec JSON: ") + ex.what());
  }
}

nlohmann::json SemSpec::to_json() const {
  nlohmann::json edges_json = nlohmann::json::array();
  for (const auto& e : edges)
    edges_json.push_back({{"from", e.from + 1}, {"to", e.to + 1}, {"fn", e.fn.tag()}, {"params", e.fn.params()}});
  return {{"p", p}, {"edges", edges_json}, {"sigmas", sigmas}, {"seed", seed}};
}

double center_constant(const EdgeFunction& fn, std::span<const double> draws) {
  if (draws.empty()) throw InvalidInput("center_constant: no draws");
  // Kahan summation
  double sum = 0.0, comp = 0.0;
  std::size_t bad = 0, good = 0;
  for (double x : draws) {
    const double v = fn(x);
    if (!std::isfinite(v)) {
      ++bad;
      continue;
    }
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    ++good;
  }
  if (static_cast<double>(bad) > 1e-3 * static_cast<double>(draws.size()))
    throw NumericalError("center_constant: too many non-finite evaluations of " + fn.tag());
  return sum / static_cast<double>(good);
}

double center_constant(const EdgeFunction& fn, const std::function<double(Rng&)>& parent_sampler, int m,
                       std::uint64_t seed) {
  if (m < 10'000) throw InvalidInput("center_constant: need at least 1e4 draws");
  Rng rng(seed);
  std::vector<double> draws(static_cast<std::size_t>(m));
  for (auto& d : draws) d = parent_sampler(rng);
  return center_constant(fn, draws);
}

namespace {

// Generates columns in topological order; `centers` must already be final.
Eigen::MatrixXd generate(const SemSpec& spec, int n, std::uint64_t seed, bool check_finite) {
  const auto order = topological_order(spec.dag().adjacency());
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, spec.p);
  std::vector<std::vector<const EdgeSpec*>> incoming(spec.p);
  for (const auto& e : spec.edges) incoming[e.to].push_back(&e);
  for (int j : order) {
    for (int i = 0; i < n; ++i) {
      double v = spec.sigmas[j] * normal(rng);
      for (const EdgeSpec* e : incoming[j]) v += e->fn(x(i, e->from)) - e->center;
      if (check_finite && !std::isfinite(v))
        throw NumericalError("sample: non-finite value generated for node " + std::to_string(j + 1));
      x(i, j) = v;
    }
  }
  return x;
}

}  // namespace

void prepare_centering(SemSpec& spec, int m) {
  spec.validate();
  const auto dag = spec.dag();
  const auto order = topological_order(dag.adjacency());
  std::vector<char> is_source(spec.p, 0);
  for (int j = 0; j < spec.p; ++j) is_source[j] = dag.parents(j).empty();

  // Reference sample in topological order so every parent column is final before use.
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd ref(m, spec.p);
  std::vector<std::vector<EdgeSpec*>> incoming(spec.p);
  for (auto& e : spec.edges) incoming[e.to].push_back(&e);
  for (int j : order) {
    for (EdgeSpec* e : incoming[j]) {
      const auto analytic = is_source[e->from] ? gaussian_mean(e->fn, spec.sigmas[e->from]) : std::nullopt;
      e->center = analytic ? *analytic
                           : center_constant(e->fn, std::span<const double>(ref.col(e->from).data(), m));
    }
    for (int i = 0; i < m; ++i) {
      double v = spec.sigmas[j] * normal(rng);
      for (const EdgeSpec* e : incoming[j]) {
        const double f = e->fn(ref(i, e->from));
        v += std::isfinite(f) ? f - e->center : 0.0;
      }
      ref(i, j) = v;
    }
  }
  spec.centered = true;
}

Dataset sample(const SemSpec& spec_in, int n, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("sample: n must be positive");
  SemSpec spec = spec_in;
  if (!spec.centered) prepare_centering(spec);
  Dataset data;
  data.values = generate(spec, n, seed, true);
  data.column_names = default_column_names(spec.p);
  return data;
}

Dag example_model_dag() {
  EdgeMatrix adj(5);
  adj.set(0, 1);
  adj.set(0, 2);
  adj.set(1, 2);
  return Dag(adj);
}

SemSpec example_model(const EdgeFunction& h, double sigma2, double sigma3, std::uint64_t seed) {
  SemSpec spec;
  spec.p = 5;
  spec.seed = seed;
  spec.sigmas = {0.5, sigma2, sigma3, 0.5, 0.5};
  EdgeFunction square;
  square.kind = FunctionKind::Square;
  EdgeFunction twice_square = square;
  twice_square.scale = 2.0;
  spec.edges = {{0, 1, square, 0.0}, {0, 2, twice_square, 0.0}, {1, 2, h, 0.0}};
  spec.validate();
  return spec;
}

SemSpec additive_model(const Dag& dag, const EdgeFunction& fn, std::vector<double> sigmas, std::uint64_t seed) {
  SemSpec spec;
  spec.p = dag.size();
  spec.seed = seed;
  spec.sigmas = std::move(sigmas);
  for (const auto& [k, j] : dag.adjacency().edges()) spec.edges.push_back({k, j, fn, 0.0});
  spec.validate();
  return spec;
}

std::vector<double> heteroscedastic_sigmas(int p, double mu0, std::uint64_t seed) {
  if (!(mu0 > 0)) throw InvalidInput("heteroscedastic_sigmas: mu0 must be positive");
  Rng rng(seed);
  std::gamma_distribution<double> ga(1.0, 1.0), gb(mu0, 1.0);
  std::vector<double> out(p);
  for (auto& s : out) {
    const double a = ga(rng), b = gb(rng);
    s = 0.5 * a / (a + b) + 0.5;
  }
  return out;
}

Dag random_dag(int p, double prob, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::bernoulli_distribution coin(prob);
  EdgeMatrix adj(p);
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b)
      if (coin(rng)) adj.set(perm[a], perm[b]);
  return Dag(adj);
}

}  // namespace dagmip
