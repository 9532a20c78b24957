#include "dagmip/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "dagmip/error.hpp"
#include "dagmip/oracle.hpp"

namespace dagmip {

namespace {

using nlohmann::json;

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_read(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

// Unknown keys are almost always typos; reject them.
void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw InvalidInput(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; });
    if (!known) throw InvalidInput(where + ": unknown key '" + key + "'");
  }
}

json theta_json(const ModelTheta& theta, const EdgeMatrix& g) {
  json edges = json::array();
  for (const auto& [k, j] : g.edges()) {
    std::vector<double> coef;
    for (int r = 0; r < theta.layout.R; ++r) coef.push_back(theta.beta[r](k, j));
    edges.push_back({{"from", k + 1},
                     {"to", j + 1},
                     {"intercept", theta.edge_intercept.size() ? theta.edge_intercept(k, j) : 0.0},
                     {"coefficients", coef}});
  }
  return {{"sigma", std::vector<double>(theta.sigma.data(), theta.sigma.data() + theta.sigma.size())},
          {"intercept_sum",
           std::vector<double>(theta.intercept_sum.data(), theta.intercept_sum.data() + theta.intercept_sum.size())},
          {"edges", edges}};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(i, c);
    rows.push_back(row);
  }
  return rows;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<VarianceMode> regimes(RegimeScope scope) {
  switch (scope) {
    case RegimeScope::Unequal: return {VarianceMode::Unequal};
    case RegimeScope::Equal: return {VarianceMode::Equal};
    case RegimeScope::Auto: break;
  }
  return {VarianceMode::Unequal, VarianceMode::Equal};
}

Termination parse_termination(const std::string& s) {
  if (s == "optimal") return Termination::Optimal;
  if (s == "early_stop") return Termination::EarlyStop;
  if (s == "time_limit") return Termination::TimeLimit;
  if (s == "node_limit") return Termination::NodeLimit;
  throw InvalidInput("unknown termination '" + s + "'");
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Runs f(i) for i in [0, count) on up to `threads` workers.
template <class F>
void parallel_for(int count, int threads, F f) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, count); ++t) {
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < count;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

int unordered_pairs(const EdgeSet& s) {
  int c = 0;
  for (const auto& [k, j] : s.edges())
    if (k < j || !s.contains(j, k)) ++c;
  return c;
}

}  // namespace

std::vector<double> LambdaGrid::resolve(int p, int n) const {
  if (!values.empty()) return values;
  if (n < 1) throw InvalidInput("lambda grid: n must be positive");
  const double lp = std::log(static_cast<double>(std::max(p, 2)));
  const double rate = p * lp * lp / n;
  std::vector<double> out;
  for (double c : scales) out.push_back(c * rate);
  return out;
}

json LambdaGrid::to_json() const {
  if (!values.empty()) return {{"values", values}};
  return {{"scales", scales}};
}

LambdaGrid LambdaGrid::from_json(const json& j) {
  check_keys(j, {"values", "scales"}, "lambda");
  LambdaGrid g;
  if (j.contains("values")) {
    g.values = j["values"].get<std::vector<double>>();
    if (j.contains("scales")) throw InvalidInput("lambda: give either values or scales");
  }
  if (j.contains("scales")) g.scales = j["scales"].get<std::vector<double>>();
  return g;
}

std::string to_string(RegimeScope scope) {
  switch (scope) {
    case RegimeScope::Unequal: return "unequal";
    case RegimeScope::Equal: return "equal";
    case RegimeScope::Auto: return "auto";
  }
  return "auto";
}

RegimeScope parse_regime_scope(const std::string& s) {
  if (s == "unequal") return RegimeScope::Unequal;
  if (s == "equal") return RegimeScope::Equal;
  if (s == "auto") return RegimeScope::Auto;
  throw InvalidInput("unknown variance mode '" + s + "' (unequal, equal or auto)");
}

json PriorOptions::to_json() const {
  return {{"bootstrap", bootstrap},
          {"tau_super", tau_super},
          {"tau_partial", tau_partial},
          {"tau_stable", tau_stable},
          {"learner_penalty", opt_json(learner_penalty)},
          {"neighborhood", neighborhood},
          {"neighborhood_reg", opt_json(neighborhood_reg)},
          {"neighborhood_target", opt_json(neighborhood_target)},
          {"sets", sets ? *sets : json(nullptr)}};
}

PriorOptions PriorOptions::from_json(const json& j) {
  check_keys(j,
             {"bootstrap", "tau_super", "tau_partial", "tau_stable", "learner_penalty", "neighborhood",
              "neighborhood_reg", "neighborhood_target", "sets"},
             "priors");
  PriorOptions o;
  o.bootstrap = j.value("bootstrap", o.bootstrap);
  o.tau_super = j.value("tau_super", o.tau_super);
  o.tau_partial = j.value("tau_partial", o.tau_partial);
  o.tau_stable = j.value("tau_stable", o.tau_stable);
  o.learner_penalty = opt_read<double>(j, "learner_penalty");
  o.neighborhood = j.value("neighborhood", o.neighborhood);
  o.neighborhood_reg = opt_read<double>(j, "neighborhood_reg");
  o.neighborhood_target = opt_read<int>(j, "neighborhood_target");
  if (j.contains("sets") && !j["sets"].is_null()) o.sets = j["sets"];
  return o;
}

json SolverConfig::to_json() const {
  return {{"tau_early", opt_json(tau_early)},
          {"time_limit", opt_json(time_limit)},
          {"max_edges", opt_json(max_edges)},
          {"node_limit", opt_json(node_limit)},
          {"big_M", big_M}};
}

SolverConfig SolverConfig::from_json(const json& j) {
  check_keys(j, {"tau_early", "time_limit", "max_edges", "node_limit", "big_M"}, "solver");
  SolverConfig s;
  s.tau_early = opt_read<double>(j, "tau_early");
  s.time_limit = opt_read<double>(j, "time_limit");
  s.max_edges = opt_read<int>(j, "max_edges");
  s.node_limit = opt_read<std::int64_t>(j, "node_limit");
  s.big_M = j.value("big_M", 0.0);
  return s;
}

void FitConfig::validate() const {
  if (lambda.values.empty() && lambda.scales.empty()) throw InvalidInput("config: lambda grid is empty");
  for (double v : lambda.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("config: lambda^2 values must be finite and >= 0");
  for (double c : lambda.scales)
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput("config: lambda scales must be finite and >= 0");
  const PriorOptions& pr = priors;
  if (pr.bootstrap < 0) throw InvalidInput("config: bootstrap replicates must be >= 0");
  if (!(0.0 <= pr.tau_super && pr.tau_super <= pr.tau_partial && pr.tau_partial <= pr.tau_stable))
    throw InvalidInput("config: thresholds must satisfy 0 <= tau_super <= tau_partial <= tau_stable");
  if (pr.sets && pr.derives_sets())
    throw InvalidInput("config: explicit sets cannot be combined with bootstrap or neighborhood selection");
  if (pr.neighborhood_reg && *pr.neighborhood_reg < 0.0) throw InvalidInput("config: neighborhood_reg must be >= 0");
  if (pr.neighborhood_target && *pr.neighborhood_target < 0)
    throw InvalidInput("config: neighborhood_target must be >= 0");
  if (solver.time_limit && !(*solver.time_limit > 0.0)) throw InvalidInput("config: time limit must be positive");
  if (solver.tau_early && !(*solver.tau_early >= 0.0)) throw InvalidInput("config: tau_early must be >= 0");
  if (solver.max_edges && *solver.max_edges < 0) throw InvalidInput("config: max_edges must be >= 0");
  if (solver.node_limit && *solver.node_limit < 1) throw InvalidInput("config: node_limit must be >= 1");
  if (basis.knots < 0 || basis.degree < 0) throw InvalidInput("config: basis degree and knots must be >= 0");
  if (basis.basis_count() < 1) throw InvalidInput("config: basis must have at least one function");
}

json FitConfig::to_json() const {
  return {{"basis", basis.to_json()}, {"lambda", lambda.to_json()}, {"mode", to_string(mode)},
          {"priors", priors.to_json()}, {"solver", solver.to_json()}, {"seed", seed},
          {"center", center}};
}

FitConfig FitConfig::from_json(const json& j) {
  try {
    check_keys(j, {"basis", "lambda", "mode", "priors", "solver", "seed", "center"}, "config");
    FitConfig c;
    if (j.contains("basis")) c.basis = BasisConfig::from_json(j["basis"]);
    if (j.contains("lambda")) c.lambda = LambdaGrid::from_json(j["lambda"]);
    if (j.contains("mode")) c.mode = parse_regime_scope(j["mode"].get<std::string>());
    if (j.contains("priors")) c.priors = PriorOptions::from_json(j["priors"]);
    if (j.contains("solver")) c.solver = SolverConfig::from_json(j["solver"]);
    c.seed = j.value("seed", std::uint64_t{0});
    c.center = j.value("center", true);
    c.validate();
    return c;
  } catch (const json::exception& ex) {
    throw InvalidInput(std::string("config: ") + ex.what());
  }
}

bool FitResult::all_timed_out() const {
  return !table.empty() && std::all_of(table.begin(), table.end(), [](const GridRow& r) { return r.timed_out(); });
}

std::string FitResult::dot() const { return to_dot(graph.adjacency(), names); }

json FitResult::to_json(bool include_timing) const {
  json rows = json::array();
  for (const GridRow& r : table) {
    json row = {{"lambda_sq", r.lambda_sq},     {"regime", to_string(r.mode)}, {"bic", r.bic},
                {"objective", r.objective},     {"lower_bound", r.lower_bound}, {"gap", r.gap},
                {"edges", r.edges},             {"nodes", r.nodes},
                {"termination", to_string(r.termination)}, {"graph", to_graph_json(r.graph)}};
    if (include_timing) row["time"] = r.time;
    rows.push_back(std::move(row));
  }
  json out = {{"graph", to_graph_json(graph.adjacency())},
              {"names", names},
              {"regime", to_string(mode)},
              {"lambda_sq", lambda_sq},
              {"bic", bic},
              {"chosen_row", chosen},
              {"theta", theta_json(theta, graph.adjacency())},
              {"table", rows},
              {"sets", sets.to_json()},
              {"warnings", warnings},
              {"provenance", {{"config_hash", config_hash},
                              {"data_hash", data_hash},
                              {"version", kVersion},
                              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                            std::to_string(EIGEN_MINOR_VERSION)},
                              {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  if (bootstrap) {
    out["bootstrap"] = {{"B", bootstrap->B},
                        {"failed", bootstrap->failed},
                        {"proportions", matrix_json(bootstrap->proportions)}};
  }
  if (include_timing) out["wall_time"] = wall_time;
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int thread_budget() {
  const char* env = std::getenv("DAGMIP_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw InvalidInput("DAGMIP_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(v, 256));
}

ConstraintSets estimate_sets(const FitConfig& config, const Dataset& data, const BasisSystem& system,
                             std::optional<BootstrapReport>* report, std::ostream* log) {
  const int p = data.p();
  const PriorOptions& pr = config.priors;
  if (pr.sets) {
    ConstraintSets sets = ConstraintSets::from_json(*pr.sets, p);
    sets.validate(p);
    return sets;
  }
  ConstraintSets sets;
  sets.partial_order = EdgeSet(p);
  sets.stable = EdgeSet(p);

  std::optional<BootstrapReport> boot;
  if (pr.bootstrap > 0) {
    const double penalty = pr.learner_penalty.value_or(bic_rate(data.n()));
    const BasisConfig basis = config.basis;
    Learner learner = [basis, penalty](const Dataset& d) {
      return greedy_baseline(d, BasisSystem::fit(basis, d), penalty).adjacency();
    };
    boot = bootstrap_proportions(data, pr.bootstrap, learner, config.seed, 1);
    if (log && !boot->failed.empty())
      *log << "bootstrap: " << boot->failed.size() << " of " << pr.bootstrap << " replicates failed\n";
  }

  std::optional<EdgeSet> neighborhood;
  if (pr.neighborhood) {
    RegChoice reg;
    if (pr.neighborhood_reg) {
      reg = *pr.neighborhood_reg;
    } else {
      int target = pr.neighborhood_target.value_or(p);
      if (!pr.neighborhood_target && boot) {
        // Twice the bootstrap superstructure, counted as unordered pairs.
        EdgeSet ref(p);
        for (int k = 0; k < p; ++k)
          for (int j = 0; j < p; ++j)
            if (k != j && boot->proportions(k, j) >= pr.tau_super) ref.insert(k, j);
        target = std::max(1, 2 * unordered_pairs(ref));
      }
      reg = AutoReg{target};
    }
    neighborhood = neighborhood_select(data, system, reg).edges;
  }

  if (boot) {
    sets = build_sets(*boot, pr.tau_super, pr.tau_partial, pr.tau_stable, neighborhood);
  } else if (neighborhood) {
    sets.superstructure = *neighborhood;
  }
  if (report) *report = std::move(boot);
  return sets;
}

FitResult fit(const FitConfig& config, const Dataset& raw, int threads, std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  raw.validate();
  FitResult res;
  const int p = raw.p();
  const int n = raw.n();
  res.names = raw.column_names.empty() ? default_column_names(p) : raw.column_names;
  if (n <= p) res.warnings.push_back("n <= p: the fit is poorly determined");

  std::ostringstream bytes;
  write_csv(bytes, raw);
  res.data_hash = fnv1a_hex(bytes.str());
  res.config_hash = fnv1a_hex(config.to_json().dump());

  const Dataset data = config.center ? raw.centered() : raw;
  const BasisSystem system = BasisSystem::fit(config.basis, data);
  auto gm = std::make_shared<const GramMatrix>(gram(system, data, 1));
  res.sets = estimate_sets(config, data, system, &res.bootstrap, log);

  const std::vector<double> grid = config.lambda.resolve(p, n);
  const std::vector<VarianceMode> modes = regimes(config.mode);
  struct Cell {
    double lambda_sq;
    VarianceMode mode;
  };
  std::vector<Cell> cells;
  for (double l : grid)
    for (VarianceMode m : modes) cells.push_back({l, m});

  const int cell_workers = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  const int bnb_workers = std::max(1, threads / cell_workers);
  std::vector<std::optional<MipProblem>> problems(cells.size());
  std::vector<SolveReport> reports(cells.size());
  std::mutex log_mutex;
  parallel_for(static_cast<int>(cells.size()), cell_workers, [&](int i) {
    const Cell& c = cells[i];
    MipOptions mo;
    mo.mode = c.mode;
    mo.big_M = config.solver.big_M;
    mo.max_edges = config.solver.max_edges;
    mo.sets = res.sets;
    problems[i] = build(gm, c.lambda_sq, mo);
    SolveOptions so;
    so.tau_early = config.solver.tau_early.value_or(default_tau_early(c.lambda_sq, p));
    so.time_limit = config.solver.time_limit.value_or(60.0 * p);
    if (config.solver.node_limit) so.node_limit = *config.solver.node_limit;
    so.workers = bnb_workers;
    reports[i] = solve(*problems[i], so);
    if (log) {
      std::lock_guard lock(log_mutex);
      *log << "lambda^2=" << format_number(c.lambda_sq) << " " << to_string(c.mode)
           << ": objective=" << format_number(reports[i].incumbent.objective)
           << " gap=" << format_number(reports[i].gap) << " " << to_string(reports[i].termination) << "\n";
    }
  });

  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SolveReport& rep = reports[i];
    GridRow row;
    row.lambda_sq = cells[i].lambda_sq;
    row.mode = cells[i].mode;
    row.objective = rep.incumbent.objective;
    row.lower_bound = rep.lower_bound;
    row.gap = rep.gap;
    row.graph = rep.incumbent.g;
    row.edges = rep.incumbent.g.edge_count();
    row.nodes = rep.nodes;
    row.termination = rep.termination;
    row.time = rep.wall_time;
    row.bic = row.mode == VarianceMode::Unequal ? bic_unequal(rep.incumbent.gamma, row.graph, *gm, n)
                                                : bic_equal(rep.incumbent.gamma, row.graph, *gm, n);
    if (row.timed_out())
      res.warnings.push_back("time limit reached at lambda^2=" + format_number(row.lambda_sq) + " (" +
                             to_string(row.mode) + ")");
    res.table.push_back(std::move(row));
  }

  for (std::size_t i = 1; i < res.table.size(); ++i)
    if (res.table[i].bic < res.table[res.chosen].bic) res.chosen = i;
  const GridRow& best = res.table[res.chosen];
  ExtractedModel model = extract_graph(reports[res.chosen], *problems[res.chosen]);
  res.graph = std::move(model.dag);
  res.theta = std::move(model.theta);
  res.mode = best.mode;
  res.lambda_sq = best.lambda_sq;
  res.bic = best.bic;
  res.wall_time = seconds_since(t0);
  return res;
}

FitResult fit_file(const FitConfig& config, const std::string& csv_path, int threads, std::ostream* log) {
  return fit(config, read_csv_file(csv_path), threads, log);
}

void simulate(const SemSpec& spec, int n, std::uint64_t seed, const std::string& csv_path,
              const std::string& truth_path) {
  if (n < 1) throw InvalidInput("simulate: n must be positive");
  const Dataset data = sample(spec, n, seed);
  write_csv_file(csv_path, data);
  std::ofstream out(truth_path);
  if (!out) throw InvalidInput("cannot write '" + truth_path + "'");
  out << to_graph_json(spec.dag().adjacency()).dump(2) << "\n";
}

bool CertifyReport::pass() const {
  return !cases.empty() && std::all_of(cases.begin(), cases.end(), [](const CertifyCase& c) { return c.pass; });
}

json CertifyReport::to_json() const {
  json rows = json::array();
  for (const CertifyCase& c : cases) {
    rows.push_back({{"lambda_sq", c.lambda_sq},
                    {"regime", to_string(c.mode)},
                    {"solver_score", c.solver_score},
                    {"oracle_score", c.oracle_score},
                    {"delta", c.delta},
                    {"margin", c.margin},
                    {"same_edges", c.same_edges},
                    {"tau_early", c.tau_early},
                    {"result", c.pass ? "PASS" : "FAIL"}});
  }
  return {{"cases", rows}, {"result", pass() ? "PASS" : "FAIL"}};
}

CertifyReport certify(const FitConfig& config, const Dataset& raw) {
  config.validate();
  raw.validate();
  const int p = raw.p();
  if (p > kMaxEnumerationSize) throw SizeError("certify: exact enumeration needs p <= 5");
  const Dataset data = config.center ? raw.centered() : raw;
  const BasisSystem system = BasisSystem::fit(config.basis, data);
  auto gm = std::make_shared<const GramMatrix>(gram(system, data, 1));
  const ConstraintSets sets = estimate_sets(config, data, system);

  CertifyReport report;
  for (double l : config.lambda.resolve(p, raw.n())) {
    for (VarianceMode m : regimes(config.mode)) {
      MipOptions mo;
      mo.mode = m;
      mo.big_M = config.solver.big_M;
      mo.max_edges = config.solver.max_edges;
      mo.sets = sets;
      const MipProblem problem = build(gm, l, mo);
      SolveOptions so;
      so.tau_early = config.solver.tau_early.value_or(0.0);
      so.time_limit = config.solver.time_limit.value_or(60.0 * p);
      const SolveReport rep = solve(problem, so);
      const OracleResult orc = exact_search(problem);
      CertifyCase c;
      c.lambda_sq = l;
      c.mode = m;
      c.solver_score = rep.incumbent.objective;
      c.oracle_score = orc.score;
      c.delta = c.solver_score - c.oracle_score;
      c.margin = orc.margin;
      c.same_edges = rep.incumbent.g == orc.best;
      c.tau_early = so.tau_early;
      const double tol = 1e-6 * std::max(1.0, std::abs(orc.score));
      c.pass = c.delta >= -tol && c.delta <= c.tau_early + tol;
      report.cases.push_back(c);
    }
  }
  return report;
}

json metrics_json(const EdgeMatrix& estimate, const EdgeMatrix& truth) {
  const ShdBreakdown b = compare_graphs(estimate, truth);
  return {{"shd", b.shd}, {"extra", b.extra}, {"missing", b.missing}, {"reversed", b.reversed}, {"exact", b.exact}};
}

void write_grid_csv(std::ostream& out, const std::vector<GridRow>& table, const EdgeMatrix* truth) {
  out << "lambda_sq,regime,bic,shd,gap,time\n";
  for (const GridRow& r : table) {
    out << format_number(r.lambda_sq) << ',' << to_string(r.mode) << ',' << format_number(r.bic) << ',';
    if (truth) out << shd(r.graph, *truth);
    out << ',' << format_number(r.gap) << ',' << format_number(r.time) << '\n';
  }
}

std::vector<GridRow> grid_from_json(const json& result) {
  try {
    std::vector<GridRow> rows;
    for (const json& r : result.at("table")) {
      GridRow row;
      row.lambda_sq = r.at("lambda_sq").get<double>();
      row.mode = parse_variance_mode(r.at("regime").get<std::string>());
      row.bic = r.at("bic").get<double>();
      row.objective = r.value("objective", 0.0);
      row.lower_bound = r.value("lower_bound", 0.0);
      row.gap = r.at("gap").is_null() ? std::numeric_limits<double>::infinity() : r.at("gap").get<double>();
      row.edges = r.value("edges", 0);
      row.nodes = r.value("nodes", std::int64_t{0});
      row.termination = parse_termination(r.value("termination", std::string("optimal")));
      row.time = r.contains("time") ? r["time"].get<double>() : 0.0;
      row.graph = matrix_from_json(r.at("graph"));
      rows.push_back(std::move(row));
    }
    return rows;
  } catch (const json::exception& ex) {
    throw InvalidInput(std::string("fit result: ") + ex.what());
  }
}

void write_trial_csv(std::ostream& out, const std::vector<TrialRecord>& trials) {
  out << "n,method,recovery_rate,shd\n";
  struct Acc {
    int count = 0;
    int exact = 0;
    long shd = 0;
  };
  std::map<std::pair<int, std::string>, Acc> groups;
  for (const TrialRecord& t : trials) {
    Acc& a = groups[{t.n, t.method}];
    ++a.count;
    a.exact += t.exact;
    a.shd += t.shd;
  }
  for (const auto& [key, a] : groups) {
    out << key.first << ',' << key.second << ',' << format_number(static_cast<double>(a.exact) / a.count) << ','
        << format_number(static_cast<double>(a.shd) / a.count) << '\n';
  }
}

std::vector<TrialRecord> trials_from_json(const json& j) {
  try {
    std::vector<TrialRecord> out;
    const json& list = j.is_object() ? j.at("trials") : j;
    for (const json& t : list) {
      TrialRecord r;
      r.n = t.at("n").get<int>();
      r.method = t.at("method").get<std::string>();
      r.shd = t.at("shd").get<int>();
      r.exact = t.contains("exact") ? t["exact"].get<bool>() : r.shd == 0;
      out.push_back(std::move(r));
    }
    return out;
  } catch (const json::exception& ex) {
    throw InvalidInput(std::string("trial batch: ") + ex.what());
  }
}

}  // namespace dagmip
