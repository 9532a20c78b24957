#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dagmip/basis.hpp"
#include "dagmip/bnb.hpp"
#include "dagmip/dataset.hpp"
#include "dagmip/graph.hpp"
#include "dagmip/likelihood.hpp"
#include "dagmip/mip.hpp"
#include "dagmip/priors.hpp"
#include "dagmip/sem.hpp"

namespace dagmip {

inline constexpr const char* kVersion = "1.0.0";

// Explicit lambda^2 values, or scales c applied to p (log p)^2 / n.
struct LambdaGrid {
  std::vector<double> values;
  std::vector<double> scales{0.1, 0.25, 0.5, 1.0, 2.0, 4.0};

  std::vector<double> resolve(int p, int n) const;
  nlohmann::json to_json() const;
  static LambdaGrid from_json(const nlohmann::json& j);
};

enum class RegimeScope { Unequal, Equal, Auto };
std::string to_string(RegimeScope scope);
RegimeScope parse_regime_scope(const std::string& s);

struct PriorOptions {
  int bootstrap = 0;  // replicates; 0 disables the bootstrap
  double tau_super = 0.5;
  double tau_partial = 0.95;
  double tau_stable = 1.0;
  // Penalty of the greedy replicate learner; unset means log(n)/n.
  std::optional<double> learner_penalty;
  bool neighborhood = false;
  std::optional<double> neighborhood_reg;    // unset: size-target ladder
  std::optional<int> neighborhood_target;    // unordered pairs
  // User-supplied sets; exclusive with bootstrap and neighborhood selection.
  std::optional<nlohmann::json> sets;

  bool derives_sets() const { return bootstrap > 0 || neighborhood; }
  nlohmann::json to_json() const;
  static PriorOptions from_json(const nlohmann::json& j);
};

struct SolverConfig {
  std::optional<double> tau_early;   // unset: 0.1 lambda^2 / log p
  std::optional<double> time_limit;  // seconds per solve; unset: 60 p
  std::optional<int> max_edges;
  std::optional<std::int64_t> node_limit;
  double big_M = 0.0;  // <= 0: pilot estimate

  nlohmann::json to_json() const;
  static SolverConfig from_json(const nlohmann::json& j);
};

struct FitConfig {
  BasisConfig basis;
  LambdaGrid lambda;
  RegimeScope mode = RegimeScope::Auto;
  PriorOptions priors;
  SolverConfig solver;
  std::uint64_t seed = 0;
  bool center = true;  // subtract column means before fitting

  // Throws InvalidInput on an empty grid, misordered thresholds or a bad limit.
  void validate() const;
  nlohmann::json to_json() const;
  static FitConfig from_json(const nlohmann::json& j);
};

struct GridRow {
  double lambda_sq = 0.0;
  VarianceMode mode = VarianceMode::Unequal;
  double bic = 0.0;
  double objective = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  int edges = 0;
  std::int64_t nodes = 0;
  Termination termination = Termination::Optimal;
  double time = 0.0;
  EdgeMatrix graph;

  bool timed_out() const { return termination == Termination::TimeLimit; }
};

struct FitResult {
  Dag graph;
  ModelTheta theta;
  std::vector<std::string> names;
  VarianceMode mode = VarianceMode::Unequal;
  double lambda_sq = 0.0;
  double bic = 0.0;
  std::size_t chosen = 0;  // row of `table`
  std::vector<GridRow> table;
  ConstraintSets sets;
  std::optional<BootstrapReport> bootstrap;
  std::string config_hash;
  std::string data_hash;
  std::vector<std::string> warnings;
  double wall_time = 0.0;

  bool all_timed_out() const;
  std::string dot() const;
  nlohmann::json to_json(bool include_timing = true) const;
};

// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

// Worker threads from DAGMIP_THREADS, else 1.
int thread_budget();

// Bootstrap and neighborhood-selection sets for `data` (already centred if the
// config asks for it), or the user-supplied sets.
ConstraintSets estimate_sets(const FitConfig& config, const Dataset& data, const BasisSystem& system,
                             std::optional<BootstrapReport>* report = nullptr, std::ostream* log = nullptr);

// Basis, Gram matrix, optional priors, then one branch-and-bound solve per
// (lambda^2, regime) cell; the cell with the smallest BIC wins.
FitResult fit(const FitConfig& config, const Dataset& data, int threads = 1, std::ostream* log = nullptr);
FitResult fit_file(const FitConfig& config, const std::string& csv_path, int threads = 1,
                   std::ostream* log = nullptr);

// Writes the CSV sample and, next to it, the generating graph as graph JSON.
void simulate(const SemSpec& spec, int n, std::uint64_t seed, const std::string& csv_path,
              const std::string& truth_path);

struct CertifyCase {
  double lambda_sq = 0.0;
  VarianceMode mode = VarianceMode::Unequal;
  double solver_score = 0.0;
  double oracle_score = 0.0;
  double delta = 0.0;  // solver - oracle
  double margin = 0.0;
  bool same_edges = false;
  double tau_early = 0.0;
  bool pass = false;
};

struct CertifyReport {
  std::vector<CertifyCase> cases;
  bool pass() const;
  nlohmann::json to_json() const;
};

// Branch and bound (tau_early from the config, 0 if unset) against exact
// enumeration on the same Gram matrix and constraints, for every grid cell.
// A case passes iff -tol <= delta <= tau_early + tol, tol = 1e-6 max(1, |oracle|).
CertifyReport certify(const FitConfig& config, const Dataset& data);

nlohmann::json metrics_json(const EdgeMatrix& estimate, const EdgeMatrix& truth);

// Columns: lambda_sq,regime,bic,shd,gap,time. shd is empty without a truth graph.
void write_grid_csv(std::ostream& out, const std::vector<GridRow>& table, const EdgeMatrix* truth = nullptr);
// The "table" array of a FitResult JSON.
std::vector<GridRow> grid_from_json(const nlohmann::json& result);

struct TrialRecord {
  int n = 0;
  std::string method;
  bool exact = false;
  int shd = 0;
};

// Columns: n,method,recovery_rate,shd (mean), one row per (n, method) in
// ascending order.
void write_trial_csv(std::ostream& out, const std::vector<TrialRecord>& trials);
std::vector<TrialRecord> trials_from_json(const nlohmann::json& j);

}  // namespace dagmip
