#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dagmip/graph.hpp"
#include "dagmip/likelihood.hpp"
#include "dagmip/mip.hpp"

namespace dagmip {

using NodeBounds = std::vector<EdgeStatus>;  // p*p, (k, j) row-major

// Tangent points d_i of -2 log d, one list per row j.
struct CutPool {
  std::vector<std::vector<double>> points;
};

// Tangent of -2 log d at x evaluated at d; never above -2 log d.
inline double log_tangent(double x, double d) { return -2.0 * std::log(x) - 2.0 / x * (d - x); }

// Fixes g = 0 on every free pair whose edge would close a cycle through forced
// edges and order pairs, and every free pair once max_edges forced edges exist.
// Returns false if the node admits no integral completion.
bool presolve(const MipProblem& problem, NodeBounds& bounds);

NodeBounds root_bounds(const MipProblem& problem);

struct RelaxationResult {
  bool feasible = true;
  double lower_bound = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd g;      // p x p relaxed indicators
  Eigen::MatrixXd gamma;  // p x dim coefficient point
  CutPool cuts;
  bool coupled = false;   // layered/cardinality constraints were active
};

// Per-row decomposition of the node relaxation with a coupled fallback. Rows
// whose incoming edges are all fixed use the closed-form profile fit; the others
// solve a quadratic program in which each -2 log Gamma_jj is replaced by the
// maximum of its tangents, refined at the minimizer until the surrogate gap is
// at most tol. Row solutions are memoized by (row, incoming bounds).
class RelaxationEngine {
 public:
  explicit RelaxationEngine(const MipProblem& problem, double tol = 1e-9);

  // `bounds` must already be presolved.
  RelaxationResult solve(const NodeBounds& bounds, const CutPool& inherited);

  std::int64_t qp_solves() const;

 private:
  struct RowResult {
    double lower_bound = 0.0;
    std::vector<double> g;   // indexed by parent k
    Eigen::VectorXd gamma;   // dim
    std::vector<double> cuts;
  };

  RowResult solve_row(int j, const NodeBounds& bounds, std::vector<double> cuts) const;
  RelaxationResult solve_coupled(const NodeBounds& bounds, const std::vector<RowResult>& rows,
                                 const std::vector<bool>& closed) const;
  std::vector<double> initial_cuts(int j) const;

  const MipProblem& problem_;
  double tol_;
  mutable std::mutex mutex_;
  std::map<std::pair<int, std::vector<std::int8_t>>, RowResult> memo_;
  mutable std::int64_t qp_solves_ = 0;
};

// Stand-alone evaluation: presolves a copy of `bounds`; infeasible nodes return
// feasible = false.
RelaxationResult solve_relaxation(const MipProblem& problem, const NodeBounds& bounds, const CutPool& cuts = {},
                                  double tol = 1e-9);

struct BnbNode {
  std::int64_t id = 0;
  int depth = 0;
  NodeBounds bounds;
  double lower_bound = 0.0;
  Eigen::MatrixXd g;
  CutPool cuts;
};

inline constexpr double kIntegralTol = 1e-6;

// Most fractional free g (max of min(g, 1 - g)), ties to the smallest (k, j).
// When every free g is integral the first free pair is returned.
// Throws InvalidInput if the node has no free pair.
Edge branching_edge(const NodeBounds& bounds, const Eigen::MatrixXd& g, int p);
// (child with g = 0, child with g = 1); both inherit the cut pool.
std::pair<BnbNode, BnbNode> branch(const BnbNode& node, int p);

struct Incumbent {
  EdgeMatrix g;
  GammaMatrix gamma;
  double objective = std::numeric_limits<double>::infinity();
};

enum class Termination { Optimal, EarlyStop, TimeLimit, NodeLimit };
std::string to_string(Termination t);

struct SolveOptions {
  double tau_early = 0.0;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  std::int64_t node_limit = std::numeric_limits<std::int64_t>::max();
  int workers = 1;
  double relax_tol = 1e-9;
  bool greedy_start = true;
  std::ostream* progress = nullptr;
  std::int64_t progress_every = 1000;
  bool trace = false;
};

struct SolveReport {
  Incumbent incumbent;
  double lower_bound = -std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  std::int64_t nodes = 0;
  double wall_time = 0.0;
  Termination termination = Termination::Optimal;
  nlohmann::json trace = nlohmann::json::array();

  nlohmann::json to_json(bool include_timing = true) const;
};

// Best-first branch and bound; prunes a node once its bound is within
// max(tau_early, 1e-9 max(1, |upper|)) of the incumbent.
SolveReport solve(const MipProblem& problem, const SolveOptions& options = {});

// Default early-stopping threshold 0.1 lambda^2 / log p (p >= 3), else 0.
double default_tau_early(double lambda_sq, int p);

struct ExtractedModel {
  Dag dag;
  ModelTheta theta;
};
ExtractedModel extract_graph(const SolveReport& report, const MipProblem& problem);

}  // namespace dagmip
