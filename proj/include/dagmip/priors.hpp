#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dagmip/basis.hpp"
#include "dagmip/dataset.hpp"
#include "dagmip/graph.hpp"
#include "dagmip/likelihood.hpp"
#include "dagmip/mip.hpp"

namespace dagmip {

// Restrictions honoured by the greedy search. Empty matrices mean "none".
struct SearchMask {
  EdgeMatrix allowed;  // default: every off-diagonal pair
  EdgeMatrix forced;   // always present
  EdgeMatrix order;    // (k, j): no directed path j ~> k may appear
  std::optional<int> max_edges;
};

SearchMask search_mask(const MipProblem& problem);

// Forward hill-climb from the forced edges (best single addition that keeps the
// graph acyclic), then a backward pass dropping any non-forced edge whose removal
// lowers the score. Ties go to the lexicographically smallest (k, j).
EdgeMatrix greedy_search(const ScoreCache& scores, double lambda_sq, const SearchMask& mask = {});

// Gram matrix of `data` under `system`, then greedy_search with unequal variances.
Dag greedy_baseline(const Dataset& data, const BasisSystem& system, double penalty);

// BIC-rate penalty log(n) / n.
double bic_rate(int n);

struct GroupLassoNode {
  std::vector<int> active;           // neighbours with nonzero group
  std::vector<double> group_norms;   // per node (0 for j itself), original scale
  std::vector<Eigen::VectorXd> coefficients;  // per node, R original-scale slopes
  double reg = 0.0;
  double max_inactive_gradient = 0.0;
  double max_stationarity_residual = 0.0;
  int iterations = 0;
};

struct GroupLassoFit {
  std::vector<GroupLassoNode> nodes;
  double reg = 0.0;
  EdgeSet edges;  // OR-rule, both orientations
};

struct GroupLassoOptions {
  double tol = 1e-6;
  int max_iterations = 10000;
};

// Group lasso of X_j on the basis groups of every other variable, for each j.
// Columns are centred and scaled to unit empirical norm before penalization;
// the per-group penalty is reg * ||beta_group||_2 on the standardized scale with
// loss (1/2n)||y - Z beta||^2.
GroupLassoFit group_lasso(const Dataset& data, const BasisSystem& system, double reg,
                          const GroupLassoOptions& options = {});

// Concrete reg, or "auto": the smallest reg on a geometric ladder whose selected
// edge set has at most target_size unordered pairs.
struct AutoReg {
  int target_size = 0;
};
using RegChoice = std::variant<double, AutoReg>;

GroupLassoFit neighborhood_select(const Dataset& data, const BasisSystem& system, const RegChoice& reg,
                                  const GroupLassoOptions& options = {});

// A learner maps a data set to a DAG adjacency; may throw.
using Learner = std::function<EdgeMatrix(const Dataset&)>;

struct BootstrapReport {
  int B = 0;
  Eigen::MatrixXd proportions;  // p x p, zero diagonal
  std::vector<std::uint64_t> seeds;
  std::vector<int> failed;  // replicate indices whose learner threw
  std::vector<std::string> failures;

  void write_csv(std::ostream& out, const std::vector<std::string>& names = {}) const;
};

// Replicate b resamples the rows with an RNG seeded by seed + b. Runs replicates on
// up to `threads` workers; aborts with Error if more than 20% fail.
BootstrapReport bootstrap_proportions(const Dataset& data, int B, const Learner& learner, std::uint64_t seed,
                                      int threads = 1);

// E_o = {proportion >= tau_super} (union with `neighborhood` when given);
// E_p and E_s by sequential cycle-avoiding admission in decreasing proportion.
ConstraintSets build_sets(const BootstrapReport& report, double tau_super, double tau_partial, double tau_stable,
                          const std::optional<EdgeSet>& neighborhood = std::nullopt);

}  // namespace dagmip
