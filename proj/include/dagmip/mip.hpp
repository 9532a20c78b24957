#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dagmip/basis.hpp"
#include "dagmip/graph.hpp"
#include "dagmip/likelihood.hpp"

namespace dagmip {

enum class EdgeStatus : std::int8_t { Excluded = -1, Free = 0, Forced = 1 };

// Superstructure E_o, partial order E_p and stable set E_s with E_s <= E_p <= E_o.
struct ConstraintSets {
  std::optional<EdgeSet> superstructure;  // unset: every ordered pair
  EdgeSet partial_order;
  EdgeSet stable;

  // Throws InvalidInput on a nesting violation, CycleError if E_p or E_s is cyclic.
  void validate(int p) const;
  nlohmann::json to_json() const;
  static ConstraintSets from_json(const nlohmann::json& j, int p);
};

struct FixedVariable {
  Edge edge;
  int value = 0;
  std::string reason;
};

struct MipOptions {
  VarianceMode mode = VarianceMode::Unequal;
  // <= 0 requests the pilot estimate.
  double big_M = 0.0;
  std::optional<int> max_edges;
  ConstraintSets sets;
};

inline constexpr double kEpsDiag = 1e-6;
inline constexpr double kEpsOrder = 1.0;

// Immutable once built; shared read-only by solver workers.
struct MipProblem {
  std::shared_ptr<const GramMatrix> gram;
  int p = 0;
  int R = 0;
  double lambda_sq = 0.0;
  double big_M = 1.0;
  VarianceMode mode = VarianceMode::Unequal;
  std::vector<EdgeStatus> status;  // p*p, row-major (k, j); diagonal Excluded
  EdgeSet superstructure;
  EdgeSet partial_order;
  EdgeSet stable;
  std::optional<int> max_edges;
  std::vector<FixedVariable> fixed;
  double eps_diag = kEpsDiag;
  double eps_order = kEpsOrder;

  EdgeStatus edge(int k, int j) const { return status[static_cast<std::size_t>(k) * p + j]; }
  void set_edge(int k, int j, EdgeStatus s) { status[static_cast<std::size_t>(k) * p + j] = s; }
  int binary_count() const;
  int forced_count() const;
  Layout layout() const { return {p, R}; }

  // One constraint per line, 1-indexed names.
  std::string debug_listing() const;
  // {"index": {"type": "continuous|binary", "meaning": ...}} over the full formulation.
  nlohmann::json variable_map() const;
};

// Pilot fit on the complete (cyclic) support; M = max(1, 2 max |Gamma_hat|).
double estimate_big_M(const GramMatrix& gram, double lambda_sq, VarianceMode mode);

MipProblem build(std::shared_ptr<const GramMatrix> gram, double lambda_sq, const MipOptions& options = {});

// Fixes g = 0 for every pair outside e_super.
MipProblem apply_superstructure(MipProblem problem, const EdgeSet& e_super);
// Adds psi_j - psi_k >= eps_order for each (k, j); e_p must be acyclic and inside E_o.
MipProblem apply_partial_order(MipProblem problem, const EdgeSet& e_p);
// Fixes g = 1 for each listed edge; e_s must be inside E_p.
MipProblem apply_stable_set(MipProblem problem, const EdgeSet& e_s);

// Whether some psi in [1,p]^p satisfies 1 - p + p g_kj <= psi_j - psi_k on every
// candidate edge and psi_j - psi_k >= eps_order on every order pair. `g` is p x p.
bool layer_feasible(const MipProblem& problem, const Eigen::MatrixXd& g, double tol = 1e-9);

// Feasible layer values for the same system (longest-path potentials), if any.
std::optional<Eigen::VectorXd> layer_values(const MipProblem& problem, const Eigen::MatrixXd& g, double tol = 1e-9);

}  // namespace dagmip
