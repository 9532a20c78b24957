#include "dagmip/mip.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dagmip/error.hpp"

namespace dagmip {

void ConstraintSets::validate(int p) const {
  auto check_size = [p](const EdgeSet& s, const char* name) {
    if (s.size() != p && !(s.size() == 0 && s.empty()))
      throw InvalidInput(std::string(name) + ": node count does not match the data");
  };
  if (superstructure) check_size(*superstructure, "superstructure");
  check_size(partial_order, "partial order");
  check_size(stable, "stable set");
  if (!stable.empty() && !stable.is_subset_of(partial_order)) throw InvalidInput("stable set must be contained in the partial order");
  if (superstructure && !partial_order.empty() && !partial_order.is_subset_of(*superstructure))
    throw InvalidInput("partial order must be contained in the superstructure");
  if (!is_acyclic(partial_order)) throw CycleError("partial order is cyclic");
}

nlohmann::json ConstraintSets::to_json() const {
  nlohmann::json j;
  j["superstructure"] = superstructure ? to_graph_json(*superstructure) : nlohmann::json(nullptr);
  j["partial_order"] = to_graph_json(partial_order);
  j["stable"] = to_graph_json(stable);
  return j;
}

ConstraintSets ConstraintSets::from_json(const nlohmann::json& j, int p) {
  ConstraintSets sets;
  sets.partial_order = EdgeSet(p);
  sets.stable = EdgeSet(p);
  auto read = [p](const nlohmann::json& node) {
    EdgeSet s = edge_set_from_json(node);
    if (s.size() != p) throw InvalidInput("constraint set: node count does not match the data");
    return s;
  };
  if (j.contains("superstructure") && !j["superstructure"].is_null()) sets.superstructure = read(j["superstructure"]);
  if (j.contains("partial_order")) sets.partial_order = read(j["partial_order"]);
  if (j.contains("stable")) sets.stable = read(j["stable"]);
  return sets;
}

int MipProblem::binary_count() const {
  return static_cast<int>(std::count(status.begin(), status.end(), EdgeStatus::Free));
}

int MipProblem::forced_count() const {
  return static_cast<int>(std::count(status.begin(), status.end(), EdgeStatus::Forced));
}

namespace {

std::string gname(const Layout& lay, int col) {
  if (col < lay.p) return "X" + std::to_string(col + 1);
  if (col == lay.constant()) return "1";
  const int off = col - lay.p - 1;
  return "b" + std::to_string(off / lay.p + 1) + "(X" + std::to_string(off % lay.p + 1) + ")";
}

std::string edge_name(int k, int j) { return std::to_string(k + 1) + "," + std::to_string(j + 1); }

}  // namespace

std::string MipProblem::debug_listing() const {
  std::ostringstream out;
  const Layout lay = layout();
  out << "# p=" << p << " R=" << R << " mode=" << to_string(mode) << " lambda^2=" << lambda_sq << " M=" << big_M
      << " binaries=" << binary_count() << "\n";
  if (mode == VarianceMode::Unequal)
    out << "min sum_j -2 log G[j,X_j] + tr(G' G S) + lambda^2 sum g\n";
  else
    out << "min tr(B' B S) + lambda^2 sum g, B[j,X_j] = 1\n";
  for (const auto& fv : fixed) out << "g[" << edge_name(fv.edge.first, fv.edge.second) << "] = " << fv.value << "  # " << fv.reason << "\n";
  for (int j = 0; j < p; ++j) {
    if (mode == VarianceMode::Unequal)
      out << eps_diag << " <= G[" << j + 1 << "," << gname(lay, lay.x(j)) << "] <= " << big_M << "\n";
    std::string sum;
    for (int k = 0; k < p; ++k) {
      const EdgeStatus st = edge(k, j);
      if (st == EdgeStatus::Excluded) continue;
      const std::string g = st == EdgeStatus::Forced ? "1" : "g[" + edge_name(k, j) + "]";
      sum += (sum.empty() ? "" : " + ") + g;
      for (int r = 0; r < R; ++r)
        out << "-M*" << g << " <= G[" << j + 1 << "," << gname(lay, lay.basis(r, k)) << "] <= M*" << g << "\n";
      out << "1 - p + p*" << g << " <= psi[" << j + 1 << "] - psi[" << k + 1 << "]\n";
    }
    if (sum.empty())
      out << "G[" << j + 1 << ",1] = 0\n";
    else
      out << "-M*(" << sum << ") <= G[" << j + 1 << ",1] <= M*(" << sum << ")\n";
  }
  for (const auto& [k, j] : partial_order.edges())
    out << "psi[" << j + 1 << "] - psi[" << k + 1 << "] >= " << eps_order << "\n";
  out << "1 <= psi[j] <= " << p << "  for all j\n";
  if (max_edges) out << "sum g <= " << *max_edges << "\n";
  return out.str();
}

nlohmann::json MipProblem::variable_map() const {
  nlohmann::json map = nlohmann::json::object();
  const Layout lay = layout();
  int index = 0;
  auto add = [&](const char* type, const std::string& meaning) {
    map[std::to_string(index++)] = {{"type", type}, {"meaning", meaning}};
  };
  for (int j = 0; j < p; ++j) {
    if (mode == VarianceMode::Unequal) add("continuous", "G[" + std::to_string(j + 1) + "," + gname(lay, lay.x(j)) + "]");
    add("continuous", "G[" + std::to_string(j + 1) + ",1]");
    for (int k = 0; k < p; ++k) {
      if (edge(k, j) == EdgeStatus::Excluded) continue;
      for (int r = 0; r < R; ++r)
        add("continuous", "G[" + std::to_string(j + 1) + "," + gname(lay, lay.basis(r, k)) + "]");
    }
  }
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (edge(k, j) == EdgeStatus::Free) add("binary", "g[" + edge_name(k, j) + "]");
  for (int j = 0; j < p; ++j) add("continuous", "psi[" + std::to_string(j + 1) + "]");
  return map;
}

double estimate_big_M(const GramMatrix& gram, double lambda_sq, VarianceMode mode) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.sigma, Eigen::EigenvaluesOnly);
  const double scale = 1.0 + gram.sigma.diagonal().cwiseAbs().maxCoeff();
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-8 * scale)
    throw NumericalError("estimate_big_M: Gram matrix is not positive semidefinite");
  const int p = gram.p();
  EdgeMatrix complete(p);
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (k != j) complete.set(k, j);
  const ProfileFit pilot = profile_score(complete, gram, lambda_sq, mode);
  const double m = pilot.gamma.gamma.cwiseAbs().maxCoeff();
  if (!std::isfinite(m)) throw NumericalError("estimate_big_M: pilot fit diverged");
  return std::max(1.0, 2.0 * m);
}

MipProblem build(std::shared_ptr<const GramMatrix> gram, double lambda_sq, const MipOptions& options) {
  if (!gram) throw InvalidInput("build: missing Gram matrix");
  if (!(lambda_sq >= 0.0) || !std::isfinite(lambda_sq)) throw InvalidInput("build: lambda^2 must be finite and >= 0");
  MipProblem prob;
  prob.p = gram->p();
  prob.R = gram->R();
  prob.lambda_sq = lambda_sq;
  prob.mode = options.mode;
  options.sets.validate(prob.p);
  prob.status.assign(static_cast<std::size_t>(prob.p) * prob.p, EdgeStatus::Free);
  for (int j = 0; j < prob.p; ++j) prob.set_edge(j, j, EdgeStatus::Excluded);
  prob.superstructure = EdgeSet::complete(prob.p);
  prob.partial_order = EdgeSet(prob.p);
  prob.stable = EdgeSet(prob.p);
  if (options.max_edges) {
    if (*options.max_edges < 0) throw InvalidInput("build: max_edges must be >= 0");
    if (*options.max_edges < static_cast<int>(options.sets.stable.count()))
      throw InfeasibleError("build: stable set is larger than max_edges");
    prob.max_edges = options.max_edges;
  }
  prob.big_M = options.big_M > 0.0 ? options.big_M : estimate_big_M(*gram, lambda_sq, options.mode);
  prob.gram = std::move(gram);
  if (options.sets.superstructure) prob = apply_superstructure(std::move(prob), *options.sets.superstructure);
  if (!options.sets.partial_order.empty()) prob = apply_partial_order(std::move(prob), options.sets.partial_order);
  if (!options.sets.stable.empty()) prob = apply_stable_set(std::move(prob), options.sets.stable);
  return prob;
}

MipProblem apply_superstructure(MipProblem problem, const EdgeSet& e_super) {
  if (e_super.size() != problem.p) throw InvalidInput("superstructure: node count mismatch");
  if (!problem.partial_order.is_subset_of(e_super)) throw InvalidInput("partial order must be contained in the superstructure");
  for (int k = 0; k < problem.p; ++k)
    for (int j = 0; j < problem.p; ++j) {
      if (k == j || e_super.contains(k, j)) continue;
      if (problem.edge(k, j) == EdgeStatus::Excluded) continue;
      problem.set_edge(k, j, EdgeStatus::Excluded);
      problem.superstructure.erase(k, j);
      problem.fixed.push_back({{k, j}, 0, "outside superstructure"});
    }
  return problem;
}

MipProblem apply_partial_order(MipProblem problem, const EdgeSet& e_p) {
  if (e_p.size() != problem.p) throw InvalidInput("partial order: node count mismatch");
  if (!is_acyclic(e_p)) throw CycleError("partial order is cyclic");
  if (!e_p.is_subset_of(problem.superstructure)) throw InvalidInput("partial order must be contained in the superstructure");
  EdgeSet merged = problem.partial_order;
  for (const auto& [k, j] : e_p.edges()) merged.insert(k, j);
  if (!is_acyclic(merged)) throw CycleError("partial order is cyclic");
  problem.partial_order = std::move(merged);
  return problem;
}

MipProblem apply_stable_set(MipProblem problem, const EdgeSet& e_s) {
  if (e_s.size() != problem.p) throw InvalidInput("stable set: node count mismatch");
  if (!e_s.is_subset_of(problem.partial_order)) throw InvalidInput("stable set must be contained in the partial order");
  for (const auto& [k, j] : e_s.edges()) {
    if (problem.edge(k, j) == EdgeStatus::Forced) continue;
    problem.set_edge(k, j, EdgeStatus::Forced);
    problem.stable.insert(k, j);
    problem.fixed.push_back({{k, j}, 1, "stable set"});
  }
  if (problem.max_edges && problem.forced_count() > *problem.max_edges)
    throw InfeasibleError("stable set is larger than max_edges");
  return problem;
}

std::optional<Eigen::VectorXd> layer_values(const MipProblem& problem, const Eigen::MatrixXd& g, double tol) {
  const int p = problem.p;
  struct Arc {
    int from, to;
    double w;
  };
  std::vector<Arc> arcs;
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j) {
      const EdgeStatus st = problem.edge(k, j);
      if (st == EdgeStatus::Excluded) continue;
      const double gv = st == EdgeStatus::Forced ? 1.0 : g(k, j);
      arcs.push_back({k, j, 1.0 - p + p * gv});
    }
  for (const auto& [k, j] : problem.partial_order.edges()) arcs.push_back({k, j, problem.eps_order});
  // Longest-path potentials from a virtual source joined to every node with weight 0.
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(p);
  for (int round = 0; round <= p; ++round) {
    bool changed = false;
    for (const Arc& a : arcs) {
      if (dist[a.from] + a.w > dist[a.to] + tol) {
        dist[a.to] = dist[a.from] + a.w;
        changed = true;
      }
    }
    if (!changed) {
      if (dist.maxCoeff() > p - 1 + tol) return std::nullopt;
      return (dist.array() + 1.0).matrix();
    }
  }
  return std::nullopt;
}

bool layer_feasible(const MipProblem& problem, const Eigen::MatrixXd& g, double tol) {
  return layer_values(problem, g, tol).has_value();
}

}  // namespace dagmip
