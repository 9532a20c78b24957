#include "dagmip/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <thread>

#include "dagmip/error.hpp"
#include "dagmip/priors.hpp"
#include "dagmip/qp.hpp"

namespace dagmip {

namespace {

EdgeStatus at(const NodeBounds& b, int p, int k, int j) { return b[static_cast<std::size_t>(k) * p + j]; }
void put(NodeBounds& b, int p, int k, int j, EdgeStatus s) { b[static_cast<std::size_t>(k) * p + j] = s; }

EdgeMatrix forced_support(const NodeBounds& b, int p) {
  EdgeMatrix m(p);
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (at(b, p, k, j) == EdgeStatus::Forced) m.set(k, j);
  return m;
}

}  // namespace

NodeBounds root_bounds(const MipProblem& problem) { return problem.status; }

bool presolve(const MipProblem& problem, NodeBounds& bounds) {
  const int p = problem.p;
  std::vector<std::vector<char>> reach(p, std::vector<char>(p, 0));
  int forced = 0;
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (at(bounds, p, k, j) == EdgeStatus::Forced) {
        reach[k][j] = 1;
        ++forced;
      }
  for (const auto& [k, j] : problem.partial_order.edges()) reach[k][j] = 1;
  for (int m = 0; m < p; ++m)
    for (int a = 0; a < p; ++a)
      if (reach[a][m])
        for (int b = 0; b < p; ++b)
          if (reach[m][b]) reach[a][b] = 1;
  for (int a = 0; a < p; ++a)
    if (reach[a][a]) return false;
  if (problem.max_edges && forced > *problem.max_edges) return false;
  const bool full = problem.max_edges && forced == *problem.max_edges;
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (at(bounds, p, k, j) == EdgeStatus::Free && (full || reach[j][k])) put(bounds, p, k, j, EdgeStatus::Excluded);
  return true;
}

// ---------------------------------------------------------------- relaxation

namespace {

struct RowVars {
  int j = 0;
  int d = -1;
  int t = -1;
  int c = -1;
  std::vector<int> w_var, w_col, w_parent;
  std::vector<std::pair<int, int>> g;  // (parent k, variable)
  int forced = 0;
  std::vector<std::pair<int, double>> start;
};

// Row j of the relaxation appended to `qp`; requires at least one free parent.
RowVars append_row(QpBuilder& qp, const MipProblem& prob, int j, const NodeBounds& bounds,
                   const std::vector<double>& cuts) {
  const Layout lay = prob.layout();
  const Eigen::MatrixXd& S = prob.gram->sigma;
  const double M = prob.big_M;
  const bool unequal = prob.mode == VarianceMode::Unequal;
  RowVars v;
  v.j = j;
  std::vector<int> vars, cols;
  if (unequal) {
    v.d = qp.add_variable();
    v.t = qp.add_variable();
    vars.push_back(v.d);
    cols.push_back(lay.x(j));
  }
  v.c = qp.add_variable();
  vars.push_back(v.c);
  cols.push_back(lay.constant());
  for (int k = 0; k < prob.p; ++k) {
    const EdgeStatus st = at(bounds, prob.p, k, j);
    if (st == EdgeStatus::Excluded) continue;
    int gv = -1;
    if (st == EdgeStatus::Free) {
      gv = qp.add_variable();
      v.g.emplace_back(k, gv);
      qp.add_linear(gv, prob.lambda_sq);
      qp.add_constraint({{gv, -1.0}}, 0.0);
      qp.add_constraint({{gv, 1.0}}, 1.0);
      v.start.emplace_back(gv, 0.5);
    } else {
      ++v.forced;
    }
    for (int r = 0; r < lay.R; ++r) {
      const int wv = qp.add_variable();
      v.w_var.push_back(wv);
      v.w_col.push_back(lay.basis(r, k));
      v.w_parent.push_back(k);
      vars.push_back(wv);
      cols.push_back(lay.basis(r, k));
      if (gv >= 0) {
        qp.add_constraint({{wv, 1.0}, {gv, -M}}, 0.0);
        qp.add_constraint({{wv, -1.0}, {gv, -M}}, 0.0);
      } else {
        qp.add_constraint({{wv, 1.0}}, M);
        qp.add_constraint({{wv, -1.0}}, M);
      }
    }
  }
  qp.add_constant(prob.lambda_sq * v.forced);

  // gamma' S gamma over the row's variables; equal mode pins gamma_jj = 1.
  for (std::size_t a = 0; a < vars.size(); ++a) {
    qp.add_quadratic(vars[a], vars[a], S(cols[a], cols[a]));
    for (std::size_t b = a + 1; b < vars.size(); ++b) qp.add_quadratic(vars[a], vars[b], 2.0 * S(cols[a], cols[b]));
  }
  if (!unequal) {
    qp.add_constant(S(lay.x(j), lay.x(j)));
    for (std::size_t a = 0; a < vars.size(); ++a) qp.add_linear(vars[a], 2.0 * S(lay.x(j), cols[a]));
  }

  // |c| <= M (forced + sum of free g)
  for (double sign : {1.0, -1.0}) {
    std::vector<std::pair<int, double>> row{{v.c, sign}};
    for (const auto& [k, gv] : v.g) row.emplace_back(gv, -M);
    qp.add_constraint(std::move(row), M * v.forced);
  }

  if (unequal) {
    qp.add_linear(v.t, 1.0);
    qp.add_constraint({{v.d, -1.0}}, -prob.eps_diag);
    qp.add_constraint({{v.d, 1.0}}, M);
    double t0 = -std::numeric_limits<double>::infinity();
    const double sjj = S(lay.x(j), lay.x(j));
    const double d0 = std::clamp(1.0 / std::sqrt(std::max(sjj, 1e-300)), 2.0 * prob.eps_diag, 0.5 * M);
    for (double x : cuts) {
      // t >= -2 log x - (2/x)(d - x)
      qp.add_constraint({{v.d, -2.0 / x}, {v.t, -1.0}}, 2.0 * std::log(x) - 2.0);
      t0 = std::max(t0, log_tangent(x, d0));
    }
    v.start.emplace_back(v.d, d0);
    v.start.emplace_back(v.t, t0 + 1.0);
  }
  return v;
}

// Tightest g consistent with the row's coefficients: ||w_k||_inf / M, topped up
// evenly when the intercept bound needs more.
std::vector<double> clean_indicators(const RowVars& v, const Eigen::VectorXd& x, const MipProblem& prob,
                                     const NodeBounds& bounds) {
  const int p = prob.p;
  std::vector<double> g(p, 0.0);
  for (int k = 0; k < p; ++k)
    if (at(bounds, p, k, v.j) == EdgeStatus::Forced) g[k] = 1.0;
  double free_sum = 0.0;
  for (const auto& [k, gv] : v.g) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.w_var.size(); ++i)
      if (v.w_parent[i] == k) m = std::max(m, std::abs(x[v.w_var[i]]));
    g[k] = std::min(1.0, m / prob.big_M);
    free_sum += g[k];
  }
  const double need = std::abs(x[v.c]) / prob.big_M - v.forced - free_sum;
  if (need > 0.0 && !v.g.empty()) {
    const double share = need / v.g.size();
    for (const auto& [k, gv] : v.g) g[k] = std::min(1.0, g[k] + share);
  }
  return g;
}

Eigen::VectorXd row_gamma(const RowVars& v, const Eigen::VectorXd& x, const MipProblem& prob) {
  const Layout lay = prob.layout();
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(lay.dim());
  gamma[lay.x(v.j)] = v.d >= 0 ? x[v.d] : 1.0;
  gamma[lay.constant()] = x[v.c];
  for (std::size_t i = 0; i < v.w_var.size(); ++i) gamma[v.w_col[i]] = x[v.w_var[i]];
  return gamma;
}

bool has_free_parent(const NodeBounds& bounds, int p, int j) {
  for (int k = 0; k < p; ++k)
    if (at(bounds, p, k, j) == EdgeStatus::Free) return true;
  return false;
}

constexpr int kMaxRefinements = 60;

bool add_cut(std::vector<double>& cuts, double d, double t, double tol) {
  if (log_tangent(d, d) - t <= tol) return false;
  for (double x : cuts)
    if (std::abs(x - d) <= 1e-13 * std::max(1.0, d)) return false;
  cuts.push_back(d);
  return true;
}

}  // namespace

RelaxationEngine::RelaxationEngine(const MipProblem& problem, double tol) : problem_(problem), tol_(tol) {
  if (!problem_.gram) throw InvalidInput("relaxation: problem has no Gram matrix");
}

std::int64_t RelaxationEngine::qp_solves() const {
  std::lock_guard lock(mutex_);
  return qp_solves_;
}

std::vector<double> RelaxationEngine::initial_cuts(int j) const {
  const double sjj = problem_.gram->sigma(j, j);
  std::vector<double> cuts{problem_.eps_diag, problem_.big_M};
  const double mid = 1.0 / std::sqrt(std::max(sjj, 1e-300));
  if (mid > problem_.eps_diag && mid < problem_.big_M) cuts.push_back(mid);
  return cuts;
}

RelaxationEngine::RowResult RelaxationEngine::solve_row(int j, const NodeBounds& bounds,
                                                        std::vector<double> cuts) const {
  const bool unequal = problem_.mode == VarianceMode::Unequal;
  RowResult out;
  for (int round = 0;; ++round) {
    QpBuilder qp;
    const RowVars v = append_row(qp, problem_, j, bounds, cuts);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(qp.size());
    for (auto [idx, val] : v.start) x0[idx] = val;
    const QpResult res = solve_qp(qp, x0);
    {
      std::lock_guard lock(mutex_);
      ++qp_solves_;
    }
    if (unequal && round < kMaxRefinements && add_cut(cuts, res.x[v.d], res.x[v.t], tol_)) continue;
    out.lower_bound = res.lower_bound;
    out.g = clean_indicators(v, res.x, problem_, bounds);
    out.gamma = row_gamma(v, res.x, problem_);
    out.cuts = std::move(cuts);
    return out;
  }
}

RelaxationResult RelaxationEngine::solve_coupled(const NodeBounds& bounds, const std::vector<RowResult>& rows,
                                                 const std::vector<bool>& closed) const {
  const int p = problem_.p;
  const bool unequal = problem_.mode == VarianceMode::Unequal;
  std::vector<std::vector<double>> cuts(p);
  for (int j = 0; j < p; ++j) cuts[j] = rows[j].cuts;
  for (int round = 0;; ++round) {
    QpBuilder qp;
    std::vector<RowVars> vars(p);
    for (int j = 0; j < p; ++j)
      if (!closed[j]) vars[j] = append_row(qp, problem_, j, bounds, cuts[j]);
    std::vector<int> psi(p);
    for (int j = 0; j < p; ++j) {
      psi[j] = qp.add_variable();
      qp.add_constraint({{psi[j], -1.0}}, -1.0);
      qp.add_constraint({{psi[j], 1.0}}, static_cast<double>(p));
    }
    std::vector<std::pair<int, double>> card;
    int forced_total = 0;
    for (int j = 0; j < p; ++j) {
      for (int k = 0; k < p; ++k) {
        const EdgeStatus st = at(bounds, p, k, j);
        if (st == EdgeStatus::Forced) {
          ++forced_total;
          qp.add_constraint({{psi[k], 1.0}, {psi[j], -1.0}}, -1.0);
        }
      }
      for (const auto& [k, gv] : vars[j].g) {
        // 1 - p + p g <= psi_j - psi_k
        qp.add_constraint({{gv, static_cast<double>(p)}, {psi[k], 1.0}, {psi[j], -1.0}}, p - 1.0);
        card.emplace_back(gv, 1.0);
      }
    }
    for (const auto& [k, j] : problem_.partial_order.edges())
      qp.add_constraint({{psi[k], 1.0}, {psi[j], -1.0}}, -problem_.eps_order);
    if (problem_.max_edges && !card.empty())
      qp.add_constraint(std::move(card), static_cast<double>(*problem_.max_edges - forced_total));

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(qp.size());
    for (int j = 0; j < p; ++j)
      for (auto [idx, val] : vars[j].start) x0[idx] = val;
    for (int j = 0; j < p; ++j) x0[psi[j]] = 0.5 * (1.0 + p);
    const QpResult res = solve_qp(qp, x0);
    {
      std::lock_guard lock(mutex_);
      ++qp_solves_;
    }
    bool refined = false;
    if (unequal && round < kMaxRefinements)
      for (int j = 0; j < p; ++j)
        if (!closed[j]) refined |= add_cut(cuts[j], res.x[vars[j].d], res.x[vars[j].t], tol_);
    if (refined) continue;

    RelaxationResult out;
    out.coupled = true;
    out.lower_bound = res.lower_bound;
    out.g = Eigen::MatrixXd::Zero(p, p);
    out.gamma = Eigen::MatrixXd::Zero(p, problem_.layout().dim());
    out.cuts.points = cuts;
    for (int j = 0; j < p; ++j) {
      if (closed[j]) {
        out.lower_bound += rows[j].lower_bound;
        for (int k = 0; k < p; ++k) out.g(k, j) = rows[j].g[k];
        out.gamma.row(j) = rows[j].gamma.transpose();
        continue;
      }
      const std::vector<double> g = clean_indicators(vars[j], res.x, problem_, bounds);
      for (int k = 0; k < p; ++k) out.g(k, j) = g[k];
      out.gamma.row(j) = row_gamma(vars[j], res.x, problem_).transpose();
    }
    return out;
  }
}

RelaxationResult RelaxationEngine::solve(const NodeBounds& bounds, const CutPool& inherited) {
  const int p = problem_.p;
  const Layout lay = problem_.layout();
  std::vector<RowResult> rows(p);
  std::vector<bool> closed(p, false);
  for (int j = 0; j < p; ++j) {
    std::vector<std::int8_t> key(p);
    for (int k = 0; k < p; ++k) key[k] = static_cast<std::int8_t>(at(bounds, p, k, j));
    auto memo_key = std::make_pair(j, key);
    closed[j] = !has_free_parent(bounds, p, j);
    {
      std::lock_guard lock(mutex_);
      if (auto it = memo_.find(memo_key); it != memo_.end()) {
        rows[j] = it->second;
        continue;
      }
    }
    RowResult row;
    if (closed[j]) {
      std::vector<int> parents;
      for (int k = 0; k < p; ++k)
        if (at(bounds, p, k, j) == EdgeStatus::Forced) parents.push_back(k);
      const NodeFit fit = fit_node(*problem_.gram, j, parents);
      row.lower_bound = node_score(fit, problem_.mode) + problem_.lambda_sq * static_cast<double>(parents.size());
      row.g.assign(p, 0.0);
      for (int k : parents) row.g[k] = 1.0;
      row.gamma = Eigen::VectorXd::Zero(lay.dim());
      const double d = problem_.mode == VarianceMode::Unequal ? 1.0 / std::sqrt(fit.omega) : 1.0;
      row.gamma[lay.x(j)] = d;
      for (std::size_t u = 0; u < fit.columns.size(); ++u) row.gamma[fit.columns[u]] = -d * fit.coefficients[u];
    } else {
      std::vector<double> cuts = initial_cuts(j);
      if (j < static_cast<int>(inherited.points.size()))
        for (double x : inherited.points[j])
          if (std::find(cuts.begin(), cuts.end(), x) == cuts.end()) cuts.push_back(x);
      if (problem_.mode == VarianceMode::Equal) cuts.clear();
      row = solve_row(j, bounds, std::move(cuts));
    }
    std::lock_guard lock(mutex_);
    rows[j] = memo_.emplace(std::move(memo_key), std::move(row)).first->second;
  }

  RelaxationResult out;
  out.lower_bound = 0.0;
  out.g = Eigen::MatrixXd::Zero(p, p);
  out.gamma = Eigen::MatrixXd::Zero(p, lay.dim());
  out.cuts.points.resize(p);
  for (int j = 0; j < p; ++j) {
    out.lower_bound += rows[j].lower_bound;
    for (int k = 0; k < p; ++k) out.g(k, j) = rows[j].g[k];
    out.gamma.row(j) = rows[j].gamma.transpose();
    out.cuts.points[j] = rows[j].cuts;
  }
  const bool card_ok = !problem_.max_edges || out.g.sum() <= *problem_.max_edges + 1e-9;
  if (card_ok && layer_feasible(problem_, out.g)) return out;
  return solve_coupled(bounds, rows, closed);
}

RelaxationResult solve_relaxation(const MipProblem& problem, const NodeBounds& bounds, const CutPool& cuts, double tol) {
  NodeBounds b = bounds;
  if (b.size() != problem.status.size()) throw InvalidInput("solve_relaxation: bounds have the wrong size");
  if (!presolve(problem, b)) {
    RelaxationResult r;
    r.feasible = false;
    return r;
  }
  RelaxationEngine engine(problem, tol);
  return engine.solve(b, cuts);
}

// ---------------------------------------------------------------- branching

Edge branching_edge(const NodeBounds& bounds, const Eigen::MatrixXd& g, int p) {
  Edge best{-1, -1};
  double score = -1.0;
  Edge first{-1, -1};
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j) {
      if (at(bounds, p, k, j) != EdgeStatus::Free) continue;
      if (first.first < 0) first = {k, j};
      const double frac = std::min(g(k, j), 1.0 - g(k, j));
      if (frac > kIntegralTol && frac > score) {
        score = frac;
        best = {k, j};
      }
    }
  if (first.first < 0) throw InvalidInput("branch: node has no free edge");
  return best.first >= 0 ? best : first;
}

std::pair<BnbNode, BnbNode> branch(const BnbNode& node, int p) {
  const Edge e = branching_edge(node.bounds, node.g, p);
  BnbNode zero, one;
  for (BnbNode* child : {&zero, &one}) {
    child->depth = node.depth + 1;
    child->bounds = node.bounds;
    child->cuts = node.cuts;
    child->lower_bound = node.lower_bound;
  }
  put(zero.bounds, p, e.first, e.second, EdgeStatus::Excluded);
  put(one.bounds, p, e.first, e.second, EdgeStatus::Forced);
  return {std::move(zero), std::move(one)};
}

// ---------------------------------------------------------------- search

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Optimal: return "optimal";
    case Termination::EarlyStop: return "early_stop";
    case Termination::TimeLimit: return "time_limit";
    case Termination::NodeLimit: return "node_limit";
  }
  return "unknown";
}

nlohmann::json SolveReport::to_json(bool include_timing) const {
  nlohmann::json j;
  j["objective"] = incumbent.objective;
  j["lower_bound"] = lower_bound;
  j["gap"] = gap;
  j["nodes"] = nodes;
  j["termination"] = to_string(termination);
  j["graph"] = to_graph_json(incumbent.g);
  if (include_timing) j["wall_time"] = wall_time;
  return j;
}

double default_tau_early(double lambda_sq, int p) {
  return p >= 3 ? 0.1 * lambda_sq / std::log(static_cast<double>(p)) : 0.0;
}

namespace {

struct NodeOrder {
  // priority_queue keeps the "largest" on top: smaller bound, then deeper, then older.
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.lower_bound != b.lower_bound) return a.lower_bound > b.lower_bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

}  // namespace

SolveReport solve(const MipProblem& problem, const SolveOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  if (!(options.tau_early >= 0.0)) throw InvalidInput("solve: tau_early must be >= 0");
  if (!(options.time_limit > 0.0)) throw InvalidInput("solve: time limit must be positive");
  const int p = problem.p;
  const double lambda_sq = problem.lambda_sq;

  ScoreCache scores(*problem.gram, problem.mode);
  RelaxationEngine engine(problem, options.relax_tol);

  std::mutex mutex;
  std::condition_variable cv;
  std::vector<BnbNode> open;
  EdgeMatrix best_g(p);
  double best_obj = std::numeric_limits<double>::infinity();
  double pruned_lb = std::numeric_limits<double>::infinity();
  std::int64_t explored = 0;
  std::int64_t next_id = 0;
  int active = 0;
  bool stop = false;
  Termination reason = Termination::Optimal;
  nlohmann::json trace = nlohmann::json::array();

  const auto prune_tol = [&](double ub) { return std::max(options.tau_early, 1e-9 * std::max(1.0, std::abs(ub))); };
  const auto offer = [&](const EdgeMatrix& g) {
    if (problem.max_edges && g.edge_count() > *problem.max_edges) return;
    if (!is_acyclic(g)) return;
    const double s = scores.graph(g, lambda_sq);
    std::lock_guard lock(mutex);
    if (s < best_obj || (s == best_obj && g < best_g)) {
      best_obj = s;
      best_g = g;
    }
  };
  const auto record = [&](const BnbNode& n, const char* event, double ub) {
    if (!options.trace) return;
    trace.push_back({{"node", n.id}, {"depth", n.depth}, {"lb", n.lower_bound}, {"ub", ub}, {"event", event}});
  };

  // Evaluates the relaxation of a presolved node and tries its roundings as incumbents.
  const auto evaluate = [&](BnbNode& node, double parent_lb) {
    const RelaxationResult rel = engine.solve(node.bounds, node.cuts);
    node.lower_bound = std::max(rel.lower_bound, parent_lb);
    node.g = rel.g;
    node.cuts = rel.cuts;
    offer(forced_support(node.bounds, p));
    EdgeMatrix rounded(p);
    for (int k = 0; k < p; ++k)
      for (int j = 0; j < p; ++j)
        if (at(node.bounds, p, k, j) != EdgeStatus::Excluded && node.g(k, j) >= 0.5) rounded.set(k, j);
    offer(rounded);
  };

  if (options.greedy_start) offer(greedy_search(scores, lambda_sq, search_mask(problem)));

  BnbNode root;
  root.bounds = root_bounds(problem);
  if (!presolve(problem, root.bounds)) throw InfeasibleError("solve: forced edges and order pairs contain a cycle");
  root.id = next_id++;
  evaluate(root, -std::numeric_limits<double>::infinity());
  open.push_back(std::move(root));

  const auto worker = [&] {
    std::unique_lock lock(mutex);
    for (;;) {
      cv.wait(lock, [&] { return stop || !open.empty() || active == 0; });
      if (stop || open.empty()) break;
      std::pop_heap(open.begin(), open.end(), NodeOrder{});
      BnbNode node = std::move(open.back());
      open.pop_back();
      const double ub = best_obj;
      if (node.lower_bound >= ub - prune_tol(ub)) {
        pruned_lb = std::min(pruned_lb, node.lower_bound);
        record(node, "prune", ub);
        continue;
      }
      if (elapsed() >= options.time_limit || explored >= options.node_limit) {
        reason = elapsed() >= options.time_limit ? Termination::TimeLimit : Termination::NodeLimit;
        open.push_back(std::move(node));
        std::push_heap(open.begin(), open.end(), NodeOrder{});
        stop = true;
        cv.notify_all();
        break;
      }
      ++explored;
      ++active;
      const bool leaf = std::none_of(node.bounds.begin(), node.bounds.end(),
                                     [](EdgeStatus s) { return s == EdgeStatus::Free; });
      if (options.progress && explored % options.progress_every == 0) {
        *options.progress << "nodes=" << explored << " lower=" << node.lower_bound << " upper=" << ub
                          << " gap=" << ub - node.lower_bound << " time=" << elapsed() << "\n";
      }
      std::vector<BnbNode> children;
      if (!leaf) {
        auto [zero, one] = branch(node, p);
        zero.id = next_id++;
        one.id = next_id++;
        if (options.trace) {
          const Edge e = branching_edge(node.bounds, node.g, p);
          trace.push_back({{"node", node.id}, {"depth", node.depth}, {"lb", node.lower_bound}, {"ub", ub},
                           {"event", "branch"}, {"edge", {e.first + 1, e.second + 1}}});
        }
        lock.unlock();
        for (BnbNode* child : {&zero, &one}) {
          if (!presolve(problem, child->bounds)) {
            child->lower_bound = std::numeric_limits<double>::infinity();
            continue;
          }
          evaluate(*child, node.lower_bound);
        }
        lock.lock();
        for (BnbNode* child : {&zero, &one}) {
          if (!std::isfinite(child->lower_bound)) {
            record(*child, "infeasible", best_obj);
            continue;
          }
          if (child->lower_bound >= best_obj - prune_tol(best_obj)) {
            pruned_lb = std::min(pruned_lb, child->lower_bound);
            record(*child, "prune", best_obj);
            continue;
          }
          children.push_back(std::move(*child));
        }
      } else {
        record(node, "leaf", ub);
        pruned_lb = std::min(pruned_lb, node.lower_bound);
      }
      for (auto& c : children) {
        open.push_back(std::move(c));
        std::push_heap(open.begin(), open.end(), NodeOrder{});
      }
      --active;
      cv.notify_all();
    }
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SolveReport report;
  report.nodes = explored;
  double lb = std::min(best_obj, pruned_lb);
  for (const auto& n : open) lb = std::min(lb, n.lower_bound);
  const ProfileFit fit = profile_score(best_g, *problem.gram, lambda_sq, problem.mode);
  report.incumbent.g = best_g;
  report.incumbent.gamma = fit.gamma;
  report.incumbent.objective = fit.score;
  report.lower_bound = std::min(lb, fit.score);
  report.gap = fit.score - report.lower_bound;
  if (stop)
    report.termination = reason;
  else
    report.termination =
        report.gap <= 1e-6 * std::max(1.0, std::abs(fit.score)) ? Termination::Optimal : Termination::EarlyStop;
  report.trace = std::move(trace);
  report.wall_time = elapsed();
  return report;
}

ExtractedModel extract_graph(const SolveReport& report, const MipProblem& problem) {
  ExtractedModel out;
  out.dag = Dag(report.incumbent.g);
  const Eigen::MatrixXd means = basis_means(*problem.gram);
  if (problem.mode == VarianceMode::Unequal) {
    out.theta = gamma_to_theta(report.incumbent.gamma, &means);
  } else {
    const EqVarObjective eq = objective_eqvar(report.incumbent.gamma, *problem.gram, 0.0, report.incumbent.g);
    out.theta = eqvar_to_theta(report.incumbent.gamma, std::sqrt(eq.pooled_variance), &means);
  }
  return out;
}

}  // namespace dagmip
