#include "dagmip/priors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "dagmip/error.hpp"

namespace dagmip {

SearchMask search_mask(const MipProblem& problem) {
  SearchMask mask;
  mask.allowed = EdgeMatrix(problem.p);
  mask.forced = EdgeMatrix(problem.p);
  mask.order = EdgeMatrix(problem.p);
  for (int k = 0; k < problem.p; ++k)
    for (int j = 0; j < problem.p; ++j) {
      const EdgeStatus st = problem.edge(k, j);
      if (st != EdgeStatus::Excluded) mask.allowed.set(k, j);
      if (st == EdgeStatus::Forced) mask.forced.set(k, j);
    }
  for (const auto& [k, j] : problem.partial_order.edges()) mask.order.set(k, j);
  mask.max_edges = problem.max_edges;
  return mask;
}

namespace {

EdgeMatrix merged(const EdgeMatrix& a, const EdgeMatrix& b) {
  EdgeMatrix out = a;
  if (b.size() == 0) return out;
  for (const auto& [k, j] : b.edges()) out.set(k, j);
  return out;
}

std::vector<int> with_parent(std::vector<int> parents, int k) {
  parents.insert(std::lower_bound(parents.begin(), parents.end(), k), k);
  return parents;
}

std::vector<int> without_parent(std::vector<int> parents, int k) {
  parents.erase(std::find(parents.begin(), parents.end(), k));
  return parents;
}

}  // namespace

EdgeMatrix greedy_search(const ScoreCache& scores, double lambda_sq, const SearchMask& mask) {
  const int p = scores.gram().p();
  auto sized = [p](const EdgeMatrix& m) {
    if (m.size() != 0 && m.size() != p) throw InvalidInput("greedy_search: mask size mismatch");
    return m.size() == p;
  };
  const bool has_allowed = sized(mask.allowed);
  const bool has_forced = sized(mask.forced);
  const bool has_order = sized(mask.order);

  EdgeMatrix current = has_forced ? mask.forced : EdgeMatrix(p);
  const EdgeMatrix order = has_order ? mask.order : EdgeMatrix(p);
  if (!is_acyclic(merged(current, order))) throw InfeasibleError("greedy_search: forced edges conflict with the order");
  if (mask.max_edges && current.edge_count() > *mask.max_edges)
    throw InfeasibleError("greedy_search: more forced edges than max_edges");

  std::vector<double> node(p);
  for (int j = 0; j < p; ++j) node[j] = scores.node(j, current.parents(j));
  constexpr double kImprove = 1e-12;

  for (;;) {
    if (mask.max_edges && current.edge_count() >= *mask.max_edges) break;
    const EdgeMatrix blocked = merged(current, order);
    double best = -kImprove;
    Edge pick{-1, -1};
    for (int k = 0; k < p; ++k)
      for (int j = 0; j < p; ++j) {
        if (k == j || current(k, j) || (has_allowed && !mask.allowed(k, j))) continue;
        if (reachable(blocked, j, k)) continue;
        const double delta = scores.node(j, with_parent(current.parents(j), k)) - node[j] + lambda_sq;
        if (delta < best) {
          best = delta;
          pick = {k, j};
        }
      }
    if (pick.first < 0) break;
    current.set(pick.first, pick.second);
    node[pick.second] = scores.node(pick.second, current.parents(pick.second));
  }

  for (;;) {
    double best = -kImprove;
    Edge pick{-1, -1};
    for (const auto& [k, j] : current.edges()) {
      if (has_forced && mask.forced(k, j)) continue;
      const double delta = scores.node(j, without_parent(current.parents(j), k)) - node[j] - lambda_sq;
      if (delta < best) {
        best = delta;
        pick = {k, j};
      }
    }
    if (pick.first < 0) break;
    current.set(pick.first, pick.second, false);
    node[pick.second] = scores.node(pick.second, current.parents(pick.second));
  }
  return current;
}

double bic_rate(int n) {
  if (n < 2) throw InvalidInput("BIC rate needs n >= 2");
  return std::log(static_cast<double>(n)) / n;
}

Dag greedy_baseline(const Dataset& data, const BasisSystem& system, double penalty) {
  const GramMatrix g = gram(system, data);
  const ScoreCache scores(g, VarianceMode::Unequal);
  return Dag(greedy_search(scores, penalty));
}

// ---------------------------------------------------------------- group lasso

namespace {

// Standardized least-squares problem of one node, built from second moments:
// minimize 0.5 b'Qb - q'b + reg * sum_k ||b_k||.
struct LassoNodeProblem {
  int j = 0;
  std::vector<int> owners;                 // node owning each group
  std::vector<std::vector<int>> groups;    // local column indices per group
  std::vector<double> scale;               // 1 / sd of each local column
  std::vector<int> basis_index;            // r of each local column
  int R = 0;
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  std::vector<Eigen::MatrixXd> eigvec;
  std::vector<Eigen::VectorXd> eigval;
};

LassoNodeProblem prepare_node(const GramMatrix& g, int j) {
  const Layout& lay = g.layout;
  LassoNodeProblem lp;
  lp.j = j;
  lp.R = lay.R;
  std::vector<int> cols;
  const auto mean = [&](int c) { return g.sigma(lay.constant(), c); };
  const auto cov = [&](int a, int b) { return g.sigma(a, b) - mean(a) * mean(b); };
  double max_var = 0.0;
  for (int k = 0; k < lay.p; ++k)
    for (int r = 0; r < lay.R; ++r) max_var = std::max(max_var, cov(lay.basis(r, k), lay.basis(r, k)));
  for (int k = 0; k < lay.p; ++k) {
    if (k == j) continue;
    std::vector<int> group;
    for (int r = 0; r < lay.R; ++r) {
      const int c = lay.basis(r, k);
      const double v = cov(c, c);
      if (v <= 1e-14 * std::max(max_var, 1e-300)) continue;  // constant on the data
      group.push_back(static_cast<int>(cols.size()));
      cols.push_back(c);
      lp.scale.push_back(1.0 / std::sqrt(v));
      lp.basis_index.push_back(r);
    }
    if (group.empty()) continue;
    lp.owners.push_back(k);
    lp.groups.push_back(std::move(group));
  }
  const int m = static_cast<int>(cols.size());
  lp.Q.resize(m, m);
  lp.q.resize(m);
  for (int a = 0; a < m; ++a) {
    lp.q[a] = cov(cols[a], lay.x(j)) * lp.scale[a];
    for (int b = 0; b < m; ++b) lp.Q(a, b) = cov(cols[a], cols[b]) * lp.scale[a] * lp.scale[b];
  }
  for (const auto& grp : lp.groups) {
    Eigen::MatrixXd block(grp.size(), grp.size());
    for (std::size_t a = 0; a < grp.size(); ++a)
      for (std::size_t b = 0; b < grp.size(); ++b) block(a, b) = lp.Q(grp[a], grp[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
    lp.eigvec.push_back(eig.eigenvectors());
    lp.eigval.push_back(eig.eigenvalues().cwiseMax(0.0));
  }
  return lp;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

// argmin 0.5 b'Ab - c'b + reg ||b|| with A = V diag(lam) V'. Requires ||c|| > reg.
Eigen::VectorXd block_solve(const Eigen::MatrixXd& V, const Eigen::VectorXd& lam, const Eigen::VectorXd& c,
                            double reg) {
  const Eigen::VectorXd u = V.transpose() * c;
  const Eigen::VectorXd lam_r = (lam.array() + 1e-12).matrix();
  if (reg == 0.0) return V * u.cwiseQuotient(lam_r);
  // rho = ||b|| solves sum u_i^2 / (lam_i rho + reg)^2 = 1; the left side decreases in rho.
  auto phi = [&](double rho) { return (u.array() / (lam_r.array() * rho + reg)).square().sum() - 1.0; };
  double lo = 0.0, hi = 1.0;
  while (phi(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) > 0.0 ? lo : hi) = mid;
  }
  const double rho = 0.5 * (lo + hi);
  return V * (u.array() * rho / (lam_r.array() * rho + reg)).matrix();
}

struct KktReport {
  double inactive = 0.0;  // max (||grad|| - reg)_+ over zero groups
  double active = 0.0;    // max stationarity residual over nonzero groups
};

KktReport kkt(const LassoNodeProblem& lp, const Eigen::VectorXd& beta, double reg) {
  const Eigen::VectorXd grad = lp.q - lp.Q * beta;  // negative loss gradient
  KktReport rep;
  for (const auto& grp : lp.groups) {
    const Eigen::VectorXd bk = gather(beta, grp);
    const Eigen::VectorXd gk = gather(grad, grp);
    const double nb = bk.norm();
    if (nb == 0.0) {
      rep.inactive = std::max(rep.inactive, gk.norm() - reg);
    } else {
      rep.active = std::max(rep.active, (gk - reg * bk / nb).norm());
    }
  }
  return rep;
}

GroupLassoNode solve_node(const LassoNodeProblem& lp, double reg, const GroupLassoOptions& opt, Eigen::VectorXd& beta,
                          int p) {
  const int m = static_cast<int>(lp.q.size());
  if (beta.size() != m) beta = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd qb = lp.Q * beta;
  GroupLassoNode out;
  out.reg = reg;
  const double target = 0.1 * opt.tol;
  KktReport rep;
  int sweep = 0;
  for (; sweep < opt.max_iterations; ++sweep) {
    for (std::size_t gi = 0; gi < lp.groups.size(); ++gi) {
      const auto& grp = lp.groups[gi];
      const Eigen::VectorXd bk = gather(beta, grp);
      Eigen::VectorXd ck(grp.size());
      for (std::size_t a = 0; a < grp.size(); ++a) {
        double self = 0.0;
        for (std::size_t b = 0; b < grp.size(); ++b) self += lp.Q(grp[a], grp[b]) * bk[b];
        ck[a] = lp.q[grp[a]] - (qb[grp[a]] - self);
      }
      Eigen::VectorXd nk = ck.norm() <= reg ? Eigen::VectorXd::Zero(grp.size()).eval()
                                            : block_solve(lp.eigvec[gi], lp.eigval[gi], ck, reg);
      const Eigen::VectorXd delta = nk - bk;
      if (delta.cwiseAbs().maxCoeff() == 0.0) continue;
      for (std::size_t a = 0; a < grp.size(); ++a) {
        beta[grp[a]] = nk[a];
        qb += lp.Q.col(grp[a]) * delta[a];
      }
    }
    qb = lp.Q * beta;  // refresh against drift
    rep = kkt(lp, beta, reg);
    if (rep.inactive <= target && rep.active <= target) break;
  }
  out.iterations = sweep;
  out.max_inactive_gradient = rep.inactive;
  out.max_stationarity_residual = rep.active;
  if (sweep == opt.max_iterations && (rep.inactive > opt.tol || rep.active > opt.tol))
    throw ConvergenceError("group lasso did not converge for node " + std::to_string(lp.j + 1),
                           std::max(rep.inactive, rep.active));
  out.group_norms.assign(p, 0.0);
  out.coefficients.assign(p, Eigen::VectorXd::Zero(lp.R));
  for (std::size_t gi = 0; gi < lp.groups.size(); ++gi) {
    double ss = 0.0, ss_std = 0.0;
    for (int a : lp.groups[gi]) {
      out.coefficients[lp.owners[gi]][lp.basis_index[a]] = beta[a] * lp.scale[a];
      ss += std::pow(beta[a] * lp.scale[a], 2);
      ss_std += beta[a] * beta[a];
    }
    out.group_norms[lp.owners[gi]] = std::sqrt(ss);
    if (ss_std > 0.0) out.active.push_back(lp.owners[gi]);
  }
  return out;
}

GroupLassoFit assemble(std::vector<GroupLassoNode> nodes, double reg, int p) {
  GroupLassoFit fit;
  fit.reg = reg;
  fit.edges = EdgeSet(p);
  for (int j = 0; j < p; ++j)
    for (int k : nodes[j].active) {
      fit.edges.insert(k, j);
      fit.edges.insert(j, k);
    }
  fit.nodes = std::move(nodes);
  return fit;
}

double max_group_gradient(const std::vector<LassoNodeProblem>& lps) {
  double m = 0.0;
  for (const auto& lp : lps)
    for (const auto& grp : lp.groups) m = std::max(m, gather(lp.q, grp).norm());
  return m;
}

}  // namespace

GroupLassoFit group_lasso(const Dataset& data, const BasisSystem& system, double reg, const GroupLassoOptions& options) {
  if (!(reg >= 0.0)) throw InvalidInput("group lasso: reg must be >= 0");
  const GramMatrix g = gram(system, data);
  const int p = g.p();
  std::vector<GroupLassoNode> nodes;
  for (int j = 0; j < p; ++j) {
    const LassoNodeProblem lp = prepare_node(g, j);
    Eigen::VectorXd beta;
    nodes.push_back(solve_node(lp, reg, options, beta, p));
  }
  return assemble(std::move(nodes), reg, p);
}

GroupLassoFit neighborhood_select(const Dataset& data, const BasisSystem& system, const RegChoice& reg,
                                  const GroupLassoOptions& options) {
  if (const double* fixed = std::get_if<double>(&reg)) return group_lasso(data, system, *fixed, options);
  const int target = std::get<AutoReg>(reg).target_size;
  if (target < 0) throw InvalidInput("neighborhood selection: target size must be >= 0");
  const GramMatrix g = gram(system, data);
  const int p = g.p();
  std::vector<LassoNodeProblem> lps;
  for (int j = 0; j < p; ++j) lps.push_back(prepare_node(g, j));
  const double reg_max = max_group_gradient(lps);
  std::vector<Eigen::VectorXd> warm(p);
  // Walk down from the all-inactive value; keep the last fit within the target.
  std::vector<GroupLassoNode> best;
  double best_reg = reg_max;
  for (int i = 0; i <= 120; ++i) {
    const double r = reg_max * std::pow(0.92, i);
    std::vector<GroupLassoNode> nodes;
    for (int j = 0; j < p; ++j) nodes.push_back(solve_node(lps[j], r, options, warm[j], p));
    const GroupLassoFit fit = assemble(nodes, r, p);
    if (static_cast<int>(fit.edges.count() / 2) > target) break;
    best = std::move(nodes);
    best_reg = r;
  }
  if (best.empty()) {
    for (int j = 0; j < p; ++j) {
      Eigen::VectorXd beta;
      best.push_back(solve_node(lps[j], reg_max, options, beta, p));
    }
  }
  return assemble(std::move(best), best_reg, p);
}

// ---------------------------------------------------------------- bootstrap

void BootstrapReport::write_csv(std::ostream& out, const std::vector<std::string>& names) const {
  const int p = static_cast<int>(proportions.rows());
  const auto name = [&](int k) { return k < static_cast<int>(names.size()) ? names[k] : "X" + std::to_string(k + 1); };
  out << "from";
  for (int j = 0; j < p; ++j) out << ',' << name(j);
  out << '\n';
  out.precision(17);
  for (int k = 0; k < p; ++k) {
    out << name(k);
    for (int j = 0; j < p; ++j) out << ',' << proportions(k, j);
    out << '\n';
  }
}

BootstrapReport bootstrap_proportions(const Dataset& data, int B, const Learner& learner, std::uint64_t seed,
                                      int threads) {
  if (B < 1) throw InvalidInput("bootstrap: B must be >= 1");
  data.validate();
  const int n = data.n();
  const int p = data.p();
  std::vector<EdgeMatrix> graphs(B);
  std::vector<std::string> errors(B);
  std::vector<char> ok(B, 0);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int b = next++; b < B; b = next++) {
      std::mt19937_64 rng(seed + static_cast<std::uint64_t>(b));
      std::uniform_int_distribution<int> pick(0, n - 1);
      std::vector<int> rows(n);
      for (int& r : rows) r = pick(rng);
      try {
        EdgeMatrix g = learner(data.rows(rows));
        if (g.size() != p || !is_acyclic(g)) throw Error("learner returned an invalid graph");
        graphs[b] = std::move(g);
        ok[b] = 1;
      } catch (const std::exception& e) {
        errors[b] = e.what();
      }
    }
  };
  const int workers = std::clamp(threads, 1, B);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  BootstrapReport rep;
  rep.B = B;
  rep.proportions = Eigen::MatrixXd::Zero(p, p);
  int successes = 0;
  for (int b = 0; b < B; ++b) {
    rep.seeds.push_back(seed + static_cast<std::uint64_t>(b));
    if (!ok[b]) {
      rep.failed.push_back(b);
      rep.failures.push_back(errors[b]);
      continue;
    }
    ++successes;
    for (const auto& [k, j] : graphs[b].edges()) rep.proportions(k, j) += 1.0;
  }
  if (5 * static_cast<int>(rep.failed.size()) > B)
    throw Error("bootstrap: " + std::to_string(rep.failed.size()) + " of " + std::to_string(B) +
                " replicates failed (first: " + rep.failures.front() + ")");
  rep.proportions /= successes;
  return rep;
}

ConstraintSets build_sets(const BootstrapReport& report, double tau_super, double tau_partial, double tau_stable,
                          const std::optional<EdgeSet>& neighborhood) {
  if (!(tau_super >= 0.0 && tau_super <= tau_partial && tau_partial <= tau_stable))
    throw InvalidInput("thresholds must satisfy 0 <= tau_super <= tau_partial <= tau_stable");
  const Eigen::MatrixXd& prop = report.proportions;
  const int p = static_cast<int>(prop.rows());
  ConstraintSets sets;
  EdgeSet super(p);
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (k != j && prop(k, j) >= tau_super) super.insert(k, j);
  if (neighborhood) {
    if (neighborhood->size() != p) throw InvalidInput("neighborhood set: node count mismatch");
    for (const auto& [k, j] : neighborhood->edges()) super.insert(k, j);
  }

  std::vector<Edge> ranked;
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (k != j && prop(k, j) >= tau_partial) ranked.emplace_back(k, j);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](const Edge& a, const Edge& b) { return prop(a.first, a.second) > prop(b.first, b.second); });
  EdgeMatrix order(p);
  sets.partial_order = EdgeSet(p);
  sets.stable = EdgeSet(p);
  for (const auto& [k, j] : ranked) {
    if (reachable(order, j, k)) continue;
    order.set(k, j);
    sets.partial_order.insert(k, j);
    if (prop(k, j) >= tau_stable) sets.stable.insert(k, j);
  }
  sets.superstructure = std::move(super);
  return sets;
}

}  // namespace dagmip
