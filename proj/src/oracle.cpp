#include "dagmip/oracle.hpp"

#include <iomanip>

#include "dagmip/error.hpp"

namespace dagmip {

void OracleResult::write_table_csv(std::ostream& out) const {
  out << "bitmask,edges,score\n" << std::setprecision(17);
  for (const auto& e : table) out << e.g.bitmask() << ',' << e.g.edge_count() << ',' << e.score << '\n';
}

OracleResult exact_search(const GramMatrix& gram, double lambda_sq, const OracleOptions& options) {
  const int p = gram.p();
  if (p > kMaxEnumerationSize) throw SizeError("exact search supports p <= " + std::to_string(kMaxEnumerationSize));
  for (const auto* set : {&options.restrict_to, &options.required, &options.order})
    if (*set && (*set)->size() != p) throw InvalidInput("exact search: constraint set size mismatch");
  EdgeMatrix order(p);
  if (options.order)
    for (const auto& [k, j] : options.order->edges()) order.set(k, j);

  const ScoreCache scores(gram, options.mode);
  OracleResult res;
  double second = std::numeric_limits<double>::infinity();
  for_each_dag(p, [&](const EdgeMatrix& g) {
    if (options.max_edges && g.edge_count() > *options.max_edges) return;
    for (const auto& [k, j] : g.edges())
      if (options.restrict_to && !options.restrict_to->contains(k, j)) return;
    if (options.required)
      for (const auto& [k, j] : options.required->edges())
        if (!g(k, j)) return;
    if (options.order) {
      EdgeMatrix both = g;
      for (const auto& [k, j] : order.edges()) both.set(k, j);
      if (!is_acyclic(both)) return;
    }
    const double s = scores.graph(g, lambda_sq);
    ++res.evaluated;
    if (options.keep_table) res.table.push_back({g, s});
    if (s < res.score || (s == res.score && g < res.best)) {
      second = std::min(second, res.score);
      res.score = s;
      res.best = g;
    } else {
      second = std::min(second, s);
    }
  });
  if (res.evaluated == 0) throw InfeasibleError("exact search: no DAG satisfies the constraints");
  res.margin = second - res.score;
  return res;
}

OracleResult exact_search(const MipProblem& problem, bool keep_table) {
  OracleOptions opt;
  opt.mode = problem.mode;
  opt.restrict_to = problem.superstructure;
  opt.required = problem.stable;
  opt.order = problem.partial_order;
  opt.max_edges = problem.max_edges;
  opt.keep_table = keep_table;
  return exact_search(*problem.gram, problem.lambda_sq, opt);
}

}  // namespace dagmip
