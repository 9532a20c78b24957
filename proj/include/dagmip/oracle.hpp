#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "dagmip/basis.hpp"
#include "dagmip/graph.hpp"
#include "dagmip/likelihood.hpp"
#include "dagmip/mip.hpp"

namespace dagmip {

struct OracleOptions {
  VarianceMode mode = VarianceMode::Unequal;
  std::optional<EdgeSet> restrict_to;  // candidate edges
  std::optional<EdgeSet> required;     // edges every DAG must contain
  std::optional<EdgeSet> order;        // (k, j): no path j ~> k
  std::optional<int> max_edges;
  bool keep_table = false;
};

struct OracleEntry {
  EdgeMatrix g;
  double score = 0.0;
};

struct OracleResult {
  EdgeMatrix best;
  double score = std::numeric_limits<double>::infinity();
  // Second-best score minus best; infinite when only one DAG qualifies.
  double margin = std::numeric_limits<double>::infinity();
  std::int64_t evaluated = 0;
  std::vector<OracleEntry> table;

  // bitmask,edges,score
  void write_table_csv(std::ostream& out) const;
};

// Scores every DAG on p <= 5 nodes meeting the options and returns the minimum of
// the profile score; ties go to the lexicographically smallest adjacency.
OracleResult exact_search(const GramMatrix& gram, double lambda_sq, const OracleOptions& options = {});

// Same search restricted exactly as the problem (candidates, stable edges,
// partial order, max_edges).
OracleResult exact_search(const MipProblem& problem, bool keep_table = false);

}  // namespace dagmip
