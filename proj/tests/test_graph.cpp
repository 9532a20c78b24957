#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dagmip/error.hpp"
#include "dagmip/graph.hpp"
#include "support/oracles.hpp"

using namespace dagmip;

TEST_SUITE("graph") {

TEST_CASE("acyclicity of small graphs") {
  CHECK(is_acyclic(EdgeMatrix(3)));
  CHECK_FALSE(is_acyclic(EdgeSet(2, {{0, 1}, {1, 0}})));
  CHECK(is_acyclic(EdgeSet(3, {{0, 1}, {1, 2}, {0, 2}})));
  EdgeMatrix loop(2);
  loop.set(1, 1);
  CHECK_THROWS_AS(is_acyclic(loop), InvalidInput);
}

TEST_CASE("topological order breaks ties by index") {
  CHECK(topological_order(EdgeSet(3, {{0, 1}, {1, 2}}).to_matrix()) == std::vector<int>{0, 1, 2});
  CHECK(topological_order(EdgeSet(3, {{0, 1}, {0, 2}}).to_matrix()) == std::vector<int>{0, 1, 2});
  CHECK(topological_order(EdgeMatrix(3)) == std::vector<int>{0, 1, 2});
  CHECK(topological_order(EdgeSet(3, {{2, 0}, {1, 0}}).to_matrix()) == std::vector<int>{1, 2, 0});
  CHECK_THROWS_AS(topological_order(EdgeSet(3, {{0, 1}, {1, 2}, {2, 0}}).to_matrix()), CycleError);
}

TEST_CASE("find_cycle returns a real cycle") {
  const EdgeMatrix m = EdgeSet(4, {{0, 1}, {1, 2}, {2, 3}, {3, 1}}).to_matrix();
  const std::vector<int> c = find_cycle(m);
  REQUIRE(c.size() == 3);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(m(c[i], c[(i + 1) % c.size()]));
  CHECK(find_cycle(EdgeMatrix(4)).empty());
}

TEST_CASE("structural Hamming distance") {
  const EdgeMatrix a = EdgeSet(3, {{0, 1}, {1, 2}}).to_matrix();
  CHECK(shd(a, a) == 0);
  CHECK(shd(EdgeSet(3, {{0, 1}, {1, 2}, {0, 2}}).to_matrix(), a) == 1);
  CHECK(shd(EdgeSet(3, {{1, 0}, {1, 2}}).to_matrix(), a) == 2);
}

TEST_CASE("SHD breakdown") {
  const EdgeMatrix truth = EdgeSet(3, {{0, 1}}).to_matrix();
  ShdBreakdown b = compare_graphs(truth, truth);
  CHECK(b.shd == 0);
  CHECK(b.extra == 0);
  CHECK(b.missing == 0);
  CHECK(b.reversed == 0);
  CHECK(b.exact);

  b = compare_graphs(EdgeSet(3, {{1, 0}}).to_matrix(), truth);
  CHECK(b.shd == 2);
  CHECK(b.reversed == 1);
  CHECK(b.extra == 0);
  CHECK(b.missing == 0);

  b = compare_graphs(EdgeSet(3, {{1, 2}}).to_matrix(), truth);
  CHECK(b.shd == 2);
  CHECK(b.extra == 1);
  CHECK(b.missing == 1);
  CHECK_FALSE(b.exact);
}

TEST_CASE("DAG enumeration counts match the recursion") {
  CHECK(enumerate_dags(1).size() == 1);
  CHECK(enumerate_dags(2).size() == 3);
  CHECK(enumerate_dags(3).size() == 25);
  for (int p = 1; p <= 5; ++p) {
    std::int64_t count = 0;
    for_each_dag(p, [&](const EdgeMatrix& m) {
      CHECK(is_acyclic(m));
      ++count;
    });
    CHECK(count == oracle::count_dags(p));
  }
  CHECK(oracle::count_dags(4) == 543);
  CHECK_THROWS_AS(enumerate_dags(6), SizeError);
}

TEST_CASE("p=3 enumeration equals brute force over all 64 patterns") {
  std::vector<EdgeMatrix> brute;
  std::vector<Edge> slots;
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      if (k != j) slots.push_back({k, j});
  for (int mask = 0; mask < 64; ++mask) {
    EdgeMatrix m(3);
    for (int b = 0; b < 6; ++b)
      if (mask >> b & 1) m.set(slots[b].first, slots[b].second);
    if (is_acyclic(m)) brute.push_back(m);
  }
  std::vector<EdgeMatrix> listed = enumerate_dags(3);
  std::sort(brute.begin(), brute.end());
  std::sort(listed.begin(), listed.end());
  CHECK(brute == listed);
}

TEST_CASE("graph JSON round trip is 1-indexed") {
  const EdgeSet s(4, {{0, 3}, {2, 1}});
  const nlohmann::json j = to_graph_json(s);
  CHECK(j["p"] == 4);
  CHECK(j["edges"][0] == nlohmann::json::array({1, 4}));
  CHECK(edge_set_from_json(j) == s);
  CHECK_THROWS_AS(edge_set_from_json(nlohmann::json{{"p", 2}, {"edges", {{1, 1}}}}), InvalidInput);
}

TEST_CASE("random graphs: topological order respects every edge") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 2 + static_cast<int>(rng() % 7);
    EdgeMatrix m(p);
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int a = 0; a < p; ++a)
      for (int b = a + 1; b < p; ++b)
        if (rng() % 2) m.set(perm[a], perm[b]);
    REQUIRE(is_acyclic(m));
    const std::vector<int> order = topological_order(m);
    std::vector<int> pos(p);
    for (int i = 0; i < p; ++i) pos[order[i]] = i;
    for (const auto& [k, j] : m.edges()) CHECK(pos[k] < pos[j]);
    if (m.edge_count() > 0) {
      const auto [k, j] = m.edges().front();
      EdgeMatrix c = m;
      c.set(j, k);
      CHECK_FALSE(is_acyclic(c));
      CHECK(reachable(m, k, j));
    }
  }
}

}  // TEST_SUITE
