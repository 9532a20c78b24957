#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace dagmip {

// Ordered pair (from, to), 0-based.
using Edge = std::pair<int, int>;

// Dense p x p binary matrix; entry (k, j) = 1 iff edge k -> j.
class EdgeMatrix {
 public:
  EdgeMatrix() = default;
  explicit EdgeMatrix(int p) : p_(p), bits_(static_cast<std::size_t>(p) * p, 0) {}

  int size() const { return p_; }

  bool operator()(int k, int j) const { return bits_[index(k, j)] != 0; }
  void set(int k, int j, bool on = true) { bits_[index(k, j)] = on ? 1 : 0; }

  int edge_count() const;
  std::vector<Edge> edges() const;
  std::vector<int> parents(int j) const;

  // Row-major bit pattern, bit (k*p + j). Only meaningful for p <= 8.
  std::uint64_t bitmask() const;
  static EdgeMatrix from_bitmask(int p, std::uint64_t mask);

  friend bool operator==(const EdgeMatrix& a, const EdgeMatrix& b) {
    return a.p_ == b.p_ && a.bits_ == b.bits_;
  }
  friend bool operator!=(const EdgeMatrix& a, const EdgeMatrix& b) { return !(a == b); }
  // Lexicographic order on the row-major bits.
  friend bool operator<(const EdgeMatrix& a, const EdgeMatrix& b) {
    return a.p_ != b.p_ ? a.p_ < b.p_ : a.bits_ < b.bits_;
  }

 private:
  std::size_t index(int k, int j) const { return static_cast<std::size_t>(k) * p_ + j; }

  int p_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Set of ordered pairs without self-loops. May contain 2-cycles.
class EdgeSet {
 public:
  EdgeSet() = default;
  explicit EdgeSet(int p) : p_(p) {}
  EdgeSet(int p, std::initializer_list<Edge> edges);

  int size() const { return p_; }
  void insert(int k, int j);
  void erase(int k, int j) { edges_.erase({k, j}); }
  bool contains(int k, int j) const { return edges_.count({k, j}) != 0; }
  std::size_t count() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  const std::set<Edge>& edges() const { return edges_; }

  bool is_subset_of(const EdgeSet& other) const;
  EdgeMatrix to_matrix() const;
  static EdgeSet from_matrix(const EdgeMatrix& m);
  // Every ordered pair k != j.
  static EdgeSet complete(int p);

  friend bool operator==(const EdgeSet& a, const EdgeSet& b) {
    return a.p_ == b.p_ && a.edges_ == b.edges_;
  }

 private:
  int p_ = 0;
  std::set<Edge> edges_;
};

// Throws InvalidInput on a nonzero diagonal.
bool is_acyclic(const EdgeMatrix& adj);
bool is_acyclic(const EdgeSet& edges);

// Kahn's algorithm with smallest-index tie-break. Throws CycleError naming a cycle.
std::vector<int> topological_order(const EdgeMatrix& adj);

// Returns one directed cycle (node list, first node not repeated) or empty if acyclic.
std::vector<int> find_cycle(const EdgeMatrix& adj);

// True iff `to` is reachable from `from` along directed edges.
bool reachable(const EdgeMatrix& adj, int from, int to);

// Acyclic validated adjacency.
class Dag {
 public:
  Dag() = default;
  explicit Dag(int p) : adj_(p) {}
  explicit Dag(EdgeMatrix adj);

  int size() const { return adj_.size(); }
  const EdgeMatrix& adjacency() const { return adj_; }
  int edge_count() const { return adj_.edge_count(); }
  bool has_edge(int k, int j) const { return adj_(k, j); }
  std::vector<int> parents(int j) const { return adj_.parents(j); }

  friend bool operator==(const Dag& a, const Dag& b) { return a.adj_ == b.adj_; }

 private:
  EdgeMatrix adj_;
};

// Structural Hamming distance: entrywise |a - b| sum.
int shd(const EdgeMatrix& a, const EdgeMatrix& b);

struct ShdBreakdown {
  int shd = 0;
  int extra = 0;
  int missing = 0;
  int reversed = 0;
  bool exact = false;
};

// Reversed pairs count once each (and contribute 2 to shd).
ShdBreakdown compare_graphs(const EdgeMatrix& estimate, const EdgeMatrix& truth);

// Calls `visit` for every labeled DAG on p nodes (1 <= p <= 5), each exactly once,
// in increasing bitmask order.
void for_each_dag(int p, const std::function<void(const EdgeMatrix&)>& visit);
std::vector<EdgeMatrix> enumerate_dags(int p);

inline constexpr int kMaxEnumerationSize = 5;

// Graph JSON with 1-indexed nodes: {"p": int, "edges": [[k, j], ...]}.
nlohmann::json to_graph_json(const EdgeMatrix& adj);
nlohmann::json to_graph_json(const EdgeSet& edges);
EdgeSet edge_set_from_json(const nlohmann::json& j);
EdgeMatrix matrix_from_json(const nlohmann::json& j);

std::string to_dot(const EdgeMatrix& adj, const std::vector<std::string>& names = {},
                   const std::function<std::string(int, int)>& edge_label = {});

}  // namespace dagmip
