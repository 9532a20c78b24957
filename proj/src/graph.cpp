#include "dagmip/graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "dagmip/error.hpp"

namespace dagmip {

int EdgeMatrix::edge_count() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<Edge> EdgeMatrix::edges() const {
  std::vector<Edge> out;
  for (int k = 0; k < p_; ++k)
    for (int j = 0; j < p_; ++j)
      if ((*this)(k, j)) out.emplace_back(k, j);
  return out;
}

std::vector<int> EdgeMatrix::parents(int j) const {
  std::vector<int> out;
  for (int k = 0; k < p_; ++k)
    if ((*this)(k, j)) out.push_back(k);
  return out;
}

std::uint64_t EdgeMatrix::bitmask() const {
  if (p_ > 8) throw SizeError("bitmask requires p <= 8");
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) mask |= std::uint64_t{1} << i;
  return mask;
}

EdgeMatrix EdgeMatrix::from_bitmask(int p, std::uint64_t mask) {
  if (p > 8) throw SizeError("bitmask requires p <= 8");
  EdgeMatrix m(p);
  for (int i = 0; i < p * p; ++i)
    if (mask & (std::uint64_t{1} << i)) m.bits_[i] = 1;
  return m;
}

EdgeSet::EdgeSet(int p, std::initializer_list<Edge> edges) : p_(p) {
  for (const auto& [k, j] : edges) insert(k, j);
}

void EdgeSet::insert(int k, int j) {
  if (k == j) throw InvalidInput("edge set cannot contain a self-loop");
  if (k < 0 || j < 0 || k >= p_ || j >= p_) throw InvalidInput("edge endpoint out of range");
  edges_.insert({k, j});
}

bool EdgeSet::is_subset_of(const EdgeSet& other) const {
  return std::includes(other.edges_.begin(), other.edges_.end(), edges_.begin(), edges_.end());
}

EdgeMatrix EdgeSet::to_matrix() const {
  EdgeMatrix m(p_);
  for (const auto& [k, j] : edges_) m.set(k, j);
  return m;
}

EdgeSet EdgeSet::from_matrix(const EdgeMatrix& m) {
  EdgeSet s(m.size());
  for (const auto& [k, j] : m.edges()) s.insert(k, j);
  return s;
}

EdgeSet EdgeSet::complete(int p) {
  EdgeSet s(p);
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (k != j) s.insert(k, j);
  return s;
}

namespace {

void check_diagonal(const EdgeMatrix& adj) {
  for (int j = 0; j < adj.size(); ++j)
    if (adj(j, j)) throw InvalidInput("adjacency matrix has a self-loop at node " + std::to_string(j + 1));
}

// Returns the topological prefix Kahn's algorithm can consume.
std::vector<int> kahn(const EdgeMatrix& adj) {
  const int p = adj.size();
  std::vector<int> indegree(p, 0);
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (adj(k, j)) ++indegree[j];
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int j = 0; j < p; ++j)
    if (indegree[j] == 0) ready.push(j);
  std::vector<int> order;
  order.reserve(p);
  while (!ready.empty()) {
    const int k = ready.top();
    ready.pop();
    order.push_back(k);
    for (int j = 0; j < p; ++j)
      if (adj(k, j) && --indegree[j] == 0) ready.push(j);
  }
  return order;
}

}  // namespace

bool is_acyclic(const EdgeMatrix& adj) {
  check_diagonal(adj);
  return static_cast<int>(kahn(adj).size()) == adj.size();
}

bool is_acyclic(const EdgeSet& edges) { return is_acyclic(edges.to_matrix()); }

std::vector<int> find_cycle(const EdgeMatrix& adj) {
  const int p = adj.size();
  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> state(p, 0), parent(p, -1);
  std::vector<int> cycle;
  std::function<bool(int)> dfs = [&](int u) {
    state[u] = 1;
    for (int v = 0; v < p; ++v) {
      if (!adj(u, v)) continue;
      if (state[v] == 1) {
        for (int w = u; w != v; w = parent[w]) cycle.push_back(w);
        cycle.push_back(v);
        std::reverse(cycle.begin(), cycle.end());
        return true;
      }
      if (state[v] == 0) {
        parent[v] = u;
        if (dfs(v)) return true;
      }
    }
    state[u] = 2;
    return false;
  };
  for (int s = 0; s < p; ++s)
    if (state[s] == 0 && dfs(s)) return cycle;
  return {};
}

std::vector<int> topological_order(const EdgeMatrix& adj) {
  check_diagonal(adj);
  auto order = kahn(adj);
  if (static_cast<int>(order.size()) != adj.size()) {
    std::ostringstream msg;
    msg << "graph contains a directed cycle:";
    for (int v : find_cycle(adj)) msg << ' ' << v + 1;
    throw CycleError(msg.str());
  }
  return order;
}

bool reachable(const EdgeMatrix& adj, int from, int to) {
  const int p = adj.size();
  std::vector<char> seen(p, 0);
  std::vector<int> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    if (u == to) return true;
    for (int v = 0; v < p; ++v)
      if (adj(u, v) && !seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
  return false;
}

Dag::Dag(EdgeMatrix adj) : adj_(std::move(adj)) {
  if (!is_acyclic(adj_)) {
    std::ostringstream msg;
    msg << "not a DAG, cycle:";
    for (int v : find_cycle(adj_)) msg << ' ' << v + 1;
    throw CycleError(msg.str());
  }
}

int shd(const EdgeMatrix& a, const EdgeMatrix& b) {
  if (a.size() != b.size()) throw InvalidInput("shd: dimension mismatch");
  check_diagonal(a);
  check_diagonal(b);
  int d = 0;
  for (int k = 0; k < a.size(); ++k)
    for (int j = 0; j < a.size(); ++j) d += a(k, j) != b(k, j);
  return d;
}

ShdBreakdown compare_graphs(const EdgeMatrix& estimate, const EdgeMatrix& truth) {
  ShdBreakdown out;
  out.shd = shd(estimate, truth);
  const int p = truth.size();
  for (int k = 0; k < p; ++k) {
    for (int j = 0; j < p; ++j) {
      if (estimate(k, j) && !truth(k, j)) {
        if (truth(j, k) && !estimate(j, k))
          ++out.reversed;
        else
          ++out.extra;
      } else if (!estimate(k, j) && truth(k, j)) {
        if (!(estimate(j, k) && !truth(j, k))) ++out.missing;
      }
    }
  }
  out.exact = out.shd == 0;
  return out;
}

void for_each_dag(int p, const std::function<void(const EdgeMatrix&)>& visit) {
  if (p < 1 || p > kMaxEnumerationSize)
    throw SizeError("DAG enumeration supports 1 <= p <= " + std::to_string(kMaxEnumerationSize));
  std::vector<Edge> slots;
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (k != j) slots.emplace_back(k, j);
  const std::uint64_t patterns = std::uint64_t{1} << slots.size();
  EdgeMatrix adj(p);
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    for (std::size_t i = 0; i < slots.size(); ++i)
      adj.set(slots[i].first, slots[i].second, (mask >> i) & 1U);
    if (static_cast<int>(kahn(adj).size()) == p) visit(adj);
  }
}

std::vector<EdgeMatrix> enumerate_dags(int p) {
  std::vector<EdgeMatrix> out;
  for_each_dag(p, [&](const EdgeMatrix& m) { out.push_back(m); });
  return out;
}

nlohmann::json to_graph_json(const EdgeMatrix& adj) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [k, j] : adj.edges()) edges.push_back({k + 1, j + 1});
  return {{"p", adj.size()}, {"edges", edges}};
}

nlohmann::json to_graph_json(const EdgeSet& set) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [k, j] : set.edges()) edges.push_back({k + 1, j + 1});
  return {{"p", set.size()}, {"edges", edges}};
}

EdgeSet edge_set_from_json(const nlohmann::json& j) {
  try {
    const int p = j.at("p").get<int>();
    if (p < 1) throw InvalidInput("graph JSON: p must be positive");
    EdgeSet set(p);
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw InvalidInput("graph JSON: edges must be [from, to] pairs");
      set.insert(e[0].get<int>() - 1, e[1].get<int>() - 1);
    }
    return set;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("graph JSON: ") + ex.what());
  }
}

EdgeMatrix matrix_from_json(const nlohmann::json& j) { return edge_set_from_json(j).to_matrix(); }

std::string to_dot(const EdgeMatrix& adj, const std::vector<std::string>& names,
                   const std::function<std::string(int, int)>& edge_label) {
  auto name = [&](int v) {
    return v < static_cast<int>(names.size()) ? names[v] : "X" + std::to_string(v + 1);
  };
  std::ostringstream out;
  out << "digraph G {\n";
  for (int v = 0; v < adj.size(); ++v) out << "  \"" << name(v) << "\";\n";
  for (const auto& [k, j] : adj.edges()) {
    out << "  \"" << name(k) << "\" -> \"" << name(j) << "\"";
    if (edge_label) out << " [label=\"" << edge_label(k, j) << "\"]";
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace dagmip
