#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tglab/error.hpp"

namespace tglab {

// Node ids are 1-based everywhere in the public interface.

/// Undirected edge, normalized so that u < v.
struct Edge {
  int u = 0;
  int v = 0;

  constexpr Edge() = default;
  constexpr Edge(int a, int b) : u(a < b ? a : b), v(a < b ? b : a) {}

  constexpr bool touches(int node) const { return u == node || v == node; }
  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::string to_string(const Edge& e) {
  return std::to_string(e.u) + "-" + std::to_string(e.v);
}

/// Set of removed edges. Kept sorted and duplicate-free.
class EdgeMask {
 public:
  EdgeMask() = default;
  EdgeMask(std::initializer_list<Edge> edges) : removed_(edges) { normalize(); }
  explicit EdgeMask(std::vector<Edge> edges) : removed_(std::move(edges)) { normalize(); }

  const std::vector<Edge>& removed() const { return removed_; }
  bool empty() const { return removed_.empty(); }
  std::size_t size() const { return removed_.size(); }
  bool contains(const Edge& e) const {
    return std::binary_search(removed_.begin(), removed_.end(), e);
  }
  EdgeMask with(const Edge& e) const {
    auto edges = removed_;
    edges.push_back(e);
    return EdgeMask(std::move(edges));
  }

  friend auto operator<=>(const EdgeMask&, const EdgeMask&) = default;

 private:
  void normalize() {
    std::sort(removed_.begin(), removed_.end());
    removed_.erase(std::unique(removed_.begin(), removed_.end()), removed_.end());
  }
  std::vector<Edge> removed_;
};

/// Simple undirected graph: symmetric 0/1 adjacency, no self-loops.
class Graph {
 public:
  Graph() = default;

  Graph(int n, std::vector<Edge> edges) : n_(n), adj_(static_cast<std::size_t>(n) * n, 0) {
    if (n < 1) throw invalid_size("graph needs at least one node");
    for (const auto& e : edges) {
      if (e.u < 1 || e.v > n) throw config_error("edge " + to_string(e) + " out of range");
      if (e.u == e.v) throw config_error("self-loop on node " + std::to_string(e.u));
      set(e.u, e.v, 1);
    }
    rebuild_edges();
  }

  static Graph from_adjacency(const std::vector<std::vector<int>>& a) {
    const int n = static_cast<int>(a.size());
    for (const auto& row : a)
      if (static_cast<int>(row.size()) != n) throw config_error("adjacency matrix is not square");
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int x = a[i][j];
        if (x != 0 && x != 1) throw config_error("adjacency entries must be 0 or 1");
        if (x != a[j][i]) throw config_error("adjacency matrix is not symmetric");
        if (i == j && x) throw config_error("adjacency matrix has a self-loop");
        if (i < j && x) edges.emplace_back(i + 1, j + 1);
      }
    }
    return Graph(n, std::move(edges));
  }

  int n() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool adjacent(int i, int j) const { return at(i, j) != 0; }
  bool has_edge(const Edge& e) const { return e.u >= 1 && e.v <= n_ && adjacent(e.u, e.v); }

  /// Neighbors of node i in ascending order.
  std::vector<int> neighbors(int i) const {
    std::vector<int> out;
    for (int j = 1; j <= n_; ++j)
      if (adjacent(i, j)) out.push_back(j);
    return out;
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> a(n_, std::vector<int>(n_, 0));
    for (int i = 1; i <= n_; ++i)
      for (int j = 1; j <= n_; ++j) a[i - 1][j - 1] = at(i, j);
    return a;
  }

  friend bool operator==(const Graph& a, const Graph& b) { return a.n_ == b.n_ && a.adj_ == b.adj_; }

 private:
  friend Graph apply_mask(const Graph&, const EdgeMask&);

  int at(int i, int j) const { return adj_[static_cast<std::size_t>(i - 1) * n_ + (j - 1)]; }
  void set(int i, int j, std::uint8_t x) {
    adj_[static_cast<std::size_t>(i - 1) * n_ + (j - 1)] = x;
    adj_[static_cast<std::size_t>(j - 1) * n_ + (i - 1)] = x;
  }
  void rebuild_edges() {
    edges_.clear();
    for (int i = 1; i <= n_; ++i)
      for (int j = i + 1; j <= n_; ++j)
        if (adjacent(i, j)) edges_.emplace_back(i, j);
  }

  int n_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<Edge> edges_;
};

/// 4-cycle 1-2-3-4-1.
inline Graph make_square_graph() { return Graph(4, {{1, 2}, {2, 3}, {3, 4}, {1, 4}}); }

/// Path 1-2-...-n.
inline Graph make_line_graph(int n) {
  if (n < 2) throw invalid_size("line graph needs n >= 2, got " + std::to_string(n));
  std::vector<Edge> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
  return Graph(n, std::move(edges));
}

inline void validate_mask(const Graph& g, const EdgeMask& m) {
  for (const auto& e : m.removed())
    if (!g.has_edge(e)) throw invalid_mask("mask removes non-edge " + to_string(e));
}

/// Removed entries are zeroed symmetrically. Masks are global over all time steps.
inline Graph apply_mask(const Graph& g, const EdgeMask& m) {
  validate_mask(g, m);
  Graph out = g;
  for (const auto& e : m.removed()) out.set(e.u, e.v, 0);
  out.rebuild_edges();
  return out;
}

inline constexpr std::size_t kMaxMaskEdges = 16;

/// All 2^|E| masks, ordered lexicographically by their sorted removed-edge lists.
inline std::vector<EdgeMask> enumerate_masks(const Graph& g) {
  const auto& edges = g.edges();
  if (edges.size() > kMaxMaskEdges)
    throw invalid_size("mask enumeration limited to " + std::to_string(kMaxMaskEdges) + " edges");
  std::vector<std::vector<Edge>> subsets;
  const std::uint32_t count = 1u << edges.size();
  subsets.reserve(count);
  for (std::uint32_t bits = 0; bits < count; ++bits) {
    std::vector<Edge> s;
    for (std::size_t k = 0; k < edges.size(); ++k)
      if (bits & (1u << k)) s.push_back(edges[k]);
    subsets.push_back(std::move(s));
  }
  std::sort(subsets.begin(), subsets.end());
  std::vector<EdgeMask> out;
  out.reserve(subsets.size());
  for (auto& s : subsets) out.emplace_back(std::move(s));
  return out;
}

// JSON: {"n": int, "edges": [[i,j],...]}; masks are plain [[i,j],...] lists.

inline nlohmann::json edges_to_json(const std::vector<Edge>& edges) {
  auto arr = nlohmann::json::array();
  for (const auto& e : edges) arr.push_back({e.u, e.v});
  return arr;
}

inline std::vector<Edge> edges_from_json(const nlohmann::json& j) {
  std::vector<Edge> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw config_error("edge must be a pair [i,j]");
    out.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  return out;
}

inline nlohmann::json to_json(const Graph& g) { return {{"n", g.n()}, {"edges", edges_to_json(g.edges())}}; }

inline Graph graph_from_json(const nlohmann::json& j) {
  return Graph(j.at("n").get<int>(), edges_from_json(j.at("edges")));
}

inline nlohmann::json to_json(const EdgeMask& m) { return edges_to_json(m.removed()); }
inline EdgeMask mask_from_json(const nlohmann::json& j) { return EdgeMask(edges_from_json(j)); }

}  // namespace tglab
