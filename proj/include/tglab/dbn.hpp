#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tglab/constructions.hpp"
#include "tglab/engine.hpp"
#include "tglab/error.hpp"
#include "tglab/graph.hpp"

namespace tglab {

/// Directed inter-slice edge V_from^{t-1} -> V_to^t.
struct InterEdge {
  int from = 0;
  int to = 0;
  friend auto operator<=>(const InterEdge&, const InterEdge&) = default;
};

/// Two-timeslice DBN over node variables. Intra-slice edges are undirected
/// dependence edges; the structure repeats in every slice.
struct Dbn {
  int n = 0;
  std::vector<Edge> intra;
  std::vector<InterEdge> inter;
  std::string name;

  Dbn() = default;
  Dbn(int n_, std::vector<Edge> intra_, std::vector<InterEdge> inter_, std::string name_ = {})
      : n(n_), intra(std::move(intra_)), inter(std::move(inter_)), name(std::move(name_)) {
    normalize();
    validate();
  }

  void normalize() {
    std::sort(intra.begin(), intra.end());
    intra.erase(std::unique(intra.begin(), intra.end()), intra.end());
    std::sort(inter.begin(), inter.end());
    inter.erase(std::unique(inter.begin(), inter.end()), inter.end());
  }

  void validate() const {
    if (n < 1) throw invalid_size("DBN needs at least one node");
    for (const auto& e : intra) {
      if (e.u < 1 || e.v > n) throw config_error("intra edge " + to_string(e) + " out of range");
      if (e.u == e.v) throw config_error("intra-slice self-loop on node " + std::to_string(e.u));
    }
    for (const auto& e : inter)
      if (e.from < 1 || e.from > n || e.to < 1 || e.to > n) throw config_error("inter edge out of range");
  }

  std::size_t edge_count() const { return intra.size() + inter.size(); }

  std::vector<int> intra_neighbors(int i) const {
    std::vector<int> out;
    for (const auto& e : intra) {
      if (e.u == i) out.push_back(e.v);
      if (e.v == i) out.push_back(e.u);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<int> inter_parents(int i) const {
    std::vector<int> out;
    for (const auto& e : inter)
      if (e.to == i) out.push_back(e.from);
    return out;
  }

  int degree(int i) const {
    int d = static_cast<int>(intra_neighbors(i).size());
    for (const auto& e : inter) d += (e.from == i) + (e.to == i);
    return d;
  }
};

/// Structural equality; names are ignored.
inline bool dbn_equal(const Dbn& a, const Dbn& b) {
  if (a.n != b.n) throw incomparable("DBNs have different node counts");
  return a.intra == b.intra && a.inter == b.inter;
}

inline std::string dbn_name(const ModelId& id) {
  std::string s = "B" + std::to_string(id.which) + std::string(family_suffix(id.family));
  if (id.temporal == TemporalMode::GNN) s += "-gnn";
  return s;
}

/// The DBN whose dependencies mirror the message flow of a construction.
/// Non-temporal variants keep the intra-slice edges and drop the inter edges.
inline Dbn transparent_dbn(const ModelId& id) {
  if (id.family == Family::GA && id.temporal == TemporalMode::GNN)
    throw unsupported_variant("the GA constructions have no non-temporal variant");
  Dbn d;
  switch (id.family) {
    case Family::GV:
      d = id.which == 1 ? Dbn(4, {{2, 3}, {1, 2}}, {{1, 1}}) : Dbn(4, {{3, 4}, {1, 4}}, {{1, 1}});
      break;
    case Family::GE:
      d = id.which == 1 ? Dbn(3, {{2, 3}, {1, 2}}, {{1, 1}}) : Dbn(3, {{1, 2}}, {{1, 1}});
      break;
    case Family::GA:
      d = id.which == 1 ? Dbn(3, {{2, 3}, {1, 2}}, {{1, 1}}) : Dbn(3, {{2, 3}, {1, 2}}, {{3, 3}});
      break;
  }
  if (id.temporal == TemporalMode::GNN) d.inter.clear();
  d.name = dbn_name(id);
  return d;
}

/// Every DBN obtained by deleting exactly one edge, intra edges first.
inline std::vector<std::pair<std::string, Dbn>> single_edge_removals(const Dbn& d) {
  std::vector<std::pair<std::string, Dbn>> out;
  for (const auto& e : d.intra) {
    Dbn r = d;
    r.intra.erase(std::find(r.intra.begin(), r.intra.end(), e));
    r.name = d.name + " without intra " + to_string(e);
    out.emplace_back("intra " + to_string(e), std::move(r));
  }
  for (const auto& e : d.inter) {
    Dbn r = d;
    r.inter.erase(std::find(r.inter.begin(), r.inter.end(), e));
    const std::string label = "inter " + std::to_string(e.from) + "->" + std::to_string(e.to);
    r.name = d.name + " without " + label;
    out.emplace_back(label, std::move(r));
  }
  return out;
}

struct DbnVariable {
  int node = 0;
  int t = 0;
  friend auto operator<=>(const DbnVariable&, const DbnVariable&) = default;
};

struct UnrolledNetwork {
  int n = 0;
  int T = 0;
  std::vector<std::pair<DbnVariable, DbnVariable>> intra;  // undirected, first < second
  std::vector<std::pair<DbnVariable, DbnVariable>> inter;  // directed past -> present

  int variable_count() const { return n * T; }
  std::size_t edge_count() const { return intra.size() + inter.size(); }
};

inline UnrolledNetwork unroll(const Dbn& d, int T) {
  if (T < 1) throw invalid_size("unroll needs T >= 1");
  UnrolledNetwork u{d.n, T, {}, {}};
  for (int t = 1; t <= T; ++t) {
    for (const auto& e : d.intra) u.intra.push_back({{e.u, t}, {e.v, t}});
    if (t > 1)
      for (const auto& e : d.inter) u.inter.push_back({{e.from, t - 1}, {e.to, t}});
  }
  return u;
}

struct VariableBundle {
  int node = 0;
  int t = 0;
  std::vector<double> values;
};

/// Bundles ordered by t, then node. Layout per node: the messages it sends at
/// each layer to each base-graph neighbor (masked edges give 0), then H_i^t,
/// then Y_i at the last step for split-readout models.
inline std::vector<VariableBundle> extract_bundles(const Trace& tr) {
  std::vector<VariableBundle> out;
  const bool split = tr.readout_rule() == ReadoutRule::SplitA;
  for (int t = 1; t <= tr.T(); ++t)
    for (int i = 1; i <= tr.n(); ++i) {
      VariableBundle b{i, t, {}};
      for (int l = 1; l <= tr.L(); ++l)
        for (int j : tr.graph().neighbors(i)) b.values.push_back(tr.m(t, l, i, j));
      b.values.push_back(tr.H(t, i));
      if (split && t == tr.T()) b.values.push_back(tr.Y(i));
      out.push_back(std::move(b));
    }
  return out;
}

inline nlohmann::json to_json(const Dbn& d) {
  auto inter = nlohmann::json::array();
  for (const auto& e : d.inter) inter.push_back({e.from, e.to});
  nlohmann::json j = {{"n", d.n}, {"intra", edges_to_json(d.intra)}, {"inter", inter}};
  if (!d.name.empty()) j["name"] = d.name;
  return j;
}

inline Dbn dbn_from_json(const nlohmann::json& j) {
  std::vector<InterEdge> inter;
  for (const auto& p : j.at("inter")) {
    if (!p.is_array() || p.size() != 2) throw config_error("inter edge must be a pair [i,j]");
    inter.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  return Dbn(j.at("n").get<int>(), edges_from_json(j.at("intra")), std::move(inter), j.value("name", std::string{}));
}

}  // namespace tglab
