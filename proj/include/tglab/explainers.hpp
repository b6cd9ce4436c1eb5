#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tglab/dbn.hpp"
#include "tglab/error.hpp"
#include "tglab/graph.hpp"
#include "tglab/perturbation.hpp"

// Reference black-box explainers. They see perturbation sets and a
// ResponseOracle only; nothing in this header touches traces or model specs.

namespace tglab {

enum class ExplanationKind { NodeScores, EdgeScores, DbnChoice };

inline std::string_view to_string(ExplanationKind k) {
  switch (k) {
    case ExplanationKind::NodeScores: return "node_scores";
    case ExplanationKind::EdgeScores: return "edge_scores";
    case ExplanationKind::DbnChoice: return "dbn_choice";
  }
  return "?";
}

struct Explanation {
  ExplanationKind kind = ExplanationKind::NodeScores;
  std::optional<std::vector<double>> node_scores;
  std::optional<std::vector<std::pair<Edge, double>>> edge_scores;
  std::optional<std::string> chosen_dbn;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

inline nlohmann::json to_json(const Explanation& e) {
  nlohmann::json j = {{"kind", to_string(e.kind)}};
  if (e.node_scores) j["node_scores"] = *e.node_scores;
  if (e.edge_scores) {
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [edge, v] : *e.edge_scores) s[to_string(edge)] = v;
    j["edge_scores"] = s;
  }
  if (e.chosen_dbn) j["chosen_dbn"] = *e.chosen_dbn;
  return j;
}

namespace detail {
inline double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}
}  // namespace detail

/// score_i = mean over the evidence of |Y(X) - Y(X with node i zeroed at every step)|_1.
inline Explanation occlusion_node_scores(const PerturbationSet& p, const ResponseOracle& oracle) {
  if (!allows_node_perturbation(p.cls)) throw config_error("node occlusion needs node-perturbation evidence");
  if (p.empty()) throw empty_evidence("node occlusion on an empty perturbation set");
  std::vector<double> scores(oracle.n(), 0.0);
  for (const auto& rec : p.records) {
    for (int i = 1; i <= oracle.n(); ++i) {
      FeatureSequence Xo = rec.X;
      for (int t = 1; t <= Xo.T(); ++t) Xo(t, i) = 0;
      scores[i - 1] += detail::l1(rec.Y, oracle.query(Xo, rec.mask));
    }
  }
  for (auto& s : scores) s /= static_cast<double>(p.records.size());
  return {ExplanationKind::NodeScores, scores, std::nullopt, std::nullopt};
}

/// score_e = |Y(X, A) - Y(X, A without e)|_1 for every edge of the public graph.
inline Explanation occlusion_edge_scores(const ResponseOracle& oracle, const FeatureSequence& X) {
  const auto base = oracle.query(X);
  std::vector<std::pair<Edge, double>> scores;
  for (const auto& e : oracle.graph().edges()) scores.emplace_back(e, detail::l1(base, oracle.query(X, EdgeMask{e})));
  return {ExplanationKind::EdgeScores, std::nullopt, scores, std::nullopt};
}

namespace detail {

/// Nodes whose variables are connected to node 1's in the DBN, ignoring time and direction.
inline std::vector<char> reaches_node1(const Dbn& d) {
  std::vector<std::vector<int>> adj(d.n + 1);
  for (const auto& e : d.intra) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (const auto& e : d.inter) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::vector<char> seen(d.n + 1, 0);
  std::queue<int> q;
  seen[1] = 1;
  q.push(1);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        q.push(v);
      }
  }
  return seen;
}

inline std::vector<int> distances_from_node1(const Graph& g) {
  std::vector<int> dist(g.n() + 1, -1);
  std::queue<int> q;
  dist[1] = 0;
  q.push(1);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.neighbors(u))
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

inline double abs_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0 || syy == 0) return 0;
  return std::abs(sxy) / std::sqrt(sxx * syy);
}

/// Observed sensitivity of Y_1 to each node (index 1..n). Input part: |corr|
/// between the node's positive running max and Y_1 within each mask group.
/// Edge part: mean |change of Y_1| when one extra edge is removed at fixed X,
/// attributed to the endpoint farther from node 1.
inline std::vector<double> node1_sensitivity(const PerturbationSet& p, const Graph& g) {
  const int n = p.records.front().X.n();
  std::vector<double> s(n + 1, 0.0);

  std::map<EdgeMask, std::vector<const PerturbationRecord*>> by_mask;
  for (const auto& r : p.records) by_mask[r.mask].push_back(&r);
  for (int j = 1; j <= n; ++j) {
    double total = 0;
    int groups = 0;
    for (const auto& [mask, recs] : by_mask) {
      if (recs.size() < 2) continue;
      std::vector<double> f, y;
      for (const auto* r : recs) {
        double m = 0;
        for (int t = 1; t <= r->X.T(); ++t) m = std::max(m, r->X(t, j));
        f.push_back(m);
        y.push_back(r->Y[0]);
      }
      total += abs_correlation(f, y);
      ++groups;
    }
    if (groups > 0) s[j] += total / groups;
  }

  const auto dist = distances_from_node1(g);
  std::map<std::string, std::vector<const PerturbationRecord*>> by_input;
  for (const auto& r : p.records) {
    PerturbationRecord key{r.X, {}, {}};
    by_input[canonical_key(key)].push_back(&r);
  }
  std::vector<double> edge_sum(n + 1, 0.0);
  std::vector<int> edge_cnt(n + 1, 0);
  for (const auto& [key, recs] : by_input)
    for (const auto* a : recs)
      for (const auto* b : recs) {
        if (b->mask.size() != a->mask.size() + 1) continue;
        std::vector<Edge> extra;
        std::set_difference(b->mask.removed().begin(), b->mask.removed().end(), a->mask.removed().begin(),
                            a->mask.removed().end(), std::back_inserter(extra));
        if (extra.size() != 1) continue;
        const Edge e = extra[0];
        const double d = std::abs(a->Y[0] - b->Y[0]);
        for (int end : {e.u, e.v}) {
          const int other = end == e.u ? e.v : e.u;
          if (dist[end] >= dist[other]) {
            edge_sum[end] += d;
            ++edge_cnt[end];
          }
        }
      }
  for (int j = 1; j <= n; ++j)
    if (edge_cnt[j] > 0) s[j] += edge_sum[j] / edge_cnt[j];
  return s;
}

}  // namespace detail

/// Picks the candidate DBN whose claimed non-dependencies of node 1 are least
/// contradicted by the evidence. Ties go to the earlier candidate.
inline Explanation select_dbn(const PerturbationSet& p, const std::vector<Dbn>& candidates, const Graph& public_graph) {
  if (candidates.size() < 2) throw config_error("select_dbn needs at least two candidates");
  if (p.empty()) throw empty_evidence("select_dbn on an empty perturbation set");
  const auto sens = detail::node1_sensitivity(p, public_graph);
  std::size_t best = 0;
  double best_pen = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& d = candidates[c];
    if (d.n != p.records.front().X.n()) throw incomparable("candidate DBN does not match the evidence node count");
    const auto reach = detail::reaches_node1(d);
    double pen = 0;
    for (int j = 1; j <= d.n; ++j)
      if (!reach[j]) pen += sens[j];
    if (c == 0 || pen < best_pen) {
      best = c;
      best_pen = pen;
    }
  }
  return {ExplanationKind::DbnChoice, std::nullopt, std::nullopt, candidates[best].name};
}

/// Fraction of sampled perturbations of the nodes outside `explanation` that
/// move the output by more than epsilon (L1).
inline double fidelity(const ResponseOracle& oracle, const std::vector<int>& explanation, std::size_t samples,
                       double epsilon, std::uint64_t seed, int T = 2) {
  if (explanation.empty()) throw config_error("fidelity needs a nonempty explanation");
  if (!allows_node_perturbation(oracle.cls())) throw config_error("fidelity needs node-perturbation access");
  if (samples == 0) throw empty_evidence("fidelity with zero samples");
  std::vector<char> fixed(oracle.n() + 1, 0);
  for (int i : explanation) {
    if (i < 1 || i > oracle.n()) throw config_error("explanation node out of range");
    fixed[i] = 1;
  }
  SamplerConfig base{oracle.K(), T, oracle.n(), seed};
  SamplerConfig alt{oracle.K(), T, oracle.n(), splitmix64(seed ^ 0xf1de11e7ULL)};
  std::size_t changed = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const FeatureSequence X = draw_bounded(base, k);
    const FeatureSequence R = draw_bounded(alt, k);
    FeatureSequence Xp = X;
    for (int t = 1; t <= T; ++t)
      for (int i = 1; i <= oracle.n(); ++i)
        if (!fixed[i]) Xp(t, i) = R(t, i);
    if (detail::l1(oracle.query(X), oracle.query(Xp)) > epsilon) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(samples);
}

/// Nodes sharing the top score of a node-score explanation.
inline std::vector<int> top_nodes(const Explanation& e) {
  if (!e.node_scores) throw config_error("explanation carries no node scores");
  const auto& s = *e.node_scores;
  const double top = *std::max_element(s.begin(), s.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] == top) out.push_back(static_cast<int>(i) + 1);
  return out;
}

}  // namespace tglab
