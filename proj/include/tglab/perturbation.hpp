#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tglab/engine.hpp"
#include "tglab/error.hpp"
#include "tglab/graph.hpp"
#include "tglab/model.hpp"
#include "tglab/parallel.hpp"
#include "tglab/rng.hpp"

namespace tglab {

enum class PerturbationClass { Node, Edge, NodeAndEdge };
enum class InputConstraint { None, X2GtX3 };
/// Lower end of the sampling range: -K, or -10K to push inputs deep below the ReLU floors.
enum class Tail { Symmetric, HeavyNegative };

inline std::string_view to_string(PerturbationClass c) {
  switch (c) {
    case PerturbationClass::Node: return "node";
    case PerturbationClass::Edge: return "edge";
    case PerturbationClass::NodeAndEdge: return "node_and_edge";
  }
  return "?";
}

inline PerturbationClass parse_class(std::string_view s) {
  if (s == "node") return PerturbationClass::Node;
  if (s == "edge") return PerturbationClass::Edge;
  if (s == "node_and_edge" || s == "node-and-edge" || s == "both") return PerturbationClass::NodeAndEdge;
  throw config_error("unknown perturbation class '" + std::string(s) + "'");
}

inline InputConstraint parse_constraint(std::string_view s) {
  if (s.empty() || s == "none") return InputConstraint::None;
  if (s == "x2gtx3") return InputConstraint::X2GtX3;
  throw config_error("unknown input constraint '" + std::string(s) + "'");
}

inline bool allows_node_perturbation(PerturbationClass c) { return c != PerturbationClass::Edge; }
inline bool allows_edge_perturbation(PerturbationClass c) { return c != PerturbationClass::Node; }

struct SamplerConfig {
  double K = 10;
  int T = 2;
  int n = 4;
  std::uint64_t seed = 0;
  InputConstraint constraint = InputConstraint::None;
  Tail tail = Tail::Symmetric;

  double lower() const { return tail == Tail::HeavyNegative ? -10 * K : -K; }

  void validate() const {
    if (!(K > 0)) throw config_error("sampler bound K must be positive");
    if (T < 1 || n < 1) throw config_error("sampler needs T >= 1 and n >= 1");
    if (constraint == InputConstraint::X2GtX3 && n < 3) throw config_error("x2gtx3 needs at least 3 nodes");
  }
};

inline bool satisfies(const FeatureSequence& X, InputConstraint c) {
  if (c == InputConstraint::None) return true;
  if (X.n() < 3) return false;
  for (int t = 1; t <= X.T(); ++t)
    if (!(X(t, 2) > X(t, 3))) return false;
  return true;
}

inline bool bounded_by(const FeatureSequence& X, double K) {
  for (double x : X.values())
    if (!(x <= K)) return false;
  return true;
}

/// Sample `index` of the stream defined by cfg. Entries are uniform on
/// [lower, K], snapped down to the 2^-32 lattice, so never above K.
inline FeatureSequence draw_bounded(const SamplerConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng(cfg.seed, index);
  const double lo = cfg.lower();
  auto draw = [&] { return snap_to_lattice(std::min(cfg.K, rng.uniform(lo, cfg.K))); };
  FeatureSequence X(cfg.T, cfg.n);
  for (int t = 1; t <= cfg.T; ++t)
    for (int i = 1; i <= cfg.n; ++i) X(t, i) = draw();
  if (cfg.constraint == InputConstraint::X2GtX3) {
    for (int t = 1; t <= cfg.T; ++t) {
      // Swapping keeps the pair uniform on the half-space x2 > x3.
      while (X(t, 2) == X(t, 3)) X(t, 3) = draw();
      if (X(t, 2) < X(t, 3)) std::swap(X(t, 2), X(t, 3));
    }
  }
  return X;
}

inline std::vector<FeatureSequence> sample_bounded(double K, int T, int n, std::size_t count, std::uint64_t seed,
                                                   InputConstraint constraint = InputConstraint::None,
                                                   Tail tail = Tail::Symmetric) {
  SamplerConfig cfg{K, T, n, seed, constraint, tail};
  cfg.validate();
  std::vector<FeatureSequence> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(draw_bounded(cfg, k));
  return out;
}

/// Index-addressable supply of inputs. Returns nullopt once exhausted.
using InputSource = std::function<std::optional<FeatureSequence>(std::uint64_t)>;

inline InputSource bounded_source(SamplerConfig cfg) {
  cfg.validate();
  return [cfg](std::uint64_t k) -> std::optional<FeatureSequence> { return draw_bounded(cfg, k); };
}

inline InputSource list_source(std::vector<FeatureSequence> inputs) {
  return [v = std::move(inputs)](std::uint64_t k) -> std::optional<FeatureSequence> {
    if (k >= v.size()) return std::nullopt;
    return v[k];
  };
}

struct PerturbationRecord {
  FeatureSequence X;
  EdgeMask mask;
  std::vector<double> Y;
};

struct PerturbationSet {
  PerturbationClass cls = PerturbationClass::Node;
  double K = 0;
  std::uint64_t seed = 0;
  std::string model;  // informational; ignored by sets_equal
  std::vector<PerturbationRecord> records;

  bool empty() const { return records.empty(); }
};

namespace detail {
inline void put_u32(std::string& s, std::uint32_t x) {
  for (int k = 3; k >= 0; --k) s.push_back(static_cast<char>((x >> (8 * k)) & 0xff));
}
inline void put_double(std::string& s, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  u = (u >> 63) ? ~u : (u | 0x8000000000000000ULL);  // order-preserving
  for (int k = 7; k >= 0; --k) s.push_back(static_cast<char>((u >> (8 * k)) & 0xff));
}
}  // namespace detail

/// Byte key that orders records by mask first, then by X.
inline std::string canonical_key(const PerturbationRecord& r) {
  std::string s;
  detail::put_u32(s, static_cast<std::uint32_t>(r.mask.size()));
  for (const auto& e : r.mask.removed()) {
    detail::put_u32(s, static_cast<std::uint32_t>(e.u));
    detail::put_u32(s, static_cast<std::uint32_t>(e.v));
  }
  detail::put_u32(s, static_cast<std::uint32_t>(r.X.T()));
  detail::put_u32(s, static_cast<std::uint32_t>(r.X.n()));
  for (double x : r.X.values()) detail::put_double(s, x);
  return s;
}

inline void canonicalize(PerturbationSet& p) {
  std::vector<std::pair<std::string, std::size_t>> keys;
  for (std::size_t k = 0; k < p.records.size(); ++k) keys.emplace_back(canonical_key(p.records[k]), k);
  std::stable_sort(keys.begin(), keys.end());
  std::vector<PerturbationRecord> sorted;
  sorted.reserve(keys.size());
  for (const auto& [key, k] : keys) sorted.push_back(std::move(p.records[k]));
  p.records = std::move(sorted);
}

/// Evaluates every (input, mask) combination. An empty mask list means the
/// unperturbed graph only.
inline PerturbationSet build_set(const ModelSpec& spec, PerturbationClass cls, const std::vector<FeatureSequence>& inputs,
                                 std::vector<EdgeMask> masks = {}, std::uint64_t seed = 0, int jobs = 1) {
  if (masks.empty()) masks.emplace_back();
  const double K = bound_K(spec);
  if (cls == PerturbationClass::Node)
    for (const auto& m : masks)
      if (!m.empty()) throw invalid_set("node-perturbation sets cannot remove edges");
  if (cls == PerturbationClass::Edge)
    for (const auto& X : inputs)
      if (!(X == inputs.front())) throw invalid_set("edge-perturbation sets need one fixed input");
  for (const auto& X : inputs) {
    if (X.n() != spec.n()) throw config_error("input node count does not match the model");
    if (!bounded_by(X, K)) throw invalid_set("input exceeds the bound K");
  }
  for (const auto& m : masks) validate_mask(spec.graph, m);

  PerturbationSet p{cls, K, seed, spec.name, {}};
  p.records.resize(inputs.size() * masks.size());
  const int workers = resolve_jobs(jobs);
  for (std::size_t mi = 0; mi < masks.size(); ++mi) {
    std::vector<std::optional<Evaluator<double>>> evals(workers);
    parallel_for(inputs.size(), workers, [&](std::size_t k, int w) {
      if (!evals[w]) evals[w].emplace(spec, masks[mi]);
      p.records[mi * inputs.size() + k] = {inputs[k], masks[mi], evals[w]->run(inputs[k])};
    }, 64);
  }
  canonicalize(p);
  return p;
}

/// Exact by default; tolerance applies to Y only.
inline bool sets_equal(const PerturbationSet& a, const PerturbationSet& b, double tolerance = 0) {
  if (a.cls != b.cls) throw incomparable("perturbation sets of different classes");
  if (a.K != b.K || a.records.size() != b.records.size()) return false;
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    const auto& x = a.records[k];
    const auto& y = b.records[k];
    if (!(x.mask == y.mask) || !(x.X == y.X) || x.Y.size() != y.Y.size()) return false;
    for (std::size_t i = 0; i < x.Y.size(); ++i) {
      const double d = x.Y[i] - y.Y[i];
      if (!(d <= tolerance && -d <= tolerance)) return false;
    }
  }
  return true;
}

inline nlohmann::json to_json(const PerturbationRecord& r) {
  return {{"X", to_json(r.X)}, {"mask", to_json(r.mask)}, {"Y", r.Y}};
}

inline void write_jsonl(std::ostream& os, const PerturbationSet& p) {
  nlohmann::json header = {{"class", to_string(p.cls)}, {"K", p.K}, {"seed", p.seed}, {"model", p.model}};
  os << header.dump() << '\n';
  for (const auto& r : p.records) os << to_json(r).dump() << '\n';
}

inline PerturbationSet read_jsonl(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw config_error("perturbation file is missing its header line");
  const auto h = nlohmann::json::parse(line);
  PerturbationSet p;
  p.cls = parse_class(h.at("class").get<std::string>());
  p.K = h.at("K").get<double>();
  p.seed = h.value("seed", std::uint64_t{0});
  p.model = h.value("model", std::string{});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    p.records.push_back({sequence_from_json(j.at("X")), mask_from_json(j.at("mask")), j.at("Y").get<std::vector<double>>()});
  }
  return p;
}

/// Black-box access to a model under a perturbation class. Exposes the public
/// graph topology and answers output queries; never the model internals.
class ResponseOracle {
 public:
  ResponseOracle(ModelSpec spec, PerturbationClass cls, std::optional<FeatureSequence> fixed_input = std::nullopt,
                 bool bounded = true)
      : spec_(std::move(spec)), cls_(cls), fixed_(std::move(fixed_input)), bounded_(bounded) {
    spec_.validate();
    if (cls_ == PerturbationClass::Edge && !fixed_) throw config_error("edge-class oracle needs the fixed input");
  }
  ResponseOracle(const ResponseOracle& o)
      : spec_(o.spec_), cls_(o.cls_), fixed_(o.fixed_), bounded_(o.bounded_), queries_(o.queries_.load()) {}

  std::vector<double> query(const FeatureSequence& X, const EdgeMask& mask = {}) const {
    if (!allows_edge_perturbation(cls_) && !mask.empty())
      throw access_violation("edge removal is outside the node-perturbation class");
    if (cls_ == PerturbationClass::Edge && !(X == *fixed_))
      throw access_violation("input changes are outside the edge-perturbation class");
    if (bounded_ && !bounded_by(X, K())) throw access_violation("query input exceeds the bound K");
    ++queries_;
    return evaluate(spec_, X, mask);
  }

  const Graph& graph() const { return spec_.graph; }
  int n() const { return spec_.n(); }
  double K() const { return bound_K(spec_); }
  PerturbationClass cls() const { return cls_; }
  const std::optional<FeatureSequence>& fixed_input() const { return fixed_; }
  std::size_t queries() const { return queries_.load(); }

 private:
  ModelSpec spec_;
  PerturbationClass cls_;
  std::optional<FeatureSequence> fixed_;
  bool bounded_;
  mutable std::atomic<std::size_t> queries_{0};
};

}  // namespace tglab
