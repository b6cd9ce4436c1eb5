#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tglab/dbn.hpp"
#include "tglab/engine.hpp"
#include "tglab/parallel.hpp"
#include "tglab/perturbation.hpp"
#include "tglab/report.hpp"

namespace tglab {

// Functional consistency test. The models are deterministic, so a DBN claim
// "V_i^t depends only on X_i^t, its intra-slice neighbors at t and its
// inter-slice parents at t-1" is refuted by two inputs that agree on all of
// those bundles but disagree on V_i^t. Inputs are produced by sweeping one
// input entry X_j^s over a grid on [-K, K] around each sampled base point, and
// every pair of sweep runs is compared exactly.

struct SweepOptions {
  int grid_points = 17;
  int jobs = 1;
  std::uint64_t seed = 0;  // echoed into reports
  EdgeMask mask;
  bool timing = false;
};

/// Offsets of each (t, i) bundle in a flat per-run buffer.
class BundleLayout {
 public:
  BundleLayout(const ModelSpec& spec, int T) : n_(spec.n()), T_(T), L_(spec.layers) {
    const bool split = spec.readout_rule == ReadoutRule::SplitA;
    for (int i = 1; i <= n_; ++i) nbrs_.push_back(spec.graph.neighbors(i));
    std::size_t off = 0;
    for (int t = 1; t <= T_; ++t)
      for (int i = 1; i <= n_; ++i) {
        offset_.push_back(off);
        const std::size_t len = static_cast<std::size_t>(L_) * nbrs_[i - 1].size() + 1 + ((split && t == T_) ? 1 : 0);
        length_.push_back(len);
        off += len;
      }
    total_ = off;
  }

  int n() const { return n_; }
  int T() const { return T_; }
  int L() const { return L_; }
  int variables() const { return n_ * T_; }
  std::size_t total() const { return total_; }
  /// Variable index of (t, i), both 1-indexed.
  int var(int t, int i) const { return (t - 1) * n_ + (i - 1); }
  std::size_t offset(int v) const { return offset_[v]; }
  std::size_t length(int v) const { return length_[v]; }
  const std::vector<int>& neighbors(int i) const { return nbrs_[i - 1]; }

 private:
  int n_, T_, L_;
  std::vector<std::vector<int>> nbrs_;
  std::vector<std::size_t> offset_, length_;
  std::size_t total_ = 0;
};

/// Writes the bundles of one run into a flat buffer laid out by BundleLayout.
class BundleSink {
 public:
  BundleSink(const BundleLayout& lay, const Graph& base, const EdgeMask& mask, bool split)
      : lay_(&lay), split_(split) {
    for (int i = 1; i <= lay.n(); ++i) {
      std::vector<char> open;
      for (int j : lay.neighbors(i)) open.push_back(!mask.contains(Edge(i, j)) && base.has_edge(Edge(i, j)));
      open_.push_back(std::move(open));
    }
  }
  void set_output(double* out) { out_ = out; }

  void begin_step(int, const std::vector<double>&) {}
  void layer0(int, const std::vector<NodeState<double>>&) {}
  void layer(int t, int l, const std::vector<double>& m, const std::vector<double>&, const std::vector<NodeState<double>>&) {
    for (int i = 1; i <= lay_->n(); ++i) {
      const auto& open = open_[i - 1];
      double* p = out_ + lay_->offset(lay_->var(t, i)) + static_cast<std::size_t>(l - 1) * open.size();
      for (std::size_t k = 0; k < open.size(); ++k) p[k] = open[k] ? m[i - 1] : 0.0;
    }
  }
  void end_step(int t, const std::vector<double>& H, const std::vector<double>& Y) {
    for (int i = 1; i <= lay_->n(); ++i) {
      double* p = out_ + lay_->offset(lay_->var(t, i)) + static_cast<std::size_t>(lay_->L()) * open_[i - 1].size();
      p[0] = H[i - 1];
      if (split_ && t == lay_->T()) p[1] = Y[i - 1];
    }
  }

 private:
  const BundleLayout* lay_;
  bool split_;
  std::vector<std::vector<char>> open_;
  double* out_ = nullptr;
};

struct ConsistencyViolation {
  std::uint64_t base_index = 0;
  int sweep_node = 0, sweep_t = 0;    // swept input X_j^s
  int target_node = 0, target_t = 0;  // V_i^t that changed
  FeatureSequence X, X_alt;
  std::vector<double> lhs, rhs;
};

struct ConsistencyOutcome {
  Status status = Status::Pass;
  std::uint64_t bases = 0;  // bases examined up to the verdict
  std::optional<ConsistencyViolation> violation;
};

inline std::vector<double> grid_points(double K, int points) {
  if (points < 2) throw config_error("sweep grid needs at least 2 points");
  std::vector<double> g;
  for (int k = 0; k < points; ++k) g.push_back(-K + (2 * K) * k / (points - 1));
  return g;
}

/// Evaluates sweep evidence once per base point and tests it against several
/// DBNs at the same time.
class SweepChecker {
 public:
  SweepChecker(const ModelSpec& spec, std::vector<Dbn> dbns, SweepOptions opts = {})
      : spec_(spec), dbns_(std::move(dbns)), opts_(std::move(opts)) {
    spec_.validate();
    validate_mask(spec_.graph, opts_.mask);
    for (const auto& d : dbns_)
      if (d.n != spec_.n()) throw incomparable("DBN '" + d.name + "' and model have different node counts");
    if (opts_.grid_points > 255) throw config_error("sweep grid limited to 255 points");
    for (const auto& d : dbns_) {
      std::vector<std::vector<int>> nb, par;
      for (int i = 1; i <= d.n; ++i) {
        nb.push_back(d.intra_neighbors(i));
        par.push_back(d.inter_parents(i));
      }
      intra_.push_back(std::move(nb));
      parents_.push_back(std::move(par));
    }
    grid_ = grid_points(bound_K(spec_), opts_.grid_points);
  }

  std::vector<ConsistencyOutcome> run(const InputSource& source, std::uint64_t trials) const {
    constexpr auto none = std::numeric_limits<std::uint64_t>::max();
    const std::size_t D = dbns_.size();
    const int jobs = resolve_jobs(opts_.jobs);
    std::vector<std::atomic<std::uint64_t>> best(D);
    for (auto& b : best) b.store(none);
    std::atomic<std::uint64_t> exhausted{none};
    std::vector<Worker> workers;
    workers.reserve(jobs);
    for (int w = 0; w < jobs; ++w) workers.emplace_back(*this, D);

    parallel_for(trials, jobs, [&](std::size_t k, int w) {
      if (k >= exhausted.load()) return;
      bool needed = false;
      for (std::size_t d = 0; d < D; ++d) needed |= best[d].load() > k;
      if (!needed) return;
      auto X = source(k);
      if (!X) {
        std::uint64_t cur = exhausted.load();
        while (k < cur && !exhausted.compare_exchange_weak(cur, k)) {}
        return;
      }
      if (X->n() != spec_.n()) throw config_error("sampler node count does not match the model");
      workers[w].check_base(k, *X, best);
    }, 8);

    std::vector<ConsistencyOutcome> out(D);
    for (std::size_t d = 0; d < D; ++d) {
      const std::uint64_t b = best[d].load();
      if (b != none) {
        out[d].status = Status::Fail;
        out[d].bases = b + 1;
        for (auto& w : workers)
          if (w.found[d] && w.found[d]->base_index == b) out[d].violation = w.found[d];
      } else if (exhausted.load() != none) {
        out[d].status = Status::Inconclusive;
        out[d].bases = exhausted.load();
      } else {
        out[d].bases = trials;
      }
    }
    return out;
  }

  const std::vector<Dbn>& dbns() const { return dbns_; }

 private:
  struct Worker {
    const SweepChecker& ck;
    BundleLayout lay;
    Evaluator<double> ev;
    BundleSink sink;
    std::vector<double> buf;                // [run][total]
    std::vector<std::uint8_t> cls;          // [run][variable]
    std::vector<std::optional<ConsistencyViolation>> found;
    std::vector<int> cond;

    Worker(const SweepChecker& c, std::size_t D)
        : ck(c), lay(c.spec_, 1), ev(c.spec_, c.opts_.mask),
          sink(lay, c.spec_.graph, c.opts_.mask, c.spec_.readout_rule == ReadoutRule::SplitA), found(D) {}

    Worker(Worker&& o) noexcept
        : ck(o.ck), lay(o.lay), ev(o.ev),
          sink(lay, ck.spec_.graph, ck.opts_.mask, ck.spec_.readout_rule == ReadoutRule::SplitA),
          buf(std::move(o.buf)), cls(std::move(o.cls)), found(std::move(o.found)) {}

    void ensure_layout(int T) {
      if (lay.T() == T) return;
      lay = BundleLayout(ck.spec_, T);
      sink = BundleSink(lay, ck.spec_.graph, ck.opts_.mask, ck.spec_.readout_rule == ReadoutRule::SplitA);
    }

    bool same_bundle(int r1, int r2, int v) const {
      const double* a = buf.data() + r1 * lay.total() + lay.offset(v);
      const double* b = buf.data() + r2 * lay.total() + lay.offset(v);
      for (std::size_t k = 0; k < lay.length(v); ++k)
        if (!(a[k] == b[k])) return false;
      return true;
    }

    void check_base(std::uint64_t k, const FeatureSequence& base, std::vector<std::atomic<std::uint64_t>>& best) {
      ensure_layout(base.T());
      const int G = static_cast<int>(ck.grid_.size());
      const int V = lay.variables();
      buf.assign(static_cast<std::size_t>(G) * lay.total(), 0.0);
      cls.assign(static_cast<std::size_t>(G) * V, 0);
      std::vector<int> reps;
      std::vector<char> varies(V);

      for (int s = 1; s <= base.T(); ++s)
        for (int j = 1; j <= base.n(); ++j) {
          FeatureSequence X = base;
          for (int r = 0; r < G; ++r) {
            X(s, j) = ck.grid_[r];
            sink.set_output(buf.data() + r * lay.total());
            ev.run(X, sink);
          }
          for (int v = 0; v < V; ++v) {
            reps.clear();
            for (int r = 0; r < G; ++r) {
              int c = 0;
              while (c < static_cast<int>(reps.size()) && !same_bundle(reps[c], r, v)) ++c;
              if (c == static_cast<int>(reps.size())) reps.push_back(r);
              cls[r * V + v] = static_cast<std::uint8_t>(c);
            }
            varies[v] = reps.size() > 1;
          }
          const int swept = lay.var(s, j);
          for (std::size_t d = 0; d < ck.dbns_.size(); ++d) {
            if (best[d].load() <= k) continue;
            if (auto viol = find_violation(d, swept, varies, G, V)) {
              auto [i, t, r1, r2] = *viol;
              ConsistencyViolation cv;
              cv.base_index = k;
              cv.sweep_node = j;
              cv.sweep_t = s;
              cv.target_node = i;
              cv.target_t = t;
              cv.X = base;
              cv.X(s, j) = ck.grid_[r1];
              cv.X_alt = base;
              cv.X_alt(s, j) = ck.grid_[r2];
              const int v = lay.var(t, i);
              const double* a = buf.data() + r1 * lay.total() + lay.offset(v);
              const double* b = buf.data() + r2 * lay.total() + lay.offset(v);
              cv.lhs.assign(a, a + lay.length(v));
              cv.rhs.assign(b, b + lay.length(v));
              if (!found[d] || found[d]->base_index > k) found[d] = std::move(cv);
              std::uint64_t cur = best[d].load();
              while (k < cur && !best[d].compare_exchange_weak(cur, k)) {}
            }
          }
        }
    }

    /// First (target, run pair) whose conditioning bundles agree but whose own bundle differs.
    std::optional<std::array<int, 4>> find_violation(std::size_t d, int swept, const std::vector<char>& varies, int G,
                                                     int V) {
      for (int t = 1; t <= lay.T(); ++t)
        for (int i = 1; i <= lay.n(); ++i) {
          const int v = lay.var(t, i);
          // X_i^t is part of the conditioning set, so sweeping it cannot expose a violation.
          if (!varies[v] || v == swept) continue;
          cond.clear();
          for (int nb : ck.intra_[d][i - 1]) cond.push_back(lay.var(t, nb));
          if (t > 1)
            for (int p : ck.parents_[d][i - 1]) cond.push_back(lay.var(t - 1, p));
          for (int r1 = 0; r1 < G; ++r1)
            for (int r2 = r1 + 1; r2 < G; ++r2) {
              if (cls[r1 * V + v] == cls[r2 * V + v]) continue;
              bool same = true;
              for (int c : cond)
                if (cls[r1 * V + c] != cls[r2 * V + c]) {
                  same = false;
                  break;
                }
              if (same) return std::array<int, 4>{i, t, r1, r2};
            }
        }
      return std::nullopt;
    }
  };

  ModelSpec spec_;
  std::vector<Dbn> dbns_;
  SweepOptions opts_;
  std::vector<double> grid_;
  std::vector<std::vector<std::vector<int>>> intra_, parents_;  // [dbn][node-1]
};

namespace detail {

inline std::string var_name(int i, int t) { return "V" + std::to_string(i) + "^" + std::to_string(t); }

inline VerificationReport consistency_report(const Dbn& d, const ModelSpec& spec, const ConsistencyOutcome& o,
                                             const SweepOptions& opts) {
  VerificationReport r;
  r.check_id = "consistency:" + d.name + ":" + spec.name;
  r.status = o.status;
  r.trials = o.bases;
  r.seed = opts.seed;
  r.params = {{"dbn", to_json(d)}, {"model", spec.name}, {"grid_points", opts.grid_points}, {"mask", to_json(opts.mask)}};
  if (o.violation) {
    const auto& v = *o.violation;
    double diff = 0;
    for (std::size_t k = 0; k < v.lhs.size() && k < v.rhs.size(); ++k) diff = std::max(diff, std::abs(v.lhs[k] - v.rhs[k]));
    r.max_discrepancy = diff;
    add_counterexample(r, {v.X, v.X_alt, opts.mask, v.lhs, v.rhs,
                           var_name(v.target_node, v.target_t) + " changed with identical conditioning bundles while sweeping X" +
                               std::to_string(v.sweep_node) + "^" + std::to_string(v.sweep_t) + " (base " +
                               std::to_string(v.base_index) + ")"});
  }
  if (o.status == Status::Inconclusive) r.notes.push_back("input source exhausted before the requested trials");
  return r;
}

/// Minimality verdict from the outcome of the DBN itself and of each single-edge removal.
inline VerificationReport minimality_report(const Dbn& d, const ModelSpec& spec, const ConsistencyOutcome& self,
                                            const std::vector<std::pair<std::string, Dbn>>& removals,
                                            const std::vector<ConsistencyOutcome>& removal_outcomes,
                                            const SweepOptions& opts, const FeatureSequence& first_base) {
  VerificationReport r;
  r.check_id = "minimality:" + d.name + ":" + spec.name;
  r.seed = opts.seed;
  r.params = {{"dbn", to_json(d)}, {"model", spec.name}, {"grid_points", opts.grid_points}};
  r.trials = self.bases;
  if (self.status != Status::Pass) {
    r.status = self.status;
    r.notes.push_back("DBN is not consistent with the model, so minimality is undefined");
    if (self.violation)
      add_counterexample(r, {self.violation->X, self.violation->X_alt, opts.mask, self.violation->lhs,
                             self.violation->rhs, "consistency violation of the unreduced DBN"});
    return r;
  }
  std::vector<std::string> removable;
  bool inconclusive = false;
  for (std::size_t k = 0; k < removals.size(); ++k) {
    const auto& o = removal_outcomes[k];
    if (o.status == Status::Pass) removable.push_back(removals[k].first);
    if (o.status == Status::Inconclusive) inconclusive = true;
    if (o.violation)
      r.notes.push_back("removing " + removals[k].first + " breaks consistency (" +
                        var_name(o.violation->target_node, o.violation->target_t) + ", base " +
                        std::to_string(o.violation->base_index) + ")");
  }
  if (!removable.empty()) {
    r.status = Status::Fail;
    for (const auto& e : removable) {
      r.notes.push_back("edge " + e + " is removable: no violation without it");
      add_counterexample(r, {first_base, std::nullopt, opts.mask, {}, {}, "edge " + e + " removable over all sampled bases"});
    }
  } else if (inconclusive) {
    r.status = Status::Inconclusive;
  }
  return r;
}

}  // namespace detail

inline VerificationReport check_consistency(const Dbn& d, const ModelSpec& spec, const InputSource& source,
                                            std::uint64_t trials, const SweepOptions& opts = {}) {
  Stopwatch sw;
  SweepChecker ck(spec, {d}, opts);
  auto r = detail::consistency_report(d, spec, ck.run(source, trials)[0], opts);
  if (opts.timing) r.runtime_ms = sw.elapsed_ms();
  return r;
}

/// Bundle of consistency and minimality for one (DBN, model) pair.
struct TransparencyResult {
  VerificationReport consistency;
  VerificationReport minimality;

  bool transparent() const { return consistency.passed() && minimality.passed(); }
};

/// Runs consistency and minimality for several DBNs against one model on a
/// single shared pass over the sweep evidence.
inline std::vector<TransparencyResult> check_transparency_many(const std::vector<Dbn>& dbns, const ModelSpec& spec,
                                                               const InputSource& source, std::uint64_t trials,
                                                               const SweepOptions& opts = {}) {
  std::vector<Dbn> all;
  std::vector<std::vector<std::pair<std::string, Dbn>>> removals;
  std::vector<std::size_t> first;
  for (const auto& d : dbns) {
    first.push_back(all.size());
    all.push_back(d);
    removals.push_back(single_edge_removals(d));
    for (const auto& [label, r] : removals.back()) all.push_back(r);
  }
  SweepChecker ck(spec, all, opts);
  const auto outcomes = ck.run(source, trials);
  auto base0 = source(0);
  const FeatureSequence first_base = base0 ? *base0 : FeatureSequence(1, spec.n());
  std::vector<TransparencyResult> out;
  for (std::size_t k = 0; k < dbns.size(); ++k) {
    const auto& self = outcomes[first[k]];
    std::vector<ConsistencyOutcome> rem(outcomes.begin() + first[k] + 1,
                                        outcomes.begin() + first[k] + 1 + removals[k].size());
    out.push_back({detail::consistency_report(dbns[k], spec, self, opts),
                   detail::minimality_report(dbns[k], spec, self, removals[k], rem, opts, first_base)});
  }
  return out;
}

inline VerificationReport check_minimality(const Dbn& d, const ModelSpec& spec, const InputSource& source,
                                           std::uint64_t trials, const SweepOptions& opts = {}) {
  Stopwatch sw;
  auto r = check_transparency_many({d}, spec, source, trials, opts)[0].minimality;
  if (opts.timing) r.runtime_ms = sw.elapsed_ms();
  return r;
}

/// Consistency and minimality together.
inline VerificationReport check_transparent(const Dbn& d, const ModelSpec& spec, const InputSource& source,
                                            std::uint64_t trials, const SweepOptions& opts = {}) {
  Stopwatch sw;
  auto res = check_transparency_many({d}, spec, source, trials, opts)[0];
  auto r = composite("transparent:" + d.name + ":" + spec.name, {res.consistency, res.minimality}, opts.seed);
  if (opts.timing) r.runtime_ms = sw.elapsed_ms();
  return r;
}

}  // namespace tglab
