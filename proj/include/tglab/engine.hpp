#pragma once

#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tglab/error.hpp"
#include "tglab/graph.hpp"
#include "tglab/model.hpp"
#include "tglab/scalar.hpp"

namespace tglab {

/// X[t][i] with 1-indexed t and i. Feature dimension is fixed to one.
template <class S>
class basic_feature_sequence {
 public:
  basic_feature_sequence() = default;
  basic_feature_sequence(int T, int n) : T_(T), n_(n) {
    if (T < 1 || n < 1) throw invalid_size("feature sequence needs T >= 1 and n >= 1");
    v_.assign(static_cast<std::size_t>(T) * n, S(0));
  }

  static basic_feature_sequence from_rows(const std::vector<std::vector<S>>& rows) {
    if (rows.empty()) throw invalid_size("feature sequence needs at least one step");
    basic_feature_sequence X(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int t = 1; t <= X.T_; ++t) {
      if (static_cast<int>(rows[t - 1].size()) != X.n_) throw config_error("ragged feature rows");
      for (int i = 1; i <= X.n_; ++i) X(t, i) = rows[t - 1][i - 1];
    }
    return X;
  }

  int T() const { return T_; }
  int n() const { return n_; }

  S& operator()(int t, int i) { return v_[static_cast<std::size_t>(t - 1) * n_ + (i - 1)]; }
  const S& operator()(int t, int i) const { return v_[static_cast<std::size_t>(t - 1) * n_ + (i - 1)]; }

  const S* step(int t) const { return v_.data() + static_cast<std::size_t>(t - 1) * n_; }
  const std::vector<S>& values() const { return v_; }

  std::vector<std::vector<S>> rows() const {
    std::vector<std::vector<S>> out(T_, std::vector<S>(n_));
    for (int t = 1; t <= T_; ++t)
      for (int i = 1; i <= n_; ++i) out[t - 1][i - 1] = (*this)(t, i);
    return out;
  }

  template <class S2>
  basic_feature_sequence<S2> convert() const {
    basic_feature_sequence<S2> out(T_, n_);
    for (int t = 1; t <= T_; ++t)
      for (int i = 1; i <= n_; ++i) {
        if constexpr (std::is_same_v<S2, double>)
          out(t, i) = to_double((*this)(t, i));
        else
          out(t, i) = S2((*this)(t, i));
      }
    return out;
  }

  friend bool operator==(const basic_feature_sequence&, const basic_feature_sequence&) = default;

 private:
  int T_ = 0;
  int n_ = 0;
  std::vector<S> v_;
};

using FeatureSequence = basic_feature_sequence<double>;

inline nlohmann::json to_json(const FeatureSequence& X) { return X.rows(); }

inline FeatureSequence sequence_from_json(const nlohmann::json& j) {
  return FeatureSequence::from_rows(j.get<std::vector<std::vector<double>>>());
}

struct ForwardInput {
  FeatureSequence X;
  EdgeMask mask;
};

/// {"T": int, "n": int, "X": [[...], ...], "mask": [[i,j], ...]}; T, n and mask optional.
inline ForwardInput input_from_json(const nlohmann::json& j) {
  ForwardInput in;
  in.X = sequence_from_json(j.at("X"));
  if (j.contains("T") && j["T"].get<int>() != in.X.T()) throw config_error("T does not match X");
  if (j.contains("n") && j["n"].get<int>() != in.X.n()) throw config_error("n does not match X");
  if (j.contains("mask")) in.mask = mask_from_json(j["mask"]);
  return in;
}

template <class S>
struct NodeState {
  std::array<S, kSlotCount> v{};

  S& operator[](Slot s) { return v[static_cast<int>(s)]; }
  const S& operator[](Slot s) const { return v[static_cast<int>(s)]; }

  friend bool operator==(const NodeState&, const NodeState&) = default;
};

template <class S>
nlohmann::json to_json(const NodeState<S>& st, Schema schema) {
  nlohmann::json j = nlohmann::json::object();
  for (Slot s : schema_slots(schema)) j[std::string(slot_name(s))] = to_double(st[s]);
  return j;
}

// Node-level rules. All are pure and shared by every evaluation path.

template <class S>
NodeState<S> init_node(const ModelSpec& spec, int i, const S& x, const S& h_prev) {
  using enum Slot;
  NodeState<S> st;
  st[hr] = x;
  st[ht] = h_prev;
  st[hs] = S(spec.constants.hs[i - 1]);
  st[hz] = S(spec.constants.hz[i - 1]);
  if (spec.schema == Schema::GA7) {
    st[ho] = S((*spec.constants.ho)[i - 1]);
    // The max-combination message only equals max{hr, ht} when ho+/ho- hold the
    // split of hr - ht, so layer 0 is seeded with that split.
    if (spec.msg_rule == MsgRule::MaxCombination) {
      st[ho_plus] = relu(S(x - h_prev));
      st[ho_minus] = relu(S(h_prev - x));
    }
  }
  return st;
}

template <class S>
std::vector<NodeState<S>> init_hidden(const ModelSpec& spec, const std::vector<S>& x, const std::vector<S>& h_prev) {
  if (static_cast<int>(x.size()) != spec.n() || static_cast<int>(h_prev.size()) != spec.n())
    throw config_error("init_hidden: dimension mismatch");
  std::vector<NodeState<S>> out;
  out.reserve(x.size());
  for (int i = 1; i <= spec.n(); ++i) out.push_back(init_node(spec, i, x[i - 1], h_prev[i - 1]));
  return out;
}

template <class S>
S msg(const ModelSpec& spec, const NodeState<S>& st) {
  using enum Slot;
  if (spec.msg_rule == MsgRule::GatedReceive) return relu(S(st[hr] - st[hs]));
  return relu(S((st[hr] + st[ht] + st[ho_plus] + st[ho_minus]) / 2 - st[hs]));
}

template <class S>
S agg(const std::vector<S>& incoming) {
  S sum(0);
  for (const auto& x : incoming) sum += x;
  return sum;
}

template <class S>
NodeState<S> upd(const ModelSpec& spec, const NodeState<S>& prev, const S& a) {
  using enum Slot;
  NodeState<S> st;
  st[hr] = relu(a);
  st[ht] = relu(prev[ht]);
  st[hs] = relu(prev[hs]);
  st[hz] = relu(prev[hz]);
  switch (spec.schema) {
    case Schema::GA7:
      st[ho] = relu(prev[ho]);
      [[fallthrough]];
    case Schema::GV6:
      st[ho_plus] = relu(S(a - prev[ht]));
      st[ho_minus] = relu(S(prev[ht] - a));
      break;
    case Schema::GE11:
      st[hl] = relu(prev[hr]);
      st[hrl_plus] = relu(S(a - prev[hr]));
      st[hrl_minus] = relu(S(prev[hr] - a));
      st[hrt_plus] = relu(S(a - prev[ht]));
      st[hrt_minus] = relu(S(prev[ht] - a));
      st[hlt_plus] = relu(S(prev[hr] - prev[ht]));
      st[hlt_minus] = relu(S(prev[ht] - prev[hr]));
      break;
  }
  return st;
}

/// Temporal message H_i and output Y_i of one node.
template <class S>
std::pair<S, S> readout_node(const ModelSpec& spec, const NodeState<S>& st) {
  using enum Slot;
  switch (spec.readout_rule) {
    case ReadoutRule::MaxGateV: {
      S h = relu(S((st[hr] + st[ht] + st[ho_plus] + st[ho_minus]) / 2 - st[hz]));
      return {h, h};
    }
    case ReadoutRule::NestedMaxE: {
      // max{max{hr, hl}, ht} from two applications of max{x,y} = (x+y+|x-y|)/2
      S p = (st[hr] + st[hl] + st[hrl_plus] + st[hrl_minus]) / 2;
      S tau = (p + st[ht] + relu(S(p - st[ht])) + relu(S(st[ht] - p))) / 2;
      S h = relu(S(tau - st[hz]));
      return {h, h};
    }
    case ReadoutRule::SplitA:
      return {relu(S(st[hr] - st[hz])), relu(S(st[hr] - st[ho]))};
  }
  return {S(0), S(0)};
}

template <class S>
std::pair<std::vector<S>, std::vector<S>> readout(const ModelSpec& spec, const std::vector<NodeState<S>>& states) {
  std::vector<S> H, Y;
  for (const auto& st : states) {
    auto [h, y] = readout_node(spec, st);
    H.push_back(h);
    Y.push_back(y);
  }
  return {H, Y};
}

/// Sink that ignores every event; used by the plain evaluation path.
template <class S>
struct NullSink {
  void begin_step(int, const std::vector<S>&) {}
  void layer0(int, const std::vector<NodeState<S>>&) {}
  void layer(int, int, const std::vector<S>&, const std::vector<S>&, const std::vector<NodeState<S>>&) {}
  void end_step(int, const std::vector<S>&, const std::vector<S>&) {}
};

/// Reusable forward evaluator for one (model, mask) pair. Not thread-safe;
/// give each worker its own instance.
template <class S>
class Evaluator {
 public:
  Evaluator(const ModelSpec& spec, const EdgeMask& mask = {}) : spec_(spec), mask_(mask) {
    spec_.validate();
    const Graph g = apply_mask(spec_.graph, mask_);
    const int n = g.n();
    nbr_.resize(n);
    for (int i = 1; i <= n; ++i)
      for (int j : g.neighbors(i)) nbr_[i - 1].push_back(j - 1);
    cur_.resize(n);
    nxt_.resize(n);
    m_.assign(n, S(0));
    a_.assign(n, S(0));
    H_.assign(n, S(0));
    H_prev_.assign(n, S(0));
    Y_.assign(n, S(0));
  }

  const ModelSpec& spec() const { return spec_; }
  const EdgeMask& mask() const { return mask_; }

  template <class Sink>
  const std::vector<S>& run(const basic_feature_sequence<S>& X, Sink& sink) {
    const int n = spec_.n();
    if (X.n() != n) throw config_error("input has " + std::to_string(X.n()) + " nodes, model has " + std::to_string(n));
    const bool temporal = spec_.temporal_mode == TemporalMode::TGNN;
    std::fill(H_.begin(), H_.end(), S(0));
    for (int t = 1; t <= X.T(); ++t) {
      for (int i = 0; i < n; ++i) H_prev_[i] = temporal ? H_[i] : S(0);
      sink.begin_step(t, H_prev_);
      const S* x = X.step(t);
      for (int i = 0; i < n; ++i) cur_[i] = init_node(spec_, i + 1, x[i], H_prev_[i]);
      sink.layer0(t, cur_);
      for (int l = 1; l <= spec_.layers; ++l) {
        for (int i = 0; i < n; ++i) m_[i] = msg(spec_, cur_[i]);
        for (int i = 0; i < n; ++i) {
          S sum(0);
          for (int j : nbr_[i]) sum += m_[j];
          a_[i] = sum;
        }
        for (int i = 0; i < n; ++i) nxt_[i] = upd(spec_, cur_[i], a_[i]);
        std::swap(cur_, nxt_);
        sink.layer(t, l, m_, a_, cur_);
      }
      for (int i = 0; i < n; ++i) {
        auto [h, y] = readout_node(spec_, cur_[i]);
        H_[i] = h;
        Y_[i] = y;
      }
      sink.end_step(t, H_, Y_);
    }
    return Y_;
  }

  const std::vector<S>& run(const basic_feature_sequence<S>& X) {
    NullSink<S> sink;
    return run(X, sink);
  }

 private:
  ModelSpec spec_;
  EdgeMask mask_;
  std::vector<std::vector<int>> nbr_;
  std::vector<NodeState<S>> cur_, nxt_;
  std::vector<S> m_, a_, H_, H_prev_, Y_;
};

/// Every internal signal of one forward run. Accessors use 1-indexed t, l, i, j.
template <class S>
class basic_trace {
 public:
  basic_trace() = default;
  basic_trace(const ModelSpec& spec, const EdgeMask& mask, int T)
      : model_(spec.name), graph_(spec.graph), mask_(mask), schema_(spec.schema),
        readout_(spec.readout_rule), T_(T), n_(spec.n()), L_(spec.layers) {
    const auto tn = static_cast<std::size_t>(T_) * n_;
    H_prev_.assign(tn, S(0));
    H_.assign(tn, S(0));
    Yt_.assign(tn, S(0));
    h_.assign(tn * (L_ + 1), NodeState<S>{});
    a_.assign(tn * L_, S(0));
    m_.assign(tn * L_ * n_, S(0));
  }

  const std::string& model() const { return model_; }
  const Graph& graph() const { return graph_; }
  const EdgeMask& mask() const { return mask_; }
  Schema schema() const { return schema_; }
  ReadoutRule readout_rule() const { return readout_; }
  int T() const { return T_; }
  int n() const { return n_; }
  int L() const { return L_; }

  /// Message from i to j. Zero for non-edges and masked edges.
  const S& m(int t, int l, int i, int j) const { return m_[idx_m(t, l, i, j)]; }
  const S& a(int t, int l, int i) const { return a_[idx_l(t, l, i)]; }
  /// l = 0 is the initial state.
  const NodeState<S>& h(int t, int l, int i) const { return h_[idx_h(t, l, i)]; }
  /// H^(t)_i for t in 0..T; H^(0) is zero.
  S H(int t, int i) const { return t == 0 ? S(0) : H_[idx(t, i)]; }
  /// Temporal message actually fed into step t (zero in GNN mode).
  const S& H_prev(int t, int i) const { return H_prev_[idx(t, i)]; }
  const S& Y_at(int t, int i) const { return Yt_[idx(t, i)]; }
  const S& Y(int i) const { return Yt_[idx(T_, i)]; }
  std::vector<S> Y() const {
    std::vector<S> out;
    for (int i = 1; i <= n_; ++i) out.push_back(Y(i));
    return out;
  }

  // Writers used by the recording sink.
  S& H_prev_ref(int t, int i) { return H_prev_[idx(t, i)]; }
  S& H_ref(int t, int i) { return H_[idx(t, i)]; }
  S& Y_ref(int t, int i) { return Yt_[idx(t, i)]; }
  NodeState<S>& h_ref(int t, int l, int i) { return h_[idx_h(t, l, i)]; }
  S& a_ref(int t, int l, int i) { return a_[idx_l(t, l, i)]; }
  S& m_ref(int t, int l, int i, int j) { return m_[idx_m(t, l, i, j)]; }

 private:
  std::size_t idx(int t, int i) const { return static_cast<std::size_t>(t - 1) * n_ + (i - 1); }
  std::size_t idx_l(int t, int l, int i) const {
    return (static_cast<std::size_t>(t - 1) * L_ + (l - 1)) * n_ + (i - 1);
  }
  std::size_t idx_h(int t, int l, int i) const {
    return (static_cast<std::size_t>(t - 1) * (L_ + 1) + l) * n_ + (i - 1);
  }
  std::size_t idx_m(int t, int l, int i, int j) const { return idx_l(t, l, i) * n_ + (j - 1); }

  std::string model_;
  Graph graph_;
  EdgeMask mask_;
  Schema schema_ = Schema::GV6;
  ReadoutRule readout_ = ReadoutRule::MaxGateV;
  int T_ = 0, n_ = 0, L_ = 0;
  std::vector<S> H_prev_, H_, Yt_, a_, m_;
  std::vector<NodeState<S>> h_;
};

using Trace = basic_trace<double>;

template <class S>
class TraceSink {
 public:
  explicit TraceSink(basic_trace<S>& trace) : tr_(trace) {
    const Graph g = apply_mask(trace.graph(), trace.mask());
    for (int i = 1; i <= g.n(); ++i) nbr_.push_back(g.neighbors(i));
  }
  void begin_step(int t, const std::vector<S>& h_prev) {
    for (int i = 1; i <= tr_.n(); ++i) tr_.H_prev_ref(t, i) = h_prev[i - 1];
  }
  void layer0(int t, const std::vector<NodeState<S>>& st) {
    for (int i = 1; i <= tr_.n(); ++i) tr_.h_ref(t, 0, i) = st[i - 1];
  }
  void layer(int t, int l, const std::vector<S>& m, const std::vector<S>& a, const std::vector<NodeState<S>>& st) {
    for (int i = 1; i <= tr_.n(); ++i) {
      for (int j : nbr_[i - 1]) tr_.m_ref(t, l, i, j) = m[i - 1];
      tr_.a_ref(t, l, i) = a[i - 1];
      tr_.h_ref(t, l, i) = st[i - 1];
    }
  }
  void end_step(int t, const std::vector<S>& H, const std::vector<S>& Y) {
    for (int i = 1; i <= tr_.n(); ++i) {
      tr_.H_ref(t, i) = H[i - 1];
      tr_.Y_ref(t, i) = Y[i - 1];
    }
  }

 private:
  basic_trace<S>& tr_;
  std::vector<std::vector<int>> nbr_;
};

template <class S>
struct basic_forward_result {
  std::vector<S> Y;
  basic_trace<S> trace;
};

/// Full forward run with trace recording.
template <class S>
basic_forward_result<S> forward(const ModelSpec& spec, const basic_feature_sequence<S>& X, const EdgeMask& mask = {}) {
  Evaluator<S> ev(spec, mask);
  basic_forward_result<S> out;
  out.trace = basic_trace<S>(spec, mask, X.T());
  TraceSink<S> sink(out.trace);
  out.Y = ev.run(X, sink);
  return out;
}

/// Output only, no trace.
template <class S>
std::vector<S> evaluate(const ModelSpec& spec, const basic_feature_sequence<S>& X, const EdgeMask& mask = {}) {
  Evaluator<S> ev(spec, mask);
  return ev.run(X);
}

template <class S>
nlohmann::json to_json(const basic_trace<S>& tr) {
  using nlohmann::json;
  auto vec = [&](auto&& f) {
    json a = json::array();
    for (int i = 1; i <= tr.n(); ++i) a.push_back(to_double(f(i)));
    return a;
  };
  json steps = json::array();
  for (int t = 1; t <= tr.T(); ++t) {
    json layers = json::array();
    for (int l = 0; l <= tr.L(); ++l) {
      json layer = {{"l", l}};
      if (l > 0) {
        json m = json::array();
        for (int i = 1; i <= tr.n(); ++i) {
          json row = json::array();
          for (int j = 1; j <= tr.n(); ++j) row.push_back(to_double(tr.m(t, l, i, j)));
          m.push_back(row);
        }
        layer["m"] = m;
        layer["a"] = vec([&](int i) { return tr.a(t, l, i); });
      }
      json h = json::array();
      for (int i = 1; i <= tr.n(); ++i) h.push_back(to_json(tr.h(t, l, i), tr.schema()));
      layer["h"] = h;
      layers.push_back(layer);
    }
    steps.push_back({{"t", t},
                     {"H_prev", vec([&](int i) { return tr.H_prev(t, i); })},
                     {"layers", layers},
                     {"H", vec([&](int i) { return tr.H(t, i); })},
                     {"Y", vec([&](int i) { return tr.Y_at(t, i); })}});
  }
  return {{"model", tr.model()},
          {"T", tr.T()},
          {"n", tr.n()},
          {"L", tr.L()},
          {"graph", to_json(tr.graph())},
          {"mask", to_json(tr.mask())},
          {"steps", steps},
          {"Y", vec([&](int i) { return tr.Y(i); })}};
}

}  // namespace tglab
