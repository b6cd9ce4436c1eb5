#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tglab/error.hpp"
#include "tglab/graph.hpp"

namespace tglab {

enum class Schema { GV6, GE11, GA7 };
enum class MsgRule { GatedReceive, MaxCombination };
enum class ReadoutRule { MaxGateV, NestedMaxE, SplitA };
enum class TemporalMode { TGNN, GNN };

/// Union of every named slot across the three schemas.
enum class Slot : int {
  hr, ht, hs, hz, hl, ho, ho_plus, ho_minus,
  hrl_plus, hrl_minus, hrt_plus, hrt_minus, hlt_plus, hlt_minus
};
inline constexpr int kSlotCount = 14;

inline std::string_view slot_name(Slot s) {
  static constexpr std::array<std::string_view, kSlotCount> names = {
      "hr", "ht", "hs", "hz", "hl", "ho", "ho_plus", "ho_minus",
      "hrl_plus", "hrl_minus", "hrt_plus", "hrt_minus", "hlt_plus", "hlt_minus"};
  return names[static_cast<int>(s)];
}

/// Slots of a schema in their canonical order.
inline const std::vector<Slot>& schema_slots(Schema s) {
  using enum Slot;
  static const std::vector<Slot> gv{hr, ht, hs, hz, ho_plus, ho_minus};
  static const std::vector<Slot> ge{hr, ht, hs, hz, hl, hrl_plus, hrl_minus,
                                    hrt_plus, hrt_minus, hlt_plus, hlt_minus};
  static const std::vector<Slot> ga{hr, ht, hs, hz, ho, ho_plus, ho_minus};
  switch (s) {
    case Schema::GV6: return gv;
    case Schema::GE11: return ge;
    case Schema::GA7: return ga;
  }
  return gv;
}

inline std::string_view to_string(Schema s) {
  switch (s) {
    case Schema::GV6: return "GV6";
    case Schema::GE11: return "GE11";
    case Schema::GA7: return "GA7";
  }
  return "?";
}
inline std::string_view to_string(MsgRule r) {
  return r == MsgRule::GatedReceive ? "GATED_RECEIVE" : "MAX_COMBINATION";
}
inline std::string_view to_string(ReadoutRule r) {
  switch (r) {
    case ReadoutRule::MaxGateV: return "MAXGATE_V";
    case ReadoutRule::NestedMaxE: return "NESTEDMAX_E";
    case ReadoutRule::SplitA: return "SPLIT_A";
  }
  return "?";
}
inline std::string_view to_string(TemporalMode m) { return m == TemporalMode::TGNN ? "TGNN" : "GNN"; }

/// Per-node values of the constant slots. ho is present only for GA7.
struct NodeConstants {
  std::vector<double> hs;
  std::vector<double> hz;
  std::optional<std::vector<double>> ho;
  friend bool operator==(const NodeConstants&, const NodeConstants&) = default;
};

struct ModelSpec {
  std::string name;
  Graph graph;
  int layers = 2;
  Schema schema = Schema::GV6;
  NodeConstants constants;
  double k_s = 10;
  double k_z = 10;
  MsgRule msg_rule = MsgRule::GatedReceive;
  ReadoutRule readout_rule = ReadoutRule::MaxGateV;
  TemporalMode temporal_mode = TemporalMode::TGNN;

  int n() const { return graph.n(); }

  void validate() const {
    const auto n = static_cast<std::size_t>(graph.n());
    if (!(k_s > 0) || !(k_z > 0)) throw config_error("k_s and k_z must be positive");
    if (layers < 1) throw config_error("need at least one layer");
    if (constants.hs.size() != n || constants.hz.size() != n)
      throw config_error("constant table size does not match node count");
    const bool has_ho = schema == Schema::GA7;
    if (has_ho != constants.ho.has_value())
      throw config_error("ho constants are required for GA7 and forbidden otherwise");
    if (has_ho && constants.ho->size() != n) throw config_error("ho table size does not match node count");
    auto nonneg = [](const std::vector<double>& v) {
      for (double x : v)
        if (!(x >= 0)) return false;
      return true;
    };
    if (!nonneg(constants.hs) || !nonneg(constants.hz) || (has_ho && !nonneg(*constants.ho)))
      throw config_error("constant slots must be nonnegative");
    if (msg_rule == MsgRule::MaxCombination && schema == Schema::GE11)
      throw config_error("MAX_COMBINATION needs ho_plus/ho_minus slots");
    if (readout_rule == ReadoutRule::MaxGateV && schema == Schema::GE11)
      throw config_error("MAXGATE_V needs ho_plus/ho_minus slots");
    if (readout_rule == ReadoutRule::NestedMaxE && schema != Schema::GE11)
      throw config_error("NESTEDMAX_E needs the GE11 schema");
    if (readout_rule == ReadoutRule::SplitA && schema != Schema::GA7)
      throw config_error("SPLIT_A needs the GA7 schema");
  }
};

/// Largest input value for which the send and output gates are airtight.
inline double bound_K(const ModelSpec& spec) { return spec.k_s < spec.k_z ? spec.k_s : spec.k_z; }

}  // namespace tglab
