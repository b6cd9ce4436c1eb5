#pragma once

#include <string>
#include <string_view>

#include "tglab/error.hpp"
#include "tglab/graph.hpp"
#include "tglab/model.hpp"

namespace tglab {

enum class Family { GV, GE, GA };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::GV: return "gv";
    case Family::GE: return "ge";
    case Family::GA: return "ga";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  if (s == "gv") return Family::GV;
  if (s == "ge") return Family::GE;
  if (s == "ga") return Family::GA;
  throw config_error("unknown family '" + std::string(s) + "' (expected gv, ge or ga)");
}

struct ModelId {
  Family family = Family::GV;
  int which = 1;
  TemporalMode temporal = TemporalMode::TGNN;
  friend bool operator==(const ModelId&, const ModelId&) = default;
};

inline std::string_view family_suffix(Family f) {
  return f == Family::GV ? "v" : f == Family::GE ? "e" : "a";
}

inline std::string to_string(const ModelId& id) {
  std::string s = "phi" + std::to_string(id.which) + std::string(family_suffix(id.family));
  if (id.temporal == TemporalMode::GNN) s += "-gnn";
  return s;
}

/// Parses "phi1v" ... "phi2a" with optional "-gnn" suffix.
inline ModelId parse_model_id(std::string_view s) {
  ModelId id;
  std::string_view base = s;
  if (base.size() > 4 && base.substr(base.size() - 4) == "-gnn") {
    id.temporal = TemporalMode::GNN;
    base.remove_suffix(4);
  }
  if (base.size() != 5 || base.substr(0, 3) != "phi" || (base[3] != '1' && base[3] != '2'))
    throw config_error("unknown model '" + std::string(s) + "'");
  id.which = base[3] - '0';
  switch (base[4]) {
    case 'v': id.family = Family::GV; break;
    case 'e': id.family = Family::GE; break;
    case 'a': id.family = Family::GA; break;
    default: throw config_error("unknown model '" + std::string(s) + "'");
  }
  return id;
}

inline ModelId paired(ModelId id) {
  id.which = 3 - id.which;
  return id;
}

/// The Phi2a constant row as originally tabulated. Under it node 3 can neither
/// send nor remember, so every output is zero. Kept for regression tests only.
inline NodeConstants printed_phi2a_constants(double k_s, double k_z) {
  return {{k_s, 0, k_s}, {0, k_z, k_z}, std::vector<double>{0, k_z, k_z}};
}

inline ModelSpec build(const ModelId& id, double k_s = 10, double k_z = 10) {
  if (!(k_s > 0) || !(k_z > 0)) throw config_error("k_s and k_z must be positive");
  if (id.which != 1 && id.which != 2) throw config_error("model index must be 1 or 2");
  if (id.family == Family::GA && id.temporal == TemporalMode::GNN)
    throw unsupported_variant("the GA constructions have no non-temporal variant");

  ModelSpec s;
  s.name = to_string(id);
  s.k_s = k_s;
  s.k_z = k_z;
  s.temporal_mode = id.temporal;
  const double S = k_s, Z = k_z;
  switch (id.family) {
    case Family::GV:
      s.graph = make_square_graph();
      s.schema = Schema::GV6;
      s.msg_rule = MsgRule::GatedReceive;
      s.readout_rule = ReadoutRule::MaxGateV;
      s.constants.hs = id.which == 1 ? std::vector<double>{S, 0, 0, S} : std::vector<double>{S, S, 0, 0};
      s.constants.hz = {0, Z, Z, Z};
      break;
    case Family::GE:
      s.graph = make_line_graph(3);
      s.schema = Schema::GE11;
      s.msg_rule = MsgRule::GatedReceive;
      s.readout_rule = ReadoutRule::NestedMaxE;
      s.constants.hs = id.which == 1 ? std::vector<double>{S, 0, 0} : std::vector<double>{S, 0, S};
      s.constants.hz = {0, Z, Z};
      break;
    case Family::GA:
      s.graph = make_line_graph(3);
      s.schema = Schema::GA7;
      if (id.which == 1) {
        s.msg_rule = MsgRule::GatedReceive;
        s.readout_rule = ReadoutRule::MaxGateV;
        s.constants = {{S, 0, 0}, {0, Z, Z}, std::vector<double>{0, 0, 0}};
      } else {
        s.msg_rule = MsgRule::MaxCombination;
        s.readout_rule = ReadoutRule::SplitA;
        s.constants = {{S, 0, 0}, {Z, Z, 0}, std::vector<double>{0, Z, Z}};
      }
      break;
  }
  s.validate();
  return s;
}

inline ModelSpec build(std::string_view id, double k_s = 10, double k_z = 10) {
  return build(parse_model_id(id), k_s, k_z);
}

}  // namespace tglab
