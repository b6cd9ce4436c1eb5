#pragma once

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tglab/engine.hpp"
#include "tglab/graph.hpp"

namespace tglab {

enum class Status { Pass, Fail, Inconclusive };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct Counterexample {
  FeatureSequence X;
  std::optional<FeatureSequence> X_alt;
  EdgeMask mask;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::string note;
};

struct VerificationReport {
  std::string check_id;
  Status status = Status::Pass;
  std::uint64_t trials = 0;
  double max_discrepancy = 0;
  std::vector<Counterexample> counterexamples;
  std::uint64_t seed = 0;
  std::optional<double> runtime_ms;
  double tolerance = 0;
  nlohmann::json params = nlohmann::json::object();
  std::vector<std::string> notes;
  std::vector<VerificationReport> sub_reports;

  bool passed() const { return status == Status::Pass; }
};

inline constexpr std::size_t kMaxCounterexamples = 5;

inline void add_counterexample(VerificationReport& r, Counterexample c) {
  if (r.counterexamples.size() < kMaxCounterexamples) r.counterexamples.push_back(std::move(c));
}

/// FAIL if any part failed, else INCONCLUSIVE if any part was, else PASS.
inline Status combine(const std::vector<VerificationReport>& parts) {
  Status s = Status::Pass;
  for (const auto& p : parts) {
    if (p.status == Status::Fail) return Status::Fail;
    if (p.status == Status::Inconclusive) s = Status::Inconclusive;
  }
  return s;
}

/// Wraps sub-reports into a composite whose status and statistics derive from them.
inline VerificationReport composite(std::string id, std::vector<VerificationReport> parts, std::uint64_t seed) {
  VerificationReport r;
  r.check_id = std::move(id);
  r.seed = seed;
  r.status = combine(parts);
  for (const auto& p : parts) {
    r.trials += p.trials;
    if (p.max_discrepancy > r.max_discrepancy) r.max_discrepancy = p.max_discrepancy;
  }
  r.sub_reports = std::move(parts);
  return r;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline nlohmann::json to_json(const Counterexample& c) {
  nlohmann::json j = {{"X", to_json(c.X)}, {"mask", to_json(c.mask)}, {"lhs", c.lhs}, {"rhs", c.rhs}};
  if (c.X_alt) j["X_alt"] = to_json(*c.X_alt);
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j = {{"check_id", r.check_id},
                      {"status", to_string(r.status)},
                      {"trials", r.trials},
                      {"max_discrepancy", r.max_discrepancy},
                      {"seed", r.seed},
                      {"tolerance", r.tolerance},
                      {"params", r.params}};
  if (r.runtime_ms) j["runtime_ms"] = *r.runtime_ms;
  auto ce = nlohmann::json::array();
  for (const auto& c : r.counterexamples) ce.push_back(to_json(c));
  j["counterexamples"] = ce;
  if (!r.notes.empty()) j["notes"] = r.notes;
  if (!r.sub_reports.empty()) {
    auto subs = nlohmann::json::array();
    for (const auto& s : r.sub_reports) subs.push_back(to_json(s));
    j["sub_reports"] = subs;
  }
  return j;
}

namespace detail {
inline void csv_rows(const VerificationReport& r, const std::string& prefix, std::ostringstream& os) {
  const std::string id = prefix.empty() ? r.check_id : prefix + "/" + r.check_id;
  os << id << ',' << to_string(r.status) << ',' << r.trials << ',' << nlohmann::json(r.max_discrepancy).dump() << ',';
  if (r.runtime_ms) os << nlohmann::json(*r.runtime_ms).dump();
  os << ',' << r.seed << '\n';
  for (const auto& s : r.sub_reports) csv_rows(s, id, os);
}
}  // namespace detail

/// One row per check, sub-checks flattened with slash-joined ids.
inline std::string to_csv(const std::vector<VerificationReport>& reports) {
  std::ostringstream os;
  os << "check_id,status,trials,max_discrepancy,runtime_ms,seed\n";
  for (const auto& r : reports) detail::csv_rows(r, "", os);
  return os.str();
}

}  // namespace tglab
