#include <functional>

#include <gtest/gtest.h>

#include "tglab/verification.hpp"

using namespace tglab;

namespace {

CheckOptions small() {
  CheckOptions o;
  o.trials = 300;
  o.lemma2_samples = 2000;
  o.trace_trials = 20;
  o.search_budget = 2000;
  o.exact_samples = 20;
  return o;
}

void walk(const VerificationReport& r, const std::function<void(const VerificationReport&)>& f) {
  f(r);
  for (const auto& s : r.sub_reports) walk(s, f);
}

std::string dump(const std::vector<VerificationReport>& rs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rs) j.push_back(to_json(r));
  return j.dump();
}

}  // namespace

TEST(OracleTask, Examples) {
  auto X = FeatureSequence::from_rows({{0, 0, 3, 0}, {0, 0, 7, 0}});
  EXPECT_EQ(oracle_task(TaskFamily::GV, X), (std::vector<double>{7, 0, 0, 0}));
  auto Xe = FeatureSequence::from_rows({{0, 5, 2}, {0, 1, 4}});
  EXPECT_EQ(oracle_task(TaskFamily::GE_FULL, Xe)[0], 5);
  EXPECT_EQ(oracle_task(TaskFamily::GE_NODE2, Xe)[0], 5);
  EXPECT_EQ(oracle_task(TaskFamily::GE_NODE2, FeatureSequence::from_rows({{0, 1, 5}}))[0], 1);
  const auto neg = FeatureSequence::from_rows({{-1, -2, -3}, {-4, -5, -6}});
  for (auto f : {TaskFamily::GE_FULL, TaskFamily::GE_NODE2, TaskFamily::GA})
    EXPECT_EQ(oracle_task(f, neg), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(oracle_task(TaskFamily::GV, neg), config_error);
  EXPECT_THROW(oracle_task(TaskFamily::GA, neg, TemporalMode::GNN), unsupported_variant);
}

TEST(VerifyTask, PassesAndFails) {
  const auto o = small();
  EXPECT_EQ(verify_task(build("phi1v"), TaskFamily::GV, o).status, Status::Pass);
  EXPECT_EQ(verify_task(build("phi2e"), TaskFamily::GE_NODE2, o).status, Status::Pass);
  const auto bad = verify_task(build("phi2e"), TaskFamily::GE_FULL, o);
  EXPECT_EQ(bad.status, Status::Fail);
  EXPECT_FALSE(bad.counterexamples.empty());
  EXPECT_EQ(bad.trials, 5 * o.trials);
}

TEST(VerifyTasks, AllModels) {
  const auto r = verify_tasks(small());
  EXPECT_EQ(r.status, Status::Pass);
  EXPECT_EQ(r.sub_reports.size(), 6u);
}

TEST(Lemma2, SmallGridPasses) {
  auto o = small();
  o.grid_step = 10;
  const auto r = verify_lemma2(o);
  EXPECT_EQ(r.status, Status::Pass);
  EXPECT_EQ(r.max_discrepancy, 0);
  EXPECT_EQ(r.sub_reports[0].trials, 6561u);  // 3^8
  EXPECT_EQ(r.sub_reports[1].trials, o.lemma2_samples);
}

TEST(Lemma2, GridTooLargeIsRejected) {
  auto o = small();
  o.grid_step = 1;
  EXPECT_THROW(verify_lemma2(o), config_error);
}

TEST(Lemma2, GateLeakAboveBound) {
  // The excess only reaches the outputs when it sits in the final step.
  FeatureSequence X(1, 4);
  X(1, 4) = 12;
  EXPECT_NE(evaluate(build("phi1v"), X), evaluate(build("phi2v"), X));
  FeatureSequence X2(2, 4);
  X2(2, 4) = 12;
  EXPECT_NE(evaluate(build("phi1v"), X2), evaluate(build("phi2v"), X2));
  EXPECT_EQ(evaluate(build("phi1v"), FeatureSequence(2, 4)), evaluate(build("phi2v"), FeatureSequence(2, 4)));
}

TEST(Lemma3, PassesWithWitness) {
  const auto r = verify_lemma3(small());
  EXPECT_EQ(r.status, Status::Pass);
  ASSERT_EQ(r.sub_reports.size(), 2u);
  EXPECT_EQ(r.sub_reports[0].trials, 4 * small().trials);
  const auto& w = r.sub_reports[1].counterexamples.at(0);
  EXPECT_EQ(w.lhs[0], 5);
  EXPECT_EQ(w.rhs[0], 1);
  EXPECT_EQ(r.sub_reports[1].params["witness_gap"], 4.0);
}

TEST(Lemma3, Node1CutOffGivesZero) {
  for (const auto& X : sample_bounded(10, 2, 3, 100, 3)) {
    for (double y : evaluate(build("phi1e"), X, {{1, 2}})) EXPECT_EQ(y, 0);
    for (double y : evaluate(build("phi2e"), X, {{1, 2}})) EXPECT_EQ(y, 0);
  }
}

TEST(Lemma5, PassesAndMaskedOutputsVanish) {
  EXPECT_EQ(verify_lemma5(small()).status, Status::Pass);
  for (const auto& X : sample_bounded(10, 3, 3, 100, 4)) {
    for (double y : evaluate(build("phi1a"), X, {{2, 3}})) EXPECT_EQ(y, 0);
    for (double y : evaluate(build("phi2a"), X, {{2, 3}})) EXPECT_EQ(y, 0);
    EXPECT_EQ(evaluate(build("phi2a"), X), oracle_task(TaskFamily::GA, X));
  }
  auto o = small();
  o.temporal = TemporalMode::GNN;
  EXPECT_THROW(verify_lemma5(o), unsupported_variant);
}

TEST(Tightness, WitnessesAboveBound) {
  const auto o = small();
  for (Family f : {Family::GV, Family::GE, Family::GA}) {
    const auto r = verify_tightness(f, o);
    EXPECT_EQ(r.status, Status::Pass) << to_string(f);
    ASSERT_FALSE(r.counterexamples.empty());
    const auto& c = r.counterexamples[0];
    double top = -1e300;
    for (double x : c.X.values()) top = std::max(top, x);
    EXPECT_GT(top, o.K());
    EXPECT_NE(c.lhs, c.rhs);
    const auto a = build(ModelId{f, 1}), b = build(ModelId{f, 2});
    EXPECT_EQ(evaluate(a, c.X), c.lhs);
    EXPECT_EQ(evaluate(b, c.X), c.rhs);
    EXPECT_EQ(r.max_discrepancy, 0);
  }
}

TEST(Tightness, BoundedSearchIsInconclusive) {
  const auto r = verify_tightness(Family::GV, small(), true);
  EXPECT_EQ(r.status, Status::Inconclusive);
  EXPECT_EQ(r.trials, small().search_budget);
}

TEST(TraceTables, WorkedValues) {
  const auto X = FeatureSequence::from_rows({{1, 2, 3, 4}, {5, 6, 7, 8}});
  const auto tr = forward(build("phi1v"), X).trace;
  const double l1t1[] = {2, 3, 2, 3}, l2t2[] = {7, 6, 7, 6};
  for (int i = 1; i <= 4; ++i) {
    EXPECT_EQ(tr.h(1, 1, i)[Slot::hr], l1t1[i - 1]);
    EXPECT_EQ(tr.h(2, 2, i)[Slot::hr], l2t2[i - 1]);
  }
  const auto tr2 = forward(build("phi2a"), FeatureSequence::from_rows({{1, 2, 3}, {4, 5, 2}})).trace;
  EXPECT_EQ(tr2.H(1, 1), 0);
  EXPECT_EQ(tr2.H(1, 2), 0);
  EXPECT_EQ(tr2.H(1, 3), 3);
  EXPECT_EQ(tr2.Y(1), 3);
}

TEST(TraceTables, ZeroInputGivesZeroTrace) {
  for (const char* name : {"phi1v", "phi2a"}) {
    const auto spec = build(name);
    const auto tr = forward(spec, FeatureSequence(2, spec.n())).trace;
    for (int t = 1; t <= 2; ++t)
      for (int i = 1; i <= spec.n(); ++i) {
        EXPECT_EQ(tr.H(t, i), 0);
        for (int l = 0; l <= 2; ++l) EXPECT_EQ(tr.h(t, l, i)[Slot::hr], 0);
      }
  }
}

TEST(TraceTables, CheckPassesWithDocumentedDeviation) {
  const auto r = verify_trace_tables(small());
  EXPECT_EQ(r.status, Status::Pass);
  ASSERT_EQ(r.sub_reports.size(), 3u);
  EXPECT_EQ(r.sub_reports[0].check_id, "trace-phi1v");
  EXPECT_EQ(r.sub_reports[2].check_id, "trace-phi2a-documented-deviation");
  EXPECT_EQ(r.sub_reports[2].status, Status::Pass);
  EXPECT_EQ(r.sub_reports[0].trials, small().trace_trials + 1);
}

TEST(TraceTables, DeviatingEntryDiffersFromListedExpression) {
  // alpha3 = 1, beta2 = 2, beta3 = 4: computed max{beta2, alpha3} = 2, listed max{gamma3, beta2} = 4.
  const auto tr = forward(build("phi2a"), FeatureSequence::from_rows({{1, 1, 1}, {1, 2, 4}})).trace;
  EXPECT_EQ(tr.m(2, 2, 3, 2), 2);
  EXPECT_EQ(tr.h(2, 2, 2)[Slot::hr], 2);
  EXPECT_EQ(tr.Y(1), 4);
}

TEST(DbnCheck, AllFamiliesPass) {
  const auto r = verify_dbn(small());
  EXPECT_EQ(r.status, Status::Pass);
  ASSERT_EQ(r.sub_reports.size(), 3u);
  for (const auto& fam : r.sub_reports) {
    ASSERT_EQ(fam.sub_reports.size(), 5u);
    EXPECT_EQ(fam.sub_reports[0].check_id.rfind("transparent:", 0), 0u);
    EXPECT_EQ(fam.sub_reports[1].check_id.rfind("cross:", 0), 0u);
  }
}

TEST(TheoremSuite, AllFamiliesPass) {
  TransparencyCache cache;
  for (Family f : {Family::GV, Family::GE, Family::GA}) {
    const auto r = run_theorem_suite(f, small(), cache);
    EXPECT_EQ(r.status, Status::Pass) << to_string(f);
    ASSERT_EQ(r.sub_reports.size(), 4u);
    EXPECT_EQ(r.sub_reports[0].max_discrepancy, 0);
  }
}

TEST(Gnn, NonTemporalSuitePasses) {
  const auto r = verify_gnn(small());
  EXPECT_EQ(r.status, Status::Pass);
  for (const auto& s : r.sub_reports) EXPECT_NE(s.check_id.find("gnn"), std::string::npos) << s.check_id;
}

TEST(Exact, BinaryResultsAreExact) { EXPECT_EQ(verify_exact(small()).status, Status::Pass); }

TEST(RunCheck, UnknownNameAndFamilyFilter) {
  TransparencyCache cache;
  EXPECT_THROW(run_check("lemma4", small(), cache), config_error);
  const auto r = run_check("tightness", small(), cache, Family::GA);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].check_id, "tightness-ga");
}

TEST(RunAll, ReportInvariantsAndDeterminism) {
  const auto o = small();
  const auto a = run_all(o);
  EXPECT_EQ(a.size(), 14u);
  for (const auto& r : a) {
    EXPECT_EQ(r.status, Status::Pass) << r.check_id;
    walk(r, [](const VerificationReport& s) {
      if (s.status == Status::Pass) {
        EXPECT_LE(s.max_discrepancy, s.tolerance) << s.check_id;
      }
      if (s.status == Status::Fail) {
        EXPECT_FALSE(s.counterexamples.empty()) << s.check_id;
      }
      EXPECT_FALSE(s.runtime_ms.has_value());
    });
  }
  auto par = o;
  par.jobs = 3;
  EXPECT_EQ(dump(a), dump(run_all(par)));
  EXPECT_EQ(dump(a), dump(run_all(o)));
}

TEST(Tolerance, RecordedWhenEnabled) {
  auto o = small();
  o.tolerance = 1e-12;
  const auto r = verify_lemma5(o);
  EXPECT_EQ(r.tolerance, 1e-12);
  ASSERT_FALSE(r.notes.empty());
  EXPECT_EQ(r.notes[0], "fallback tolerance enabled");
}

TEST(DeriveSeed, DistinctPerTag) {
  EXPECT_NE(derive_seed(0, "lemma2"), derive_seed(0, "lemma3"));
  EXPECT_NE(derive_seed(0, "x", 1), derive_seed(0, "x", 2));
  EXPECT_EQ(derive_seed(7, "x"), derive_seed(7, "x"));
}
