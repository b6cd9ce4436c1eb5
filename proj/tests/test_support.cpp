#include <atomic>
#include <stdexcept>

#include <gtest/gtest.h>

#include "tglab/parallel.hpp"
#include "tglab/report.hpp"
#include "tglab/rng.hpp"

using namespace tglab;

TEST(Rng, StreamsAreIndexAddressed) {
  Rng a(5, 3), b(5, 3), c(5, 4);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  Rng u(1);
  for (int k = 0; k < 1000; ++k) {
    const double v = u.uniform01();
    EXPECT_GE(v, 0);
    EXPECT_LT(v, 1);
  }
}

TEST(Rng, LatticeSnap) {
  EXPECT_EQ(snap_to_lattice(1.5), 1.5);
  EXPECT_EQ(snap_to_lattice(-3.0), -3.0);
  const double v = snap_to_lattice(0.1);
  EXPECT_LE(v, 0.1);
  EXPECT_EQ(v * kLatticeScale, std::floor(v * kLatticeScale));
}

TEST(Parallel, VisitsEveryIndexOnce) {
  for (int jobs : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), jobs, [&](std::size_t i, int w) {
      EXPECT_LT(w, jobs);
      ++hits[i];
    }, 7);
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 4, [](std::size_t, int) { FAIL(); });
}

TEST(Parallel, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 3, [](std::size_t i, int) {
    if (i == 57) throw std::runtime_error("boom");
  }, 4), std::runtime_error);
  EXPECT_GE(resolve_jobs(0), 1);
  EXPECT_EQ(resolve_jobs(3), 3);
}

TEST(Report, CombineAndComposite) {
  VerificationReport p, f, i;
  p.trials = 3;
  f.status = Status::Fail;
  f.max_discrepancy = 2;
  i.status = Status::Inconclusive;
  EXPECT_EQ(combine({p, p}), Status::Pass);
  EXPECT_EQ(combine({p, i}), Status::Inconclusive);
  EXPECT_EQ(combine({i, f}), Status::Fail);
  const auto c = composite("c", {p, f}, 9);
  EXPECT_EQ(c.status, Status::Fail);
  EXPECT_EQ(c.trials, 3u);
  EXPECT_EQ(c.max_discrepancy, 2);
  EXPECT_EQ(c.seed, 9u);
}

TEST(Report, CounterexampleCap) {
  VerificationReport r;
  for (int k = 0; k < 9; ++k) add_counterexample(r, {FeatureSequence(1, 1), std::nullopt, {}, {}, {}, "x"});
  EXPECT_EQ(r.counterexamples.size(), kMaxCounterexamples);
}

TEST(Report, JsonOmitsRuntimeUnlessTimed) {
  VerificationReport r;
  r.check_id = "x";
  EXPECT_FALSE(to_json(r).contains("runtime_ms"));
  r.runtime_ms = 1.5;
  EXPECT_EQ(to_json(r)["runtime_ms"], 1.5);
  EXPECT_EQ(to_json(r)["status"], "PASS");
}

TEST(Report, CsvFlattensSubReports) {
  VerificationReport a, b;
  a.check_id = "sub";
  a.trials = 4;
  b = composite("top", {a}, 2);
  const auto csv = to_csv({b});
  EXPECT_EQ(csv, "check_id,status,trials,max_discrepancy,runtime_ms,seed\n"
                 "top,PASS,4,0.0,,2\n"
                 "top/sub,PASS,4,0.0,,0\n");
}
