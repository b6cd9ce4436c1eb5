#include <sstream>

#include <gtest/gtest.h>

#include "tglab/constructions.hpp"
#include "tglab/perturbation.hpp"

using namespace tglab;

namespace {

// The worked unconstrained input: X2 = (1, 1), X3 = (5, 5).
FeatureSequence x3_dominates() { return FeatureSequence::from_rows({{0, 1, 5}, {0, 1, 5}}); }

}  // namespace

TEST(Sampler, RespectsBound) {
  for (double K : {10.0, 3.0, 0.7}) {
    for (const auto& X : sample_bounded(K, 3, 4, 500, 42)) {
      EXPECT_TRUE(bounded_by(X, K));
      for (double x : X.values()) EXPECT_GE(x, -K - 1e-9);
    }
  }
}

TEST(Sampler, HeavyTailReachesBelowMinusK) {
  double lowest = 0;
  for (const auto& X : sample_bounded(10, 2, 4, 500, 1, InputConstraint::None, Tail::HeavyNegative)) {
    EXPECT_TRUE(bounded_by(X, 10));
    for (double x : X.values()) lowest = std::min(lowest, x);
  }
  EXPECT_LT(lowest, -10);
}

TEST(Sampler, ConstraintHolds) {
  for (const auto& X : sample_bounded(10, 4, 3, 1000, 9, InputConstraint::X2GtX3)) {
    EXPECT_TRUE(satisfies(X, InputConstraint::X2GtX3));
    for (int t = 1; t <= 4; ++t) EXPECT_GT(X(t, 2), X(t, 3));
  }
}

TEST(Sampler, Deterministic) {
  EXPECT_EQ(sample_bounded(10, 2, 4, 50, 5), sample_bounded(10, 2, 4, 50, 5));
  EXPECT_NE(sample_bounded(10, 2, 4, 50, 5), sample_bounded(10, 2, 4, 50, 6));
  // Index addressing: record k does not depend on how many were drawn.
  const SamplerConfig cfg{10, 2, 4, 5};
  EXPECT_EQ(draw_bounded(cfg, 17), sample_bounded(10, 2, 4, 50, 5)[17]);
}

TEST(Sampler, RejectsBadParameters) {
  EXPECT_THROW(sample_bounded(0, 2, 4, 1, 0), config_error);
  EXPECT_THROW(sample_bounded(10, 0, 4, 1, 0), config_error);
  EXPECT_THROW(sample_bounded(10, 2, 2, 1, 0, InputConstraint::X2GtX3), config_error);
}

TEST(Sampler, ParsesNames) {
  EXPECT_EQ(parse_class("node"), PerturbationClass::Node);
  EXPECT_EQ(parse_class("edge"), PerturbationClass::Edge);
  EXPECT_EQ(parse_class("node_and_edge"), PerturbationClass::NodeAndEdge);
  EXPECT_THROW(parse_class("nodes"), config_error);
  EXPECT_EQ(parse_constraint("x2gtx3"), InputConstraint::X2GtX3);
  EXPECT_EQ(parse_constraint("none"), InputConstraint::None);
}

TEST(BuildSet, NodeClass) {
  const auto spec = build("phi1v");
  const auto p = build_set(spec, PerturbationClass::Node, sample_bounded(10, 2, 4, 100, 1));
  ASSERT_EQ(p.records.size(), 100u);
  for (const auto& r : p.records) {
    EXPECT_TRUE(r.mask.empty());
    EXPECT_EQ(r.Y, evaluate(spec, r.X));
  }
  EXPECT_THROW(build_set(spec, PerturbationClass::Node, sample_bounded(10, 2, 4, 2, 1), {{}, {{1, 2}}}), invalid_set);
}

TEST(BuildSet, EdgeClass) {
  const auto spec = build("phi1e");
  const auto X = sample_bounded(10, 2, 3, 1, 3, InputConstraint::X2GtX3)[0];
  const auto p = build_set(spec, PerturbationClass::Edge, {X}, enumerate_masks(spec.graph));
  ASSERT_EQ(p.records.size(), 4u);
  for (const auto& r : p.records) EXPECT_EQ(r.X, X);
  const auto two = sample_bounded(10, 2, 3, 2, 3);
  EXPECT_THROW(build_set(spec, PerturbationClass::Edge, two), invalid_set);
}

TEST(BuildSet, NodeAndEdgeClass) {
  const auto spec = build("phi2a");
  const auto p = build_set(spec, PerturbationClass::NodeAndEdge, sample_bounded(10, 2, 3, 50, 4), enumerate_masks(spec.graph));
  EXPECT_EQ(p.records.size(), 200u);
  for (const auto& r : p.records) EXPECT_EQ(r.Y, evaluate(spec, r.X, r.mask));
}

TEST(BuildSet, RejectsUnboundedAndBadMasks) {
  const auto spec = build("phi1v");
  auto X = FeatureSequence::from_rows({{0, 0, 10.5, 0}});
  EXPECT_THROW(build_set(spec, PerturbationClass::Node, {X}), invalid_set);
  X(1, 3) = 10;
  EXPECT_NO_THROW(build_set(spec, PerturbationClass::Node, {X}));
  EXPECT_THROW(build_set(spec, PerturbationClass::NodeAndEdge, {X}, {{{1, 3}}}), invalid_mask);
  EXPECT_THROW(build_set(spec, PerturbationClass::Node, {FeatureSequence(1, 3)}), config_error);
}

TEST(BuildSet, CanonicalOrderIsGenerationIndependent) {
  const auto spec = build("phi1a");
  auto inputs = sample_bounded(10, 2, 3, 40, 8);
  auto masks = enumerate_masks(spec.graph);
  const auto a = build_set(spec, PerturbationClass::NodeAndEdge, inputs, masks);
  std::reverse(inputs.begin(), inputs.end());
  std::reverse(masks.begin(), masks.end());
  const auto b = build_set(spec, PerturbationClass::NodeAndEdge, inputs, masks, 0, 3);
  EXPECT_TRUE(sets_equal(a, b));
  for (std::size_t k = 1; k < a.records.size(); ++k)
    EXPECT_LT(canonical_key(a.records[k - 1]), canonical_key(a.records[k]));
}

TEST(CanonicalKey, OrdersNegativeBeforePositive) {
  PerturbationRecord lo{FeatureSequence::from_rows({{-2.0}}), {}, {}};
  PerturbationRecord mid{FeatureSequence::from_rows({{-0.5}}), {}, {}};
  PerturbationRecord hi{FeatureSequence::from_rows({{3.0}}), {}, {}};
  EXPECT_LT(canonical_key(lo), canonical_key(mid));
  EXPECT_LT(canonical_key(mid), canonical_key(hi));
}

TEST(SetsEqual, PairedNodeModels) {
  const auto inputs = sample_bounded(10, 2, 4, 500, 10);
  EXPECT_TRUE(sets_equal(build_set(build("phi1v"), PerturbationClass::Node, inputs),
                         build_set(build("phi2v"), PerturbationClass::Node, inputs)));
}

TEST(SetsEqual, PairedEdgeModelsUnderConstraint) {
  const auto s1 = build("phi1e"), s2 = build("phi2e");
  for (const auto& X : sample_bounded(10, 2, 3, 100, 11, InputConstraint::X2GtX3)) {
    const auto masks = enumerate_masks(s1.graph);
    ASSERT_TRUE(sets_equal(build_set(s1, PerturbationClass::Edge, {X}, masks),
                           build_set(s2, PerturbationClass::Edge, {X}, masks)));
  }
}

TEST(SetsEqual, EdgeModelsDifferWhenNode3Dominates) {
  const auto s1 = build("phi1e"), s2 = build("phi2e");
  const auto X = x3_dominates();
  EXPECT_EQ(evaluate(s1, X)[0], 5);
  EXPECT_EQ(evaluate(s2, X)[0], 1);
  const auto masks = enumerate_masks(s1.graph);
  EXPECT_FALSE(sets_equal(build_set(s1, PerturbationClass::Edge, {X}, masks),
                          build_set(s2, PerturbationClass::Edge, {X}, masks)));
}

TEST(SetsEqual, ClassMismatchAndTolerance) {
  const auto inputs = sample_bounded(10, 2, 4, 5, 12);
  auto a = build_set(build("phi1v"), PerturbationClass::Node, inputs);
  auto b = build_set(build("phi1v"), PerturbationClass::NodeAndEdge, inputs);
  EXPECT_THROW(sets_equal(a, b), incomparable);
  b = a;
  b.records[0].Y[0] += 1e-13;
  EXPECT_FALSE(sets_equal(a, b));
  EXPECT_TRUE(sets_equal(a, b, 1e-12));
  b.model = "something-else";
  b.records[0].Y[0] = a.records[0].Y[0];
  EXPECT_TRUE(sets_equal(a, b));
}

TEST(Jsonl, RoundTrip) {
  const auto spec = build("phi2a");
  const auto p = build_set(spec, PerturbationClass::NodeAndEdge, sample_bounded(10, 2, 3, 5, 13),
                           enumerate_masks(spec.graph), 13);
  std::stringstream ss;
  write_jsonl(ss, p);
  const auto header = nlohmann::json::parse(ss.str().substr(0, ss.str().find('\n')));
  EXPECT_EQ(header["class"], "node_and_edge");
  EXPECT_EQ(header["model"], "phi2a");
  EXPECT_EQ(header["seed"], 13);
  const auto back = read_jsonl(ss);
  EXPECT_TRUE(sets_equal(p, back));
  EXPECT_EQ(back.seed, 13u);
  std::stringstream empty;
  EXPECT_THROW(read_jsonl(empty), config_error);
}

TEST(ResponseOracle, EnforcesClassPolicy) {
  const auto X = FeatureSequence::from_rows({{1, 2, 3}});
  const ResponseOracle node(build("phi1a"), PerturbationClass::Node);
  EXPECT_NO_THROW(node.query(X));
  EXPECT_THROW(node.query(X, {{1, 2}}), access_violation);
  EXPECT_THROW(node.query(FeatureSequence::from_rows({{1, 2, 11}})), access_violation);

  const ResponseOracle edge(build("phi1a"), PerturbationClass::Edge, X);
  EXPECT_NO_THROW(edge.query(X, {{1, 2}}));
  EXPECT_THROW(edge.query(FeatureSequence::from_rows({{1, 2, 4}})), access_violation);
  EXPECT_EQ(edge.queries(), 1u);
  EXPECT_THROW(ResponseOracle(build("phi1a"), PerturbationClass::Edge), config_error);

  const ResponseOracle unbounded(build("phi1a"), PerturbationClass::Node, std::nullopt, false);
  EXPECT_NO_THROW(unbounded.query(FeatureSequence::from_rows({{1, 2, 11}})));
}
