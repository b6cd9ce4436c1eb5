#include <gtest/gtest.h>

#include "tglab/dbn.hpp"
#include "tglab/explainers.hpp"

using namespace tglab;

namespace {

std::vector<Dbn> candidates(const char* a, const char* b) {
  return {transparent_dbn(parse_model_id(a)), transparent_dbn(parse_model_id(b))};
}

}  // namespace

TEST(NodeOcclusion, OnlyNode3Matters) {
  const auto inputs = sample_bounded(10, 2, 4, 300, 1);
  const auto spec = build("phi1v");
  const auto p = build_set(spec, PerturbationClass::Node, inputs);
  const auto e = occlusion_node_scores(p, ResponseOracle(spec, PerturbationClass::Node));
  ASSERT_TRUE(e.node_scores);
  const auto& s = *e.node_scores;
  EXPECT_GT(s[2], 0);
  EXPECT_EQ(s[0], 0);
  EXPECT_EQ(s[1], 0);
  EXPECT_EQ(s[3], 0);
  EXPECT_EQ(top_nodes(e), (std::vector<int>{3}));
}

TEST(NodeOcclusion, PairedModelsGiveIdenticalScores) {
  const auto inputs = sample_bounded(10, 2, 4, 300, 2);
  const auto s1 = build("phi1v"), s2 = build("phi2v");
  const auto e1 = occlusion_node_scores(build_set(s1, PerturbationClass::Node, inputs), ResponseOracle(s1, PerturbationClass::Node));
  const auto e2 = occlusion_node_scores(build_set(s2, PerturbationClass::Node, inputs), ResponseOracle(s2, PerturbationClass::Node));
  EXPECT_EQ(e1, e2);
  EXPECT_EQ(to_json(e1).dump(), to_json(e2).dump());
}

TEST(NodeOcclusion, ZeroInputsGiveZeroScores) {
  const auto spec = build("phi1v");
  const auto p = build_set(spec, PerturbationClass::Node, {FeatureSequence(2, 4), FeatureSequence(3, 4)});
  const auto e = occlusion_node_scores(p, ResponseOracle(spec, PerturbationClass::Node));
  for (double s : *e.node_scores) EXPECT_EQ(s, 0);
}

TEST(NodeOcclusion, Errors) {
  const auto spec = build("phi1v");
  PerturbationSet empty{PerturbationClass::Node, 10, 0, "phi1v", {}};
  EXPECT_THROW(occlusion_node_scores(empty, ResponseOracle(spec, PerturbationClass::Node)), empty_evidence);
  const auto X = FeatureSequence(1, 4);
  const auto edge = build_set(spec, PerturbationClass::Edge, {X});
  EXPECT_THROW(occlusion_node_scores(edge, ResponseOracle(spec, PerturbationClass::Edge, X)), config_error);
}

TEST(EdgeOcclusion, ConstrainedInput) {
  const auto X = FeatureSequence::from_rows({{0, 4, 2}, {0, 3, 1}});
  const auto s1 = build("phi1e"), s2 = build("phi2e");
  const auto e1 = occlusion_edge_scores(ResponseOracle(s1, PerturbationClass::Edge, X), X);
  const auto e2 = occlusion_edge_scores(ResponseOracle(s2, PerturbationClass::Edge, X), X);
  ASSERT_TRUE(e1.edge_scores);
  ASSERT_EQ(e1.edge_scores->size(), 2u);
  EXPECT_EQ((*e1.edge_scores)[0].first, (Edge{1, 2}));
  EXPECT_GT((*e1.edge_scores)[0].second, 0);
  EXPECT_EQ((*e1.edge_scores)[1].second, 0);
  EXPECT_EQ(e1, e2);
  EXPECT_EQ(to_json(e1)["edge_scores"], nlohmann::json::parse(R"({"1-2": 4.0, "2-3": 0.0})"));
}

TEST(EdgeOcclusion, ZeroInput) {
  const FeatureSequence X(2, 3);
  const auto e = occlusion_edge_scores(ResponseOracle(build("phi1e"), PerturbationClass::Edge, X), X);
  for (const auto& [edge, s] : *e.edge_scores) EXPECT_EQ(s, 0);
}

TEST(SelectDbn, SameEvidenceSameChoice) {
  const auto inputs = sample_bounded(10, 2, 4, 300, 3);
  const auto p1 = build_set(build("phi1v"), PerturbationClass::Node, inputs);
  const auto p2 = build_set(build("phi2v"), PerturbationClass::Node, inputs);
  const auto c = candidates("phi1v", "phi2v");
  const auto e1 = select_dbn(p1, c, make_square_graph());
  const auto e2 = select_dbn(p2, c, make_square_graph());
  ASSERT_TRUE(e1.chosen_dbn);
  EXPECT_EQ(e1, e2);
}

TEST(SelectDbn, PenalizesClaimedNonDependence) {
  // Node 3 drives node 1 in the GE pair; B2e isolates node 3, so B1e fits better.
  const auto spec = build("phi1e");
  const auto p = build_set(spec, PerturbationClass::Node, sample_bounded(10, 2, 3, 300, 4));
  EXPECT_EQ(*select_dbn(p, candidates("phi2e", "phi1e"), spec.graph).chosen_dbn, "B1e");
}

TEST(SelectDbn, TieBreaks) {
  const auto spec = build("phi1v");
  const auto p = build_set(spec, PerturbationClass::Node, sample_bounded(10, 2, 4, 50, 5));
  Dbn a = transparent_dbn(parse_model_id("phi1v"));
  Dbn b = a;
  a.name = "first";
  b.name = "second";
  EXPECT_EQ(*select_dbn(p, {a, b}, spec.graph).chosen_dbn, "first");
  // Equal fit falls back to candidate order, whatever the structure.
  Dbn bigger = a;
  bigger.name = "bigger";
  bigger.intra.push_back({1, 3});
  bigger.normalize();
  EXPECT_EQ(*select_dbn(p, {bigger, a}, spec.graph).chosen_dbn, "bigger");
  EXPECT_EQ(*select_dbn(p, {a, bigger}, spec.graph).chosen_dbn, "first");
}

TEST(SelectDbn, Errors) {
  const auto spec = build("phi1v");
  PerturbationSet empty{PerturbationClass::Node, 10, 0, "phi1v", {}};
  EXPECT_THROW(select_dbn(empty, candidates("phi1v", "phi2v"), spec.graph), empty_evidence);
  const auto p = build_set(spec, PerturbationClass::Node, sample_bounded(10, 2, 4, 5, 6));
  EXPECT_THROW(select_dbn(p, {transparent_dbn(parse_model_id("phi1v"))}, spec.graph), config_error);
  EXPECT_THROW(select_dbn(p, candidates("phi1e", "phi2e"), spec.graph), incomparable);
}

TEST(Fidelity, Examples) {
  const ResponseOracle oracle(build("phi1v"), PerturbationClass::Node);
  EXPECT_EQ(fidelity(oracle, {3}, 500, 1e-9, 1), 0);
  EXPECT_GT(fidelity(oracle, {2}, 500, 1e-9, 1), 0);
  EXPECT_EQ(fidelity(oracle, {1, 2, 3, 4}, 500, 1e-9, 1), 0);
  const double f = fidelity(oracle, {1}, 500, 1e-9, 1);
  EXPECT_GE(f, 0);
  EXPECT_LE(f, 1);
  EXPECT_THROW(fidelity(oracle, {}, 10, 0, 1), config_error);
  EXPECT_THROW(fidelity(oracle, {5}, 10, 0, 1), config_error);
}

TEST(ExplanationJson, Fields) {
  Explanation e{ExplanationKind::DbnChoice, std::nullopt, std::nullopt, "B1v"};
  const auto j = to_json(e);
  EXPECT_EQ(j["chosen_dbn"], "B1v");
  EXPECT_FALSE(j.contains("node_scores"));
  EXPECT_FALSE(j.contains("edge_scores"));
}
