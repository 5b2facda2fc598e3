// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gva/caption_parser.hpp"
#include "gva/error.hpp"
#include "gva/frame_selector.hpp"
#include "support.hpp"

using namespace gva;
namespace gt = gva::testing;

namespace {

Mention mention(const std::string& lemma) {
  Mention m;
  m.lemma = m.surface = lemma;
  m.entity_type = EntityType::Object;
  return m;
}

QueryParse query_of(std::initializer_list<const char*> lemmas) {
  QueryParse q;
  for (auto l : lemmas) q.entities.push_back(mention(l));
  return q;
}

}  // namespace

TEST(GraphScore, AppearanceFrameScoresOne) {
  VideoGraph g;
  g.upsert_entity(mention("dog"), 40, std::nullopt);
  EXPECT_DOUBLE_EQ(graph_score_raw(40, g, query_of({"dog"}), false), 1.0);
}

TEST(GraphScore, NoQueryEntityInGraph) {
  VideoGraph g;
  g.upsert_entity(mention("dog"), 40, std::nullopt);
  EXPECT_DOUBLE_EQ(graph_score_raw(40, g, query_of({"cat"}), false), 0.0);
}

TEST(GraphScore, TwoEntitiesDecay) {
  VideoGraph g;
  g.upsert_entity(mention("dog"), 100, std::nullopt);
  g.upsert_entity(mention("cat"), 116, std::nullopt);
  SelectorConfig cfg;
  cfg.decay_len = 16;
  EXPECT_NEAR(graph_score_raw(100, g, query_of({"dog", "cat"}), false, cfg), 1.0 + std::exp(-1.0), 1e-9);
  EXPECT_NEAR(graph_score_raw(100, g, query_of({"dog", "cat"}), false, cfg), 1.3679, 1e-4);
  // the expanded round widens the decay
  EXPECT_NEAR(graph_score_raw(100, g, query_of({"dog", "cat"}), true, cfg), 1.0 + std::exp(-0.5), 1e-9);
}

TEST(VisualScore, Geometry) {
  EXPECT_DOUBLE_EQ(visual_score_raw({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(visual_score_raw({1, 0}, {-1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(visual_score_raw({1, 0}, {0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(visual_score_raw({0, 0}, {0, 1}), 0.5);
  EXPECT_THROW(visual_score_raw({1, 0}, {1, 0, 0}), Error);
}

TEST(TemporalScore, SelectedFrameIsZero) { EXPECT_DOUBLE_EQ(temporal_score_raw(10, {10, 20}, 100), 0.0); }

TEST(TemporalScore, CenterOfGapIsMaximal) {
  const int total = 101;
  const std::vector<FrameIndex> selected = {0, 100};
  FrameIndex best = -1;
  double best_score = -1;
  for (FrameIndex f = 0; f < total; ++f) {
    double s = temporal_score_raw(f, selected, total);
    if (s > best_score) {
      best_score = s;
      best = f;
    }
  }
  EXPECT_EQ(best, 50);
}

TEST(TemporalScore, SymmetricAboutGapCenter) {
  const std::vector<FrameIndex> selected = {10, 30};
  EXPECT_DOUBLE_EQ(temporal_score_raw(15, selected, 100), temporal_score_raw(25, selected, 100));
  EXPECT_DOUBLE_EQ(temporal_score_raw(19, selected, 100), temporal_score_raw(21, selected, 100));
}

TEST(Normalize, MinMax) {
  EXPECT_EQ(normalize_scores({2, 4, 6}), (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(normalize_scores({3, 3, 3}), (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_EQ(normalize_scores({0, 1}), (std::vector<double>{0, 1}));
  EXPECT_THROW(normalize_scores({1, NAN}), Error);
}

TEST(CombinedScore, Weights) {
  EXPECT_NEAR(combined_score({1.0, 0.5, 0.0}), 0.65, 1e-12);
  EXPECT_DOUBLE_EQ(combined_score({0, 0, 0}), 0.0);
  EXPECT_NEAR(combined_score({1, 1, 1}), 1.0, 1e-12);
  EXPECT_THROW(combined_score({1.5, 0, 0}), Error);
}

TEST(SelectorConfig, Validation) {
  SelectorConfig c;
  c.weight_graph = 0.6;
  EXPECT_THROW(c.validate(), Error);
  SelectorConfig k0;
  k0.k = 0;
  EXPECT_THROW(k0.validate(), Error);
}

TEST(SelectFrames, FewerCandidatesThanK) {
  VideoGraph g;
  auto out = select_frames({{5, std::nullopt}, {9, std::nullopt}}, g, QueryParse{}, std::nullopt, {}, 20, {}, false);
  EXPECT_EQ(out, (std::vector<FrameIndex>{5, 9}));
}

TEST(SelectFrames, TiesGoToLowerFrame) {
  // Two candidates symmetric about the only gap: identical scores.
  VideoGraph g;
  SelectorConfig cfg;
  cfg.k = 1;
  auto out = select_frames({{60, std::nullopt}, {40, std::nullopt}}, g, QueryParse{}, std::nullopt, {}, 101, cfg, false);
  EXPECT_EQ(out, (std::vector<FrameIndex>{40}));
}

TEST(SelectFrames, RejectsAlreadySelectedCandidate) {
  VideoGraph g;
  EXPECT_THROW(select_frames({{5, std::nullopt}}, g, QueryParse{}, std::nullopt, {5}, 20, {}, false), Error);
}

TEST(SelectFrames, MatchesBruteForceOracle) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    auto in = gt::random_selection_instance(rng, 200);
    auto got = select_frames(in.candidates, in.graph, in.query, in.query_embedding, in.selected, in.total_frames,
                             in.config, false);
    ASSERT_EQ(got, gt::oracle_select(in)) << "trial " << trial;
  }
}

TEST(IdentifySegments, FallbackWholeVideo) {
  VideoGraph g;
  EXPECT_EQ(identify_segments(g, query_of({"dog"}), 300, false), (std::vector<Segment>{{0, 299}}));
}

TEST(IdentifySegments, ClustersAppearances) {
  VideoGraph g;
  for (FrameIndex f : {10, 12, 200}) g.upsert_entity(mention("dog"), f, std::nullopt);
  SelectorConfig cfg;
  cfg.decay_len = 16;
  auto segs = identify_segments(g, query_of({"dog"}), 300, false, cfg);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_LE(segs[0].start, 10);
  EXPECT_GE(segs[0].end, 12);
  EXPECT_LT(segs[0].end, 200);
  EXPECT_LE(segs[1].start, 200);
  EXPECT_GE(segs[1].end, 200);
  EXPECT_EQ(segs[0], (Segment{0, 28}));
  EXPECT_EQ(segs[1], (Segment{184, 216}));
}

TEST(IdentifySegments, ExpandedIsWholeVideo) {
  VideoGraph g;
  g.upsert_entity(mention("dog"), 10, std::nullopt);
  EXPECT_EQ(identify_segments(g, query_of({"dog"}), 300, true), (std::vector<Segment>{{0, 299}}));
}

TEST(CandidateFrames, StrideAvailabilityAndExclusion) {
  auto all = candidate_frames({{0, 63}}, {});
  EXPECT_EQ(all.size(), 32u);  // stride 2
  EXPECT_EQ(all.front(), 0);
  auto without = candidate_frames({{0, 9}}, {3, 4});
  EXPECT_EQ(without, (std::vector<FrameIndex>{0, 1, 2, 5, 6, 7, 8, 9}));
  std::vector<FrameIndex> available = {2, 5, 7, 40};
  EXPECT_EQ(candidate_frames({{0, 9}}, {5}, available), (std::vector<FrameIndex>{2, 7}));
}
