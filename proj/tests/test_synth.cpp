#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "grkt/errors.hpp"
#include "grkt/synth.hpp"

namespace grkt {
namespace {

SynthConfig small(std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.num_kcs = 12;
  cfg.num_questions = 40;
  cfg.num_students = 30;
  cfg.min_length = 20;
  cfg.max_length = 40;
  cfg.seed = seed;
  return cfg;
}

double mean_correct(const Dataset& ds) {
  double ones = 0, total = 0;
  for (const auto& s : ds.sequences)
    for (const auto& r : s.real()) {
      ones += r.correct;
      ++total;
    }
  return ones / total;
}

TEST(Synth, DeterministicPerSeed) {
  auto a = generate(small(4)), b = generate(small(4)), c = generate(small(5));
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(a.dataset, b.dataset);
  EXPECT_EQ(a.planted, b.planted);
  EXPECT_NE(a.csv, c.csv);
}

TEST(Synth, ExactCountsWithFixedLength) {
  auto cfg = small();
  cfg.min_length = cfg.max_length = 17;
  auto r = generate(cfg);
  EXPECT_EQ(r.dataset.sequences.size(), cfg.num_students);
  EXPECT_EQ(r.dataset.num_responses(), 17 * cfg.num_students);
  ASSERT_EQ(r.truth.steps.size(), cfg.num_students);
  for (std::size_t s = 0; s < cfg.num_students; ++s) {
    EXPECT_EQ(r.dataset.sequences[s].valid_len, 17u);
    EXPECT_EQ(r.truth.steps[s].size(), 17u);
  }
  EXPECT_LE(r.dataset.num_kcs(), cfg.num_kcs);
  EXPECT_LE(r.dataset.num_questions(), cfg.num_questions);
}

TEST(Synth, TimestampsStrictlyIncreasePerStudent) {
  auto r = generate(small(2));
  for (const auto& s : r.dataset.sequences)
    for (std::size_t t = 1; t < s.valid_len; ++t)
      EXPECT_GT(s.responses[t].timestamp, s.responses[t - 1].timestamp);
}

TEST(Synth, NoNoiseAndExtremeOffsetGiveDeterministicAnswers) {
  auto cfg = small();
  cfg.guess = cfg.slip = 0;
  cfg.initial_offset = 200;
  EXPECT_EQ(mean_correct(generate(cfg).dataset), 1.0);
  cfg.initial_offset = -200;
  EXPECT_EQ(mean_correct(generate(cfg).dataset), 0.0);
}

TEST(Synth, CorrectnessRisesWithInitialOffset) {
  double prev = -1;
  for (double off : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
    auto cfg = small(6);
    cfg.num_students = 80;
    cfg.initial_offset = off;
    const double m = mean_correct(generate(cfg).dataset);
    EXPECT_GT(m, prev) << off;
    prev = m;
  }
}

TEST(Synth, GuessAndSlipBoundTheCorrectProbability) {
  auto cfg = small(3);
  cfg.guess = 0.2;
  cfg.slip = 0.3;
  for (const auto& seq : generate(cfg).truth.steps)
    for (const auto& st : seq) {
      EXPECT_GE(st.p_correct, 0.2);
      EXPECT_LE(st.p_correct, 0.7);
    }
}

TEST(Synth, ZeroTransferKeepsUnpracticedKcsFixed) {
  auto cfg = small(7);
  cfg.transfer = 0;
  cfg.decay_per_day = 0;
  auto r = generate(cfg);
  std::size_t checked = 0;
  for (std::size_t s = 0; s < r.dataset.sequences.size(); ++s) {
    const auto& seq = r.dataset.sequences[s];
    const auto& tr = r.truth.steps[s];
    for (std::size_t t = 0; t + 1 < seq.valid_len; ++t) {
      const auto& kcs = seq.responses[t].kcs;
      for (std::size_t c = 0; c < r.dataset.num_kcs(); ++c) {
        const bool examined = std::find(kcs.begin(), kcs.end(), c) != kcs.end();
        if (examined) {
          EXPECT_GT(tr[t + 1].mastery[c], tr[t].mastery[c]);
        } else {
          EXPECT_EQ(tr[t + 1].mastery[c], tr[t].mastery[c]);
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(Synth, PositiveTransferReachesPlantedNeighbours) {
  auto cfg = small(7);
  cfg.decay_per_day = 0;
  cfg.transfer = 0.5;
  auto r = generate(cfg);
  std::size_t moved = 0;
  for (std::size_t s = 0; s < r.dataset.sequences.size(); ++s) {
    const auto& seq = r.dataset.sequences[s];
    for (std::size_t t = 0; t + 1 < seq.valid_len; ++t)
      for (auto c : seq.responses[t].kcs)
        for (auto d : r.planted.neighbors(Relation::kSimilar, c))
          moved += r.truth.steps[s][t + 1].mastery[d] > r.truth.steps[s][t].mastery[d];
  }
  EXPECT_GT(moved, 0u);
}

TEST(Synth, PlantedGraphShape) {
  auto cfg = small();
  cfg.cluster_size = 3;
  auto r = generate(cfg);
  EXPECT_GT(r.planted.num_edges(Relation::kPrerequisite), 0u);
  EXPECT_GT(r.planted.num_edges(Relation::kSimilar), 0u);
  for (KcId c = 0; c < r.planted.num_kcs(); ++c) {
    EXPECT_LE(r.planted.neighbors(Relation::kSimilar, c).size(), 2u);
    for (auto d : r.planted.neighbors(Relation::kSimilar, c)) EXPECT_NE(c, d);
  }
}

TEST(Synth, RejectsInvalidConfig) {
  auto cfg = small();
  cfg.guess = 0.7;
  cfg.slip = 0.4;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = small();
  cfg.min_length = 50;
  cfg.max_length = 10;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = small();
  cfg.num_kcs = 1;
  EXPECT_THROW(generate(cfg), ConfigError);
}

TEST(Synth, TruthSidecarIsValidJson) {
  auto cfg = small();
  auto r = generate(cfg);
  std::ostringstream out;
  write_truth_json(out, cfg, r);
  auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["config"]["seed"].get<std::uint64_t>(), 1u);
}

TEST(Recovery, IdenticalGraphsScorePerfectly) {
  auto r = generate(small());
  auto rep = compare_graphs(r.planted, r.planted);
  EXPECT_EQ(rep.prerequisite_precision, 1.0);
  EXPECT_EQ(rep.prerequisite_recall, 1.0);
  EXPECT_EQ(rep.similar_precision, 1.0);
  EXPECT_EQ(rep.similar_recall, 1.0);
  EXPECT_EQ(rep.matched_prerequisite, r.planted.num_edges(Relation::kPrerequisite));
}

TEST(Recovery, EmptySetsFollowConvention) {
  auto r = generate(small());
  KcRelationGraphs empty(r.planted.num_kcs());
  auto mined_nothing = compare_graphs(empty, r.planted);
  EXPECT_EQ(mined_nothing.prerequisite_precision, 1.0);
  EXPECT_EQ(mined_nothing.prerequisite_recall, 0.0);
  auto planted_nothing = compare_graphs(r.planted, empty);
  EXPECT_EQ(planted_nothing.similar_recall, 1.0);
  EXPECT_EQ(planted_nothing.similar_precision, 0.0);
}

TEST(Recovery, SimilarityIsMatchedRegardlessOfDirection) {
  auto planted = KcRelationGraphs::from_edges(4, {}, {{0, 1, 1.0}});
  auto mined = KcRelationGraphs::from_edges(4, {}, {{1, 0, 0.7}});
  auto rep = compare_graphs(mined, planted);
  EXPECT_EQ(rep.matched_similar, 1u);
  auto wrong_way = compare_graphs(KcRelationGraphs::from_edges(4, {{1, 0, 1.0}}, {}),
                                  KcRelationGraphs::from_edges(4, {{0, 1, 1.0}}, {}));
  EXPECT_EQ(wrong_way.matched_prerequisite, 0u);
}

SynthConfig baseline() {
  SynthConfig cfg;
  cfg.num_students = 500;
  cfg.min_length = 50;
  cfg.max_length = 100;
  cfg.transfer = 0.9;
  cfg.seed = 1;
  return cfg;
}

TEST(Recovery, BaselineRecoversPlantedRelations) {
  auto r = generate(baseline());
  auto rep = planted_graph_recovery_check(r.dataset, r.planted, {.eta = 0.6, .min_cooccurrence = 10});
  EXPECT_GE(rep.similar_recall, 0.8);
  EXPECT_GE(rep.similar_precision, 0.8);
  EXPECT_GE(rep.prerequisite_recall, 0.15);
}

TEST(Recovery, RecallNeverRisesWithEta) {
  auto r = generate(baseline());
  double prev_sim = 2, prev_pre = 2;
  for (double eta : {0.3, 0.45, 0.6, 0.75, 0.9}) {
    auto rep = planted_graph_recovery_check(r.dataset, r.planted, {.eta = eta, .min_cooccurrence = 10});
    EXPECT_LE(rep.similar_recall, prev_sim) << eta;
    EXPECT_LE(rep.prerequisite_recall, prev_pre) << eta;
    prev_sim = rep.similar_recall;
    prev_pre = rep.prerequisite_recall;
  }
}

}  // namespace
}  // namespace grkt
