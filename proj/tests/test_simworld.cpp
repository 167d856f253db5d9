#include <gtest/gtest.h>

#include <cmath>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/error.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/simworld.hpp"
#include "support.hpp"

using namespace funnelkit;
using fktest::scorer;

namespace {

WorldConfig small(std::uint64_t seed = 1) {
  WorldConfig wc;
  wc.seed = seed;
  wc.n_items = 80;
  wc.n_users = 50;
  wc.n_queries = 300;
  return wc;
}

const Scorer kPop = scorer("pop", {1, 0, 0, 0, 0, 0});
const Scorer kBest = scorer("best", {0.5, 1, 1, 1, 1, 1});

}  // namespace

TEST(GenerateWorld, Deterministic) {
  EXPECT_EQ(serialize_world(generate_world(small(1))), serialize_world(generate_world(small(1))));
  EXPECT_NE(serialize_world(generate_world(small(1))), serialize_world(generate_world(small(2))));
  const World a = generate_world(small(1));
  const World b = generate_world(small(2));
  EXPECT_NE(a.items()[0].latent, b.items()[0].latent);
}

TEST(GenerateWorld, SingleItemCatalog) {
  WorldConfig wc = small();
  wc.n_items = 1;
  const World w = generate_world(wc);
  for (int q = 0; q < 20; ++q) {
    auto rec = serve(w, q, kBest, 10);
    ASSERT_EQ(rec.served_results.items.size(), 1u);
    EXPECT_EQ(rec.served_results.items[0], w.items()[0].id);
  }
}

TEST(GenerateWorld, InvalidConfigNamesField) {
  WorldConfig wc = small();
  wc.nonrelevance_click_prob = 0.95;
  try {
    generate_world(wc);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("nonrelevance_click_prob"), std::string::npos);
  }
  wc = small();
  wc.n_queries = 0;
  EXPECT_THROW(generate_world(wc), ConfigError);
  wc = small();
  wc.examination_decay = 0.0;
  EXPECT_THROW(generate_world(wc), ConfigError);
}

TEST(GenerateWorld, AttributesPresent) {
  const World w = generate_world(small());
  int long_q = 0;
  for (const auto& q : w.queries()) {
    const auto& lc = q.context.attributes.at("length_class");
    EXPECT_TRUE(lc == "long" || lc == "short");
    long_q += lc == "long";
    EXPECT_GE(q.context.timestamp, 0);
  }
  EXPECT_GT(long_q, 40);
  EXPECT_LT(long_q, 150);
  int podcasts = 0;
  for (const auto& it : w.items()) podcasts += it.attributes.at("kind") == "podcast";
  EXPECT_GT(podcasts, 0);
}

TEST(Serve, RecordIsReconstructionConsistent) {
  const World w = generate_world(small());
  std::vector<CounterfactualRecord> recs;
  for (int q = 0; q < 300; ++q) {
    recs.push_back(serve(w, q, kPop, 10));
    const auto pos = w.rank_positions(q, kPop, 10);
    ASSERT_EQ(pos.size(), recs.back().served_results.items.size());
    for (std::size_t i = 0; i < pos.size(); ++i) ASSERT_EQ(w.item_at(q, pos[i]), recs.back().served_results.items[i]);
  }
  EXPECT_EQ(quality_check(recs, kPop).exact_match_rate, 1.0);
  // serve by context is the same as serve by index
  EXPECT_EQ(serve(w, w.queries()[7].context, kPop, 10), recs[7]);
}

TEST(Serve, BoostOnAbsentAttributeIsNoOp) {
  const World w = generate_world(small());
  auto boosted = kBest;
  boosted.boosts.push_back({"kind", "audiobook", 5.0});
  for (int q = 0; q < 100; ++q) {
    EXPECT_EQ(serve(w, q, kBest, 10).served_results, serve(w, q, boosted, 10).served_results);
  }
}

TEST(Serve, DimensionMismatch) {
  const World w = generate_world(small());
  EXPECT_THROW(serve(w, 0, scorer("bad", {1, 2}), 10), Error);
}

TEST(TrueSuccessRate, PreferenceScorerBeatsZeroScorer) {
  const World w = generate_world(small());
  const double best = true_success_rate(w, kBest, 10);
  const double zero = true_success_rate(w, scorer("zero", {0, 0, 0, 0, 0, 0}), 10);
  EXPECT_GT(best, zero);
  EXPECT_GT(best, true_success_rate(w, kPop, 10));
}

TEST(TrueSuccessRate, ZeroRelevanceClicksGiveZero) {
  WorldConfig wc = small();
  wc.relevance_click_prob = 0.0;
  wc.nonrelevance_click_prob = 0.0;
  EXPECT_EQ(true_success_rate(generate_world(wc), kBest, 10), 0.0);
}

TEST(TrueSuccessRate, EnumerationBound) {
  WorldConfig wc = small();
  wc.max_enumeration = 100;
  EXPECT_THROW(true_success_rate(generate_world(wc), kBest, 10), Error);
}

TEST(ClickModel, ClosedForms) {
  const std::vector<std::uint8_t> rank1 = {1, 0, 0};
  EXPECT_DOUBLE_EQ(session_success_probability(rank1, {0.3, 1.0, 0.0}), 1.0);
  const std::vector<std::uint8_t> rank2 = {0, 1, 0};
  EXPECT_NEAR(session_success_probability(rank2, {0.7, 1.0, 0.0}), 0.7, 1e-15);
  const std::vector<std::uint8_t> rank3 = {0, 0, 1};
  EXPECT_NEAR(session_success_probability(rank3, {0.7, 1.0, 0.0}), 0.49, 1e-15);
  // Irrelevant click at rank 1 cuts the session: (1 - 0.5) * 0.7 * 1.
  EXPECT_NEAR(session_success_probability(rank2, {0.7, 1.0, 0.5}), 0.35, 1e-15);
  EXPECT_NEAR(examination_free_success_probability(rank3, {0.7, 0.9, 0.0}), 0.9, 1e-15);
}

TEST(ClickModel, DegenerateSessions) {
  RngStream rng(1, "degenerate");
  const std::vector<std::uint8_t> g = {2, 0, 1};
  for (int i = 0; i < 1000; ++i) {
    auto s = simulate_session(g, {1.0, 1.0, 0.0}, rng);
    ASSERT_EQ(s.clicked_rank, 1);
    ASSERT_TRUE(s.success);
    auto none = simulate_session(g, {1.0, 0.0, 0.0}, rng);
    ASSERT_EQ(none.clicked_rank, 0);
    ASSERT_FALSE(none.success);
  }
}

TEST(ClickModel, MonteCarloMatchesGammaSquared) {
  RngStream rng(2, "gamma2");
  const std::vector<std::uint8_t> g = {0, 0, 1, 0};
  int clicks = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) clicks += simulate_session(g, {0.7, 1.0, 0.0}, rng).clicked_rank == 3;
  EXPECT_NEAR(clicks / static_cast<double>(n), 0.49, 0.01);
}

TEST(Interact, NoInteractionsWithZeroClickProbabilities) {
  WorldConfig wc = small();
  wc.relevance_click_prob = 0.0;
  wc.nonrelevance_click_prob = 0.0;
  const World w = generate_world(wc);
  RngStream rng(3, "interact");
  for (int q = 0; q < 300; ++q) {
    auto rec = serve(w, q, kBest, 10);
    ASSERT_TRUE(interact(w, rec, rng).empty());
  }
}

TEST(Interact, AtMostOneClickWithMatchingSuccessFlag) {
  const World w = generate_world(small());
  RngStream rng(4, "interact");
  for (int q = 0; q < 300; ++q) {
    auto rec = serve(w, q, kBest, 10);
    auto ints = interact(w, rec, rng);
    ASSERT_LE(ints.size(), 1u);
    for (const auto& it : ints) {
      const auto pos = w.position_of(q, it.item);
      ASSERT_TRUE(pos);
      EXPECT_EQ(it.success, w.queries()[static_cast<std::size_t>(q)].grades[*pos] > 0);
      EXPECT_EQ(rec.served_results.items[static_cast<std::size_t>(it.rank - 1)], it.item);
    }
  }
}

TEST(SimulateLogs, ReplayIsIdentical) {
  const World w = generate_world(small());
  auto a = simulate_logs(w, kPop, 10, 5, "production");
  auto b = simulate_logs(w, kPop, 10, 5, "production");
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.interactions, b.interactions);
  auto c = simulate_logs(w, kPop, 10, 5, "other");
  EXPECT_NE(a.interactions, c.interactions);
}

TEST(SimulateLogsProperty, EmpiricalRateWithinThreeSigma) {
  WorldConfig wc = small();
  wc.n_queries = 2000;
  const World w = generate_world(wc);
  const double p = true_success_rate(w, kPop, 10);
  const double bound = 3.0 * std::sqrt(p * (1 - p) / 2000.0);
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto logs = simulate_logs(w, kPop, 10, seed);
    int succ = 0;
    for (const auto& it : logs.interactions) succ += it.success;
    inside += std::abs(succ / 2000.0 - p) <= bound;
  }
  EXPECT_GE(inside, 97);
}

TEST(World, ExposureRecoverableViaReconstructPair) {
  const World w = generate_world(small());
  std::vector<CounterfactualRecord> logged;
  for (int q = 0; q < 300; ++q) logged.push_back(w.logged_candidates(q));
  auto pairs = reconstruct_pair(logged, kPop, kBest, 10);
  for (int q = 0; q < 300; ++q) {
    const bool differ_world = w.rank_positions(q, kPop, 10) != w.rank_positions(q, kBest, 10);
    ASSERT_EQ(differ_world, pairs[static_cast<std::size_t>(q)].a != pairs[static_cast<std::size_t>(q)].b);
  }
}
