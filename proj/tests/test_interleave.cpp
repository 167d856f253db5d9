#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "funnelkit/error.hpp"
#include "funnelkit/interleave.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/simworld.hpp"
#include "support.hpp"

using namespace funnelkit;
using fktest::list;
using fktest::scorer;

namespace {

// Exact two-sided sign test p-value by direct summation of C(n, i) / 2^n.
double sign_test_oracle(int wins_a, int wins_b) {
  const int n = wins_a + wins_b;
  const int lo = std::min(wins_a, wins_b);
  double tail = 0.0;
  double c = 1.0;  // C(n, 0)
  for (int i = 0; i <= lo; ++i) {
    if (i > 0) c = c * (n - i + 1) / i;
    tail += c;
  }
  return std::min(1.0, 2.0 * tail / std::pow(2.0, n));
}

}  // namespace

TEST(TeamDraft, IdenticalInputsKeepOrder) {
  RngStream rng(1, "td");
  auto a = list({"p", "q", "r", "s", "t"});
  int credited_a = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto il = team_draft(a, a, 4, rng);
    ASSERT_EQ(il.items.items, list({"p", "q", "r", "s"}).items);
    ASSERT_EQ(il.attribution.size(), 4u);
    // Within every round of two picks each team is credited exactly once.
    for (std::size_t r = 0; r < 2; ++r) {
      ASSERT_NE(il.attribution.at(il.items.items[2 * r]), il.attribution.at(il.items.items[2 * r + 1]));
    }
    credited_a += il.attribution.at(il.items.items[0]) == Team::A;
  }
  EXPECT_GT(credited_a, 70);
  EXPECT_LT(credited_a, 130);
}

TEST(TeamDraft, FirstRoundHoldsBothTopItemsInCoinOrder) {
  RngStream rng(2, "td");
  std::set<std::vector<std::string>> seen;
  for (int trial = 0; trial < 100; ++trial) {
    auto il = team_draft(list({"x", "y"}), list({"z", "w"}), 4, rng);
    std::vector<std::string> ids;
    for (const auto& id : il.items.items) ids.push_back(id.str());
    seen.insert(ids);
    ASSERT_EQ(il.attribution.at(ItemId("x")), Team::A);
    ASSERT_EQ(il.attribution.at(ItemId("z")), Team::B);
  }
  // Two rounds, two coin outcomes each.
  const std::set<std::vector<std::string>> all = {
      {"x", "z", "y", "w"}, {"x", "z", "w", "y"}, {"z", "x", "y", "w"}, {"z", "x", "w", "y"}};
  EXPECT_EQ(seen, all);
}

TEST(TeamDraft, ExhaustionCoversEveryItemOnce) {
  RngStream rng(3, "td");
  auto a = list({"a1", "a2", "a3"});
  auto b = list({"b1", "b2"});
  auto il = team_draft(a, b, 5, rng);
  std::set<std::string> items;
  for (const auto& id : il.items.items) items.insert(id.str());
  EXPECT_EQ(items, (std::set<std::string>{"a1", "a2", "a3", "b1", "b2"}));
  EXPECT_EQ(il.items.items.size(), 5u);
  EXPECT_THROW(team_draft(a, b, 0, rng), Error);
}

TEST(TeamDraftProperty, AttributionAndSubset) {
  RngStream rng(4, "td-prop");
  for (int trial = 0; trial < 2000; ++trial) {
    ResultList a, b;
    a.k = b.k = 6;
    for (int i = 0; i < 6; ++i) {
      if (rng.bernoulli(0.8)) a.items.emplace_back("i" + std::to_string(rng.below(10)));
      if (rng.bernoulli(0.8)) b.items.emplace_back("i" + std::to_string(rng.below(10)));
    }
    auto dedupe = [](ResultList& l) {
      std::vector<ItemId> out;
      for (const auto& id : l.items) {
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
      }
      l.items = out;
    };
    dedupe(a);
    dedupe(b);
    const int k = 1 + static_cast<int>(rng.below(8));
    auto il = team_draft(a, b, k, rng);
    ASSERT_LE(il.items.items.size(), static_cast<std::size_t>(k));
    ASSERT_EQ(il.attribution.size(), il.items.items.size());
    std::set<ItemId> uniq(il.items.items.begin(), il.items.items.end());
    ASSERT_EQ(uniq.size(), il.items.items.size());
    for (const auto& id : il.items.items) {
      const Team t = il.attribution.at(id);
      const auto& src = t == Team::A ? a.items : b.items;
      ASSERT_NE(std::find(src.begin(), src.end(), id), src.end());
    }
  }
}

TEST(ScoreQuery, Examples) {
  InterleavedList il;
  il.items = list({"a", "b", "c", "d"});
  il.attribution = {{ItemId("a"), Team::A}, {ItemId("b"), Team::B}, {ItemId("c"), Team::A}, {ItemId("d"), Team::B}};
  EXPECT_EQ(score_query(il, {}), QueryWinner::tie);
  std::vector<Interaction> one_b = {{"q", ItemId("b"), 2, Action::click, true},
                                    {"q", ItemId("a"), 1, Action::click, false}};
  EXPECT_EQ(score_query(il, one_b), QueryWinner::B_wins);
  std::vector<Interaction> two_two = {{"q", ItemId("a"), 1, Action::click, true},
                                      {"q", ItemId("b"), 2, Action::click, true},
                                      {"q", ItemId("c"), 3, Action::consume, true},
                                      {"q", ItemId("d"), 4, Action::click, true}};
  EXPECT_EQ(score_query(il, two_two), QueryWinner::tie);
  std::vector<Interaction> stray = {{"q", ItemId("zz"), 1, Action::click, true}};
  EXPECT_THROW(score_query(il, stray), Error);
}

TEST(PreferenceTest, Examples) {
  auto r = preference_test(8, 2, 0);
  ASSERT_TRUE(r.p_value);
  EXPECT_NEAR(*r.p_value, 112.0 / 1024.0, 1e-12);
  EXPECT_FALSE(r.preferred);

  r = preference_test(0, 0, 50);
  EXPECT_FALSE(r.p_value);
  EXPECT_FALSE(r.preferred);
  EXPECT_EQ(r.ties, 50u);

  r = preference_test(100, 0, 3);
  EXPECT_LT(*r.p_value, 1e-20);
  EXPECT_EQ(r.preferred, Team::A);

  EXPECT_EQ(preference_test(2, 30, 0).preferred, Team::B);
  EXPECT_DOUBLE_EQ(*preference_test(5, 5, 0).p_value, 1.0);
}

TEST(PreferenceTest, MatchesDirectSummation) {
  for (int a = 0; a <= 40; a += 3) {
    for (int b = 0; b <= 40; b += 5) {
      if (a + b == 0) continue;
      ASSERT_NEAR(*preference_test(static_cast<std::size_t>(a), static_cast<std::size_t>(b), 0).p_value,
                  sign_test_oracle(a, b), 1e-12)
          << a << " vs " << b;
    }
  }
}

TEST(InterleaveSim, NullIsUnbiased) {
  const World w = generate_world(WorldConfig{});
  auto s = scorer("s", {0.5, 1, 1, 1, 1, 1});
  InterleaveSimulator sim(w, s, s, 10);
  std::size_t a = 0, b = 0, n = 0;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    InterleaveConfig c;
    c.seed = 9;
    c.replication = rep;
    auto r = sim.run(c);
    a += r.test.wins_a;
    b += r.test.wins_b;
    n += r.per_query.size();
  }
  EXPECT_EQ(n, 10000u);
  EXPECT_LE(std::abs(static_cast<double>(a) - static_cast<double>(b)) / static_cast<double>(n), 0.02);
}

TEST(InterleaveSim, GapIsDetectedAndDeterministic) {
  const World w = generate_world(WorldConfig{});
  auto pop = scorer("pop", {1, 0, 0, 0, 0, 0});
  auto best = scorer("best", {0.5, 1, 1, 1, 1, 1});
  InterleaveConfig c;
  c.seed = 3;
  c.n_queries = 1000;
  auto r = run_interleave(w, pop, best, c);
  EXPECT_EQ(r.per_query.size(), 1000u);
  EXPECT_GT(r.test.wins_b, r.test.wins_a);
  EXPECT_EQ(r.test.preferred, Team::B);
  EXPECT_EQ(to_json(r).dump(), to_json(run_interleave(w, pop, best, c)).dump());
  auto stats = interleave_statistics(r);
  EXPECT_EQ(stats.at("preferred_b"), 1.0);
  EXPECT_NEAR(stats.at("win_rate_b"),
              static_cast<double>(r.test.wins_b) / static_cast<double>(r.test.wins_a + r.test.wins_b), 1e-12);
  EXPECT_TRUE(is_interleave_statistic("p_value"));
  EXPECT_FALSE(is_interleave_statistic("p"));
  const std::string csv = per_query_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "query_id,winner");
}
