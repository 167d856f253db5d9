#include <gtest/gtest.h>

#include <cmath>

#include "funnelkit/error.hpp"
#include "funnelkit/offline_validate.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/simworld.hpp"
#include "support.hpp"

using namespace funnelkit;
using fktest::list;

namespace {

Judgment human(const std::string& q, const char* item, int grade) {
  return {q, ItemId(item), grade, JudgmentSource::human, std::nullopt};
}

ReconstructedPair pair(const std::string& q, ResultList a, ResultList b) { return {q, std::move(a), std::move(b)}; }

}  // namespace

TEST(Ndcg, Examples) {
  std::unordered_map<ItemId, int> g = {{ItemId("r"), 1}};
  EXPECT_DOUBLE_EQ(*ndcg_at_k(list({"r", "x", "y"}), g, 3), 1.0);
  EXPECT_NEAR(*ndcg_at_k(list({"x", "r", "y"}), g, 3), 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(*ndcg_at_k(list({"x", "r", "y"}), g, 3), 0.6309, 1e-4);
  EXPECT_FALSE(ndcg_at_k(list({"x"}), {}, 3));
  EXPECT_FALSE(ndcg_at_k(list({"x"}), {{ItemId("x"), 0}}, 3));
  EXPECT_DOUBLE_EQ(*ndcg_at_k(list({"x", "r"}), g, 1), 0.0);
  EXPECT_THROW(ndcg_at_k(list({"x"}), g, 0), Error);
}

TEST(NdcgProperty, ZeroGainPermutationsInvariant) {
  RngStream rng(31, "ndcg-perm");
  for (int trial = 0; trial < 1000; ++trial) {
    std::unordered_map<ItemId, int> grades;
    ResultList l;
    l.k = 8;
    for (int i = 0; i < 8; ++i) {
      ItemId id("i" + std::to_string(i));
      l.items.push_back(id);
      if (rng.bernoulli(0.5)) grades[id] = static_cast<int>(rng.below(3));
    }
    const auto before = ndcg_at_k(l, grades, 8);
    std::vector<std::size_t> zero_slots;
    for (std::size_t i = 0; i < l.items.size(); ++i) {
      auto it = grades.find(l.items[i]);
      if (it == grades.end() || it->second == 0) zero_slots.push_back(i);
    }
    std::vector<ItemId> vals;
    for (auto i : zero_slots) vals.push_back(l.items[i]);
    std::shuffle(vals.begin(), vals.end(), rng);
    for (std::size_t n = 0; n < zero_slots.size(); ++n) l.items[zero_slots[n]] = vals[n];
    const auto after = ndcg_at_k(l, grades, 8);
    ASSERT_EQ(before.has_value(), after.has_value());
    if (before) {
      ASSERT_NEAR(*before, *after, 1e-15);
    }
  }
}

TEST(IpsWeight, Examples) {
  EXPECT_DOUBLE_EQ(ips_weight(1, ExaminationCurve::geometric(0.7)), 1.0);
  EXPECT_NEAR(ips_weight(3, ExaminationCurve::geometric(0.7)), 1.0 / 0.49, 1e-12);
  EXPECT_NEAR(ips_weight(3, ExaminationCurve::geometric(0.7)), 2.0408, 1e-4);
  EXPECT_DOUBLE_EQ(ips_weight(2, ExaminationCurve::from_values({1.0, 0.125}), 5.0), 5.0);
  EXPECT_DOUBLE_EQ(ips_weight(2, ExaminationCurve::from_values({1.0, 0.125}), 10.0), 8.0);
  EXPECT_THROW(ips_weight(2, ExaminationCurve::from_values({1.0, 0.0})), Error);
  EXPECT_THROW(ips_weight(0, ExaminationCurve::uniform()), Error);
  EXPECT_DOUBLE_EQ(ExaminationCurve::from_values({1.0, 0.5}).examination(9), 0.5);
}

TEST(Overlap, Examples) {
  std::vector<Judgment> js = {human("q1", "a", 1), human("q1", "b", 0), human("q2", "a", 1)};
  JudgmentIndex idx(js, ExaminationCurve::uniform());
  std::vector<ReconstructedPair> same = {pair("q1", list({"a", "b"}), list({"a", "b"})),
                                         pair("q2", list({"a"}), list({"a"}))};
  EXPECT_DOUBLE_EQ(overlap_diagnostic(same, idx), 1.0);

  std::vector<ReconstructedPair> disjoint = {pair("q1", list({"a"}), list({"x"})), pair("q2", list({"a"}), list({"y"}))};
  EXPECT_DOUBLE_EQ(overlap_diagnostic(disjoint, idx), 0.0);

  std::vector<Judgment> js4;
  for (int q = 0; q < 4; ++q) js4.push_back(human("q" + std::to_string(q), "j", 1));
  JudgmentIndex idx4(js4, ExaminationCurve::uniform());
  std::vector<ReconstructedPair> four = {
      pair("q0", list({"x"}), list({"j", "y"})), pair("q1", list({"x"}), list({"y", "j"})),
      pair("q2", list({"x"}), list({"j"})),      pair("q3", list({"x"}), list({"y"})),
      pair("q4", list({"x"}), list({"x"})),  // unchanged, ignored
  };
  EXPECT_DOUBLE_EQ(overlap_diagnostic(four, idx4), 0.75);
}

TEST(JudgmentIndex, SourcePrecedenceAndFilter) {
  std::vector<Judgment> js = {{"q", ItemId("a"), 0, JudgmentSource::click_log, 3},
                              {"q", ItemId("a"), 1, JudgmentSource::llm, std::nullopt},
                              {"q", ItemId("a"), 2, JudgmentSource::human, std::nullopt},
                              {"q", ItemId("b"), 1, JudgmentSource::click_log, 2}};
  JudgmentIndex all(js, ExaminationCurve::geometric(0.5));
  EXPECT_EQ(all.find("q")->at(ItemId("a")).grade, 2);
  EXPECT_DOUBLE_EQ(all.find("q")->at(ItemId("a")).weight, 1.0);
  EXPECT_DOUBLE_EQ(all.find("q")->at(ItemId("b")).weight, 2.0);
  JudgmentIndex clicks(js, ExaminationCurve::geometric(0.5), 10.0, {JudgmentSource::click_log});
  EXPECT_EQ(clicks.find("q")->at(ItemId("a")).grade, 0);
  EXPECT_DOUBLE_EQ(clicks.find("q")->at(ItemId("a")).weight, 4.0);
  EXPECT_EQ(all.find("missing"), nullptr);
}

TEST(JudgmentsFromClicks, GradesServedItems) {
  auto r = fktest::record("q", {fktest::cand("a", {1}), fktest::cand("b", {0}), fktest::cand("c", {0})});
  r.served_results = list({"a", "b"}, 2);
  std::vector<Interaction> ints = {{"q", ItemId("b"), 2, Action::click, true}};
  auto js = judgments_from_clicks(std::vector{r}, ints);
  ASSERT_EQ(js.size(), 2u);
  EXPECT_EQ(js[0].item.str(), "a");
  EXPECT_EQ(js[0].relevance, 0);
  EXPECT_EQ(js[0].logged_rank, 1);
  EXPECT_EQ(js[1].relevance, 1);
  EXPECT_EQ(js[1].logged_rank, 2);
  EXPECT_EQ(js[1].source, JudgmentSource::click_log);
}

TEST(OfflineValidation, IdenticalVariantsIdenticalReports) {
  std::vector<Judgment> js = {human("q1", "a", 2), human("q1", "b", 1), human("q2", "c", 1)};
  JudgmentIndex idx(js, ExaminationCurve::uniform());
  std::vector<ReconstructedPair> pairs = {pair("q1", list({"b", "a"}), list({"b", "a"})),
                                          pair("q2", list({"x", "c"}), list({"x", "c"}))};
  auto cmp = offline_validation_report(pairs, idx, 2);
  EXPECT_EQ(to_json(cmp.control).dump(), to_json(cmp.candidate).dump());
  auto stats = offline_validation_statistics(cmp);
  EXPECT_EQ(stats.at("delta.ndcg_at_k.raw"), 0.0);
  EXPECT_DOUBLE_EQ(stats.at("control.mrr.raw"), 0.75);
}

TEST(OfflineValidation, MovingRelevantItemUpImprovesNdcg) {
  std::vector<Judgment> js;
  std::vector<ReconstructedPair> pairs;
  for (int q = 0; q < 20; ++q) {
    const std::string id = "q" + std::to_string(q);
    js.push_back(human(id, "rel", 1));
    js.push_back(human(id, "junk", 0));
    pairs.push_back(pair(id, list({"junk", "rel"}), list({"rel", "junk"})));
  }
  auto cmp = offline_validation_report(pairs, JudgmentIndex(js, ExaminationCurve::uniform()), 2);
  EXPECT_NEAR(*cmp.control.ndcg_at_k.raw, 1.0 / std::log2(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(*cmp.candidate.ndcg_at_k.raw, 1.0);
  EXPECT_DOUBLE_EQ(*cmp.control.mrr.raw, 0.5);
  EXPECT_DOUBLE_EQ(*cmp.candidate.mrr.raw, 1.0);
  EXPECT_DOUBLE_EQ(cmp.overlap, 1.0);
}

TEST(OfflineValidation, NoOverlapFlag) {
  std::vector<Judgment> js = {human("q1", "a", 1)};
  std::vector<ReconstructedPair> pairs = {pair("q1", list({"x"}), list({"y"}))};
  auto cmp = offline_validation_report(pairs, JudgmentIndex(js, ExaminationCurve::uniform()), 1);
  EXPECT_TRUE(cmp.candidate.no_overlap);
  EXPECT_EQ(cmp.candidate.judgment_coverage, 0.0);
  EXPECT_FALSE(cmp.candidate.success_at_k.raw);
  EXPECT_FALSE(cmp.candidate.ndcg_at_k.ips_weighted);
  EXPECT_TRUE(std::isnan(offline_validation_statistics(cmp).at("candidate.ndcg_at_k.raw")));
  EXPECT_EQ(cmp.overlap, 0.0);

  EXPECT_THROW(offline_validation_report(pairs, JudgmentIndex({}, ExaminationCurve::uniform()), 1), Error);
}

TEST(OfflineValidationProperty, UniformCurveIpsEqualsRaw) {
  WorldConfig wc;
  wc.n_queries = 500;
  const World w = generate_world(wc);
  auto prod = fktest::scorer("prod", {1, 0, 0, 0, 0, 0});
  auto next = fktest::scorer("next", {0.5, 1, 1, 1, 1, 1});
  auto logs = simulate_logs(w, prod, 10, 9);
  auto js = judgments_from_clicks(logs.records, logs.interactions);
  JudgmentIndex idx(js, ExaminationCurve::uniform());
  auto cmp = offline_validation_report(reconstruct_pair(logs.records, prod, next, 10), idx, 10);
  for (const auto* r : {&cmp.control, &cmp.candidate}) {
    for (const auto* m : {&r->success_at_k, &r->mrr, &r->ndcg_at_k}) {
      ASSERT_TRUE(m->raw);
      EXPECT_EQ(*m->raw, *m->ips_weighted);
      EXPECT_GE(*m->raw, 0.0);
      EXPECT_LE(*m->raw, 1.0);
    }
    EXPECT_GE(r->judgment_coverage, 0.0);
    EXPECT_LE(r->judgment_coverage, 1.0);
  }
}

TEST(OfflineValidationProperty, IpsRemovesPositionBias) {
  // One relevant item per query, no clicks on irrelevant items: the
  // examination-free success rate is the oracle.
  WorldConfig wc;
  wc.n_queries = 4000;
  wc.relevance_mode = RelevanceMode::single_best;
  wc.nonrelevance_click_prob = 0.0;
  wc.examination_decay = 0.8;
  const World w = generate_world(wc);
  auto prod = fktest::scorer("prod", {1, 0, 0, 0, 0, 0});
  auto logs = simulate_logs(w, prod, 10, 4);
  auto js = judgments_from_clicks(logs.records, logs.interactions);
  JudgmentIndex idx(js, ExaminationCurve::geometric(0.8));
  std::vector<std::string> ids;
  std::vector<ResultList> lists;
  std::vector<int> qs;
  for (std::size_t q = 0; q < logs.records.size(); ++q) {
    ids.push_back(logs.records[q].context.query_id);
    lists.push_back(logs.records[q].served_results);
    qs.push_back(static_cast<int>(q));
  }
  auto rep = validate_lists(ids, lists, idx, 10);
  const double truth = examination_free_success_rate(w, qs, lists, 10);
  EXPECT_NEAR(*rep.success_at_k.ips_weighted, truth, 0.03);
  EXPECT_LT(*rep.success_at_k.raw, truth - 0.05);
}
