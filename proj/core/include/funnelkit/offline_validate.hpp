#pragma once

// Offline validation: relevance metrics from click-log or editorial
// judgments, position-bias correction by inverse propensity weighting, and
// the overlap diagnostic that tells whether the judgments cover the new
// results at all.

#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/criteria.hpp"
#include "funnelkit/types.hpp"

namespace funnelkit {

// Probability that a user examines a given rank.
class ExaminationCurve {
 public:
  static ExaminationCurve uniform();
  // examination(r) = decay^(r-1)
  static ExaminationCurve geometric(double decay);
  // examination(r) = values[r-1]; ranks past the end reuse the last value.
  static ExaminationCurve from_values(std::vector<double> values);

  double examination(int rank) const;
  bool is_uniform() const { return values_.empty() && decay_ == 1.0; }

 private:
  double decay_ = 1.0;
  std::vector<double> values_;
};

inline constexpr double kDefaultMaxWeight = 10.0;

// 1 / examination(rank), capped at w_max. Throws Error if the examination
// probability at `rank` is zero or rank < 1.
double ips_weight(int rank, const ExaminationCurve& curve, double w_max = kDefaultMaxWeight);

// DCG@k with gain 2^grade - 1 and discount 1/log2(rank + 1), normalized by
// the ideal DCG over all judged items of the query. nullopt when the query
// has no judged relevant item.
std::optional<double> ndcg_at_k(const ResultList& result, const std::unordered_map<ItemId, int>& grades,
                                int k);

struct JudgedItem {
  int grade = 0;
  double weight = 1.0;  // IPS weight from the logged rank; 1 without one
};

using QueryJudgments = std::unordered_map<ItemId, JudgedItem>;

// Judgments grouped per query. When several sources judge the same item the
// precedence is human, then llm, then click_log.
class JudgmentIndex {
 public:
  JudgmentIndex(std::span<const Judgment> judgments, const ExaminationCurve& curve,
                double w_max = kDefaultMaxWeight, std::set<JudgmentSource> sources = {});

  const QueryJudgments* find(const std::string& query_id) const;
  std::size_t size() const { return by_query_.size(); }
  bool empty() const { return by_query_.empty(); }

 private:
  std::unordered_map<std::string, QueryJudgments> by_query_;
};

// Click-log judgments: grade 1 for served items with a success interaction,
// grade 0 for the other served items; logged_rank is the served position.
std::vector<Judgment> judgments_from_clicks(std::span<const CounterfactualRecord> records,
                                            std::span<const Interaction> interactions);

// Fraction of changed pairs whose new (b) list contains at least one judged
// item. With no changed pairs the fraction is taken over all pairs.
double overlap_diagnostic(std::span<const ReconstructedPair> pairs, const JudgmentIndex& judgments);

struct MetricValue {
  std::optional<double> raw;
  std::optional<double> ips_weighted;
  std::size_t n_queries = 0;  // queries the metric was averaged over
};

struct OfflineValidationReport {
  MetricValue success_at_k;
  MetricValue mrr;
  MetricValue ndcg_at_k;
  double judgment_coverage = 0.0;
  std::size_t n_queries = 0;
  bool no_overlap = false;
};

struct OfflineValidationComparison {
  OfflineValidationReport control;    // side a of the pairs
  OfflineValidationReport candidate;  // side b of the pairs
  double overlap = 0.0;
  int k = 10;
};

OfflineValidationReport validate_lists(std::span<const std::string> query_ids,
                                       std::span<const ResultList> lists, const JudgmentIndex& judgments,
                                       int k);

// Throws Error when the judgment index is empty or k < 1.
OfflineValidationComparison offline_validation_report(std::span<const ReconstructedPair> pairs,
                                                      const JudgmentIndex& judgments, int k);

StatMap offline_validation_statistics(const OfflineValidationComparison& cmp);
bool is_offline_validation_statistic(std::string_view stat);

nlohmann::ordered_json to_json(const OfflineValidationReport& r);
nlohmann::ordered_json to_json(const OfflineValidationComparison& r);

}  // namespace funnelkit
