#include "funnelkit/offline_validate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "funnelkit/error.hpp"

namespace funnelkit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double gain(int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; }
double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

int source_priority(JudgmentSource s) {
  switch (s) {
    case JudgmentSource::human:
      return 2;
    case JudgmentSource::llm:
      return 1;
    case JudgmentSource::click_log:
      return 0;
  }
  return 0;
}

double ideal_dcg(const QueryJudgments& judged, int k) {
  std::vector<int> grades;
  grades.reserve(judged.size());
  for (const auto& [_, j] : judged) grades.push_back(j.grade);
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < grades.size() && i < static_cast<std::size_t>(k); ++i) {
    idcg += gain(grades[i]) * discount(i + 1);
  }
  return idcg;
}

std::optional<double> clamp_unit(std::optional<double> v) {
  if (!v) return v;
  return std::clamp(*v, 0.0, 1.0);
}

void finish(MetricValue& m, double raw_sum, double ips_sum) {
  if (m.n_queries == 0) return;
  const double n = static_cast<double>(m.n_queries);
  m.raw = raw_sum / n;
  m.ips_weighted = clamp_unit(ips_sum / n);
}

nlohmann::ordered_json metric_json(const MetricValue& m) {
  nlohmann::ordered_json j;
  j["raw"] = m.raw ? nlohmann::ordered_json(*m.raw) : nlohmann::ordered_json(nullptr);
  j["ips_weighted"] = m.ips_weighted ? nlohmann::ordered_json(*m.ips_weighted) : nlohmann::ordered_json(nullptr);
  j["n_queries"] = m.n_queries;
  return j;
}

void add_metric(StatMap& out, const std::string& prefix, const MetricValue& m) {
  out[prefix + ".raw"] = m.raw.value_or(kNaN);
  out[prefix + ".ips_weighted"] = m.ips_weighted.value_or(kNaN);
}

void add_delta(StatMap& out, const std::string& prefix, const MetricValue& a, const MetricValue& b) {
  out[prefix + ".raw"] = (a.raw && b.raw) ? *b.raw - *a.raw : kNaN;
  out[prefix + ".ips_weighted"] = (a.ips_weighted && b.ips_weighted) ? *b.ips_weighted - *a.ips_weighted : kNaN;
}

}  // namespace

ExaminationCurve ExaminationCurve::uniform() { return ExaminationCurve{}; }

ExaminationCurve ExaminationCurve::geometric(double decay) {
  if (!(decay > 0.0 && decay <= 1.0)) throw Error("examination decay must be in (0, 1]");
  ExaminationCurve c;
  c.decay_ = decay;
  return c;
}

ExaminationCurve ExaminationCurve::from_values(std::vector<double> values) {
  if (values.empty()) throw Error("examination curve needs at least one value");
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("examination probabilities must be in [0, 1]");
  }
  ExaminationCurve c;
  c.values_ = std::move(values);
  return c;
}

double ExaminationCurve::examination(int rank) const {
  if (rank < 1) throw Error("rank must be >= 1");
  if (!values_.empty()) {
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(rank - 1), values_.size() - 1);
    return values_[i];
  }
  return std::pow(decay_, rank - 1);
}

double ips_weight(int rank, const ExaminationCurve& curve, double w_max) {
  const double e = curve.examination(rank);
  if (e <= 0.0) throw Error("zero examination probability at rank " + std::to_string(rank));
  return std::min(1.0 / e, w_max);
}

std::optional<double> ndcg_at_k(const ResultList& result, const std::unordered_map<ItemId, int>& grades,
                                int k) {
  if (k < 1) throw Error("ndcg_at_k: k must be >= 1");
  std::vector<int> all;
  all.reserve(grades.size());
  for (const auto& [_, g] : grades) all.push_back(g);
  std::sort(all.begin(), all.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < all.size() && i < static_cast<std::size_t>(k); ++i) {
    idcg += gain(all[i]) * discount(i + 1);
  }
  if (idcg <= 0.0) return std::nullopt;
  double dcg = 0.0;
  for (std::size_t i = 0; i < result.items.size() && i < static_cast<std::size_t>(k); ++i) {
    auto it = grades.find(result.items[i]);
    if (it != grades.end()) dcg += gain(it->second) * discount(i + 1);
  }
  return dcg / idcg;
}

JudgmentIndex::JudgmentIndex(std::span<const Judgment> judgments, const ExaminationCurve& curve, double w_max,
                             std::set<JudgmentSource> sources) {
  std::unordered_map<std::string, std::unordered_map<ItemId, int>> priority;
  for (const auto& j : judgments) {
    if (!sources.empty() && !sources.contains(j.source)) continue;
    const int p = source_priority(j.source);
    auto& prio = priority[j.query_id];
    auto it = prio.find(j.item);
    if (it != prio.end() && it->second >= p) continue;
    prio[j.item] = p;
    JudgedItem item;
    item.grade = j.relevance;
    item.weight = j.logged_rank ? ips_weight(*j.logged_rank, curve, w_max) : 1.0;
    by_query_[j.query_id][j.item] = item;
  }
}

const QueryJudgments* JudgmentIndex::find(const std::string& query_id) const {
  auto it = by_query_.find(query_id);
  return it == by_query_.end() ? nullptr : &it->second;
}

std::vector<Judgment> judgments_from_clicks(std::span<const CounterfactualRecord> records,
                                            std::span<const Interaction> interactions) {
  std::unordered_map<std::string, std::vector<const Interaction*>> by_query;
  for (const auto& it : interactions) by_query[it.query_id].push_back(&it);
  std::vector<Judgment> out;
  for (const auto& rec : records) {
    const auto found = by_query.find(rec.context.query_id);
    const auto& items = rec.served_results.items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      bool success = false;
      if (found != by_query.end()) {
        for (const Interaction* it : found->second) success = success || (it->success && it->item == items[i]);
      }
      Judgment j;
      j.query_id = rec.context.query_id;
      j.item = items[i];
      j.relevance = success ? 1 : 0;
      j.source = JudgmentSource::click_log;
      j.logged_rank = static_cast<int>(i + 1);
      out.push_back(std::move(j));
    }
  }
  return out;
}

double overlap_diagnostic(std::span<const ReconstructedPair> pairs, const JudgmentIndex& judgments) {
  auto covered = [&](const ReconstructedPair& p) {
    const QueryJudgments* q = judgments.find(p.query_id);
    if (q == nullptr) return false;
    return std::any_of(p.b.items.begin(), p.b.items.end(), [&](const ItemId& id) { return q->contains(id); });
  };
  std::size_t changed = 0;
  std::size_t changed_covered = 0;
  std::size_t all_covered = 0;
  for (const auto& p : pairs) {
    const bool c = covered(p);
    all_covered += c ? 1 : 0;
    if (p.a.items != p.b.items) {
      ++changed;
      changed_covered += c ? 1 : 0;
    }
  }
  if (changed > 0) return static_cast<double>(changed_covered) / static_cast<double>(changed);
  if (pairs.empty()) return 0.0;
  return static_cast<double>(all_covered) / static_cast<double>(pairs.size());
}

OfflineValidationReport validate_lists(std::span<const std::string> query_ids, std::span<const ResultList> lists,
                                       const JudgmentIndex& judgments, int k) {
  if (k < 1) throw Error("offline validation: k must be >= 1");
  if (query_ids.size() != lists.size()) throw Error("offline validation: query/list count mismatch");
  OfflineValidationReport r;
  r.n_queries = lists.size();
  double s_raw = 0, s_ips = 0, m_raw = 0, m_ips = 0, n_raw = 0, n_ips = 0;
  std::size_t covered = 0;
  for (std::size_t q = 0; q < lists.size(); ++q) {
    const QueryJudgments* judged = judgments.find(query_ids[q]);
    if (judged == nullptr) continue;
    const auto& items = lists[q].items;
    const std::size_t depth = std::min<std::size_t>(items.size(), static_cast<std::size_t>(k));

    bool any_judged = false;
    const JudgedItem* first_rel = nullptr;
    std::size_t first_rank = 0;
    double dcg = 0.0;
    double dcg_ips = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
      auto it = judged->find(items[i]);
      if (it == judged->end()) continue;
      any_judged = true;
      const JudgedItem& j = it->second;
      if (j.grade > 0 && first_rel == nullptr) {
        first_rel = &j;
        first_rank = i + 1;
      }
      dcg += gain(j.grade) * discount(i + 1);
      dcg_ips += j.weight * gain(j.grade) * discount(i + 1);
    }
    covered += any_judged ? 1 : 0;

    ++r.success_at_k.n_queries;
    ++r.mrr.n_queries;
    if (first_rel != nullptr) {
      s_raw += 1.0;
      s_ips += first_rel->weight;
      m_raw += 1.0 / static_cast<double>(first_rank);
      m_ips += first_rel->weight / static_cast<double>(first_rank);
    }
    const double idcg = ideal_dcg(*judged, k);
    if (idcg > 0.0) {
      ++r.ndcg_at_k.n_queries;
      n_raw += dcg / idcg;
      n_ips += dcg_ips / idcg;
    }
  }
  r.judgment_coverage = lists.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(lists.size());
  r.no_overlap = covered == 0;
  if (!r.no_overlap) {
    finish(r.success_at_k, s_raw, s_ips);
    finish(r.mrr, m_raw, m_ips);
    finish(r.ndcg_at_k, n_raw, n_ips);
  }
  return r;
}

OfflineValidationComparison offline_validation_report(std::span<const ReconstructedPair> pairs,
                                                      const JudgmentIndex& judgments, int k) {
  if (judgments.empty()) throw Error("offline validation: no judgments");
  std::vector<std::string> ids;
  std::vector<ResultList> a;
  std::vector<ResultList> b;
  ids.reserve(pairs.size());
  for (const auto& p : pairs) {
    ids.push_back(p.query_id);
    a.push_back(p.a);
    b.push_back(p.b);
  }
  OfflineValidationComparison cmp;
  cmp.k = k;
  cmp.control = validate_lists(ids, a, judgments, k);
  cmp.candidate = validate_lists(ids, b, judgments, k);
  cmp.overlap = overlap_diagnostic(pairs, judgments);
  return cmp;
}

StatMap offline_validation_statistics(const OfflineValidationComparison& cmp) {
  StatMap out;
  for (const auto& [side, r] : {std::pair<std::string, const OfflineValidationReport*>{"control", &cmp.control},
                                {"candidate", &cmp.candidate}}) {
    add_metric(out, side + ".success_at_k", r->success_at_k);
    add_metric(out, side + ".mrr", r->mrr);
    add_metric(out, side + ".ndcg_at_k", r->ndcg_at_k);
    out[side + ".judgment_coverage"] = r->judgment_coverage;
  }
  add_delta(out, "delta.success_at_k", cmp.control.success_at_k, cmp.candidate.success_at_k);
  add_delta(out, "delta.mrr", cmp.control.mrr, cmp.candidate.mrr);
  add_delta(out, "delta.ndcg_at_k", cmp.control.ndcg_at_k, cmp.candidate.ndcg_at_k);
  out["overlap"] = cmp.overlap;
  out["n_queries"] = static_cast<double>(cmp.candidate.n_queries);
  return out;
}

bool is_offline_validation_statistic(std::string_view stat) {
  static const StatMap names = offline_validation_statistics(OfflineValidationComparison{});
  return names.contains(std::string(stat));
}

nlohmann::ordered_json to_json(const OfflineValidationReport& r) {
  nlohmann::ordered_json j;
  j["success_at_k"] = metric_json(r.success_at_k);
  j["mrr"] = metric_json(r.mrr);
  j["ndcg_at_k"] = metric_json(r.ndcg_at_k);
  j["judgment_coverage"] = r.judgment_coverage;
  j["n_queries"] = r.n_queries;
  j["no_overlap"] = r.no_overlap;
  return j;
}

nlohmann::ordered_json to_json(const OfflineValidationComparison& r) {
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["overlap"] = r.overlap;
  j["control"] = to_json(r.control);
  j["candidate"] = to_json(r.candidate);
  return j;
}

}  // namespace funnelkit
