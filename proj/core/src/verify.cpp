#include "funnelkit/verify.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "funnelkit/error.hpp"
#include "funnelkit/parallel.hpp"
#include "funnelkit/similarity.hpp"

namespace funnelkit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<std::string_view, 11> kLeaves = {
    "width",
    "n_queries",
    "n_changed",
    "depth_jaccard.mean",
    "depth_jaccard.p25",
    "depth_jaccard.p50",
    "depth_jaccard.p75",
    "depth_spearman.mean",
    "depth_spearman.p25",
    "depth_spearman.p50",
    "depth_spearman.p75",
};

bool is_leaf(std::string_view s) {
  for (auto leaf : kLeaves) {
    if (s == leaf) return true;
  }
  return false;
}

void add_summary(StatMap& out, const std::string& prefix, const std::optional<Summary>& s) {
  out[prefix + ".mean"] = s ? s->mean : kNaN;
  out[prefix + ".p25"] = s ? s->p25 : kNaN;
  out[prefix + ".p50"] = s ? s->p50 : kNaN;
  out[prefix + ".p75"] = s ? s->p75 : kNaN;
}

void add_width_depth(StatMap& out, const std::string& prefix, const WidthDepth& wd) {
  out[prefix + ".width"] = wd.width;
  out[prefix + ".n_queries"] = static_cast<double>(wd.n_queries);
  out[prefix + ".n_changed"] = static_cast<double>(wd.n_changed);
  add_summary(out, prefix + ".depth_jaccard", wd.depth_jaccard);
  add_summary(out, prefix + ".depth_spearman", wd.depth_spearman);
}

nlohmann::ordered_json summary_json(const std::optional<Summary>& s) {
  if (!s) return nullptr;
  nlohmann::ordered_json j;
  j["mean"] = s->mean;
  j["p25"] = s->p25;
  j["p50"] = s->p50;
  j["p75"] = s->p75;
  j["n"] = s->n;
  return j;
}

// Per-query change measurements, computed once and regrouped per segment.
struct QueryChange {
  bool changed = false;
  double jaccard = 1.0;
  std::optional<double> spearman;
};

WidthDepth aggregate(std::span<const QueryChange> changes) {
  WidthDepth wd;
  wd.n_queries = changes.size();
  std::vector<double> jac;
  std::vector<double> spr;
  for (const auto& c : changes) {
    if (!c.changed) continue;
    ++wd.n_changed;
    jac.push_back(c.jaccard);
    if (c.spearman) spr.push_back(*c.spearman);
  }
  wd.width = wd.n_queries == 0 ? 0.0 : static_cast<double>(wd.n_changed) / static_cast<double>(wd.n_queries);
  if (!jac.empty()) wd.depth_jaccard = summarize(std::move(jac));
  if (!spr.empty()) wd.depth_spearman = summarize(std::move(spr));
  return wd;
}

QueryChange measure(const ResultList& a, const ResultList& b) {
  QueryChange c;
  c.changed = a.items != b.items;
  if (c.changed) {
    const SimilarityScore s = similarity(a, b);
    c.jaccard = s.jaccard;
    c.spearman = s.spearman;
  }
  return c;
}

}  // namespace

WidthDepth width_depth(std::span<const ListPair> pairs) {
  std::vector<QueryChange> changes;
  changes.reserve(pairs.size());
  for (const auto& [a, b] : pairs) changes.push_back(measure(a, b));
  return aggregate(changes);
}

VerificationReport verification_report(std::span<const CounterfactualRecord> records,
                                       const Scorer& scorer_prod, const Scorer& scorer_new,
                                       std::span<const Interaction> interactions,
                                       std::span<const std::string> segment_attrs,
                                       std::span<const Criterion> criteria) {
  if (records.empty()) throw Error("verification_report: no records");

  std::vector<QueryChange> changes(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const int k = records[i].served_results.k;
    changes[i] = measure(reconstruct(records[i], scorer_prod, k), reconstruct(records[i], scorer_new, k));
  });

  std::unordered_map<std::string_view, bool> successful;
  for (const auto& it : interactions) {
    if (it.success) successful[it.query_id] = true;
  }

  VerificationReport report;
  report.overall = aggregate(changes);

  std::vector<QueryChange> succ;
  std::vector<QueryChange> unsucc;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool s = successful.contains(records[i].context.query_id);
    (s ? succ : unsucc).push_back(changes[i]);
  }
  report.by_success[kPreviouslySuccessful] = aggregate(succ);
  report.by_success[kPreviouslyUnsuccessful] = aggregate(unsucc);

  for (const auto& attr : segment_attrs) {
    std::map<std::string, std::vector<QueryChange>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& attrs = records[i].context.attributes;
      auto it = attrs.find(attr);
      groups[it == attrs.end() ? std::string(kMissingAttribute) : it->second].push_back(changes[i]);
    }
    auto& seg = report.by_attribute[attr];
    for (const auto& [value, group] : groups) seg[value] = aggregate(group);
  }

  report.gates = evaluate_gates(report_statistics(report), criteria);
  return report;
}

StatMap report_statistics(const VerificationReport& report) {
  StatMap out;
  add_width_depth(out, "overall", report.overall);
  for (const auto& [name, wd] : report.by_success) add_width_depth(out, "by_success." + name, wd);
  for (const auto& [attr, values] : report.by_attribute) {
    for (const auto& [value, wd] : values) add_width_depth(out, "by_attribute." + attr + "." + value, wd);
  }
  return out;
}

bool is_verification_statistic(std::string_view stat, std::span<const std::string> segment_attrs) {
  auto strip = [&](std::string_view prefix) -> std::optional<std::string_view> {
    if (stat.starts_with(prefix)) return stat.substr(prefix.size());
    return std::nullopt;
  };
  if (auto rest = strip("overall.")) return is_leaf(*rest);
  if (auto rest = strip("by_success.previously_successful.")) return is_leaf(*rest);
  if (auto rest = strip("by_success.previously_unsuccessful.")) return is_leaf(*rest);
  if (auto rest = strip("by_attribute.")) {
    for (const auto& attr : segment_attrs) {
      if (!rest->starts_with(attr + ".")) continue;
      std::string_view tail = rest->substr(attr.size() + 1);
      for (auto leaf : kLeaves) {
        if (tail.size() > leaf.size() + 1 && tail.ends_with(leaf) &&
            tail[tail.size() - leaf.size() - 1] == '.') {
          return true;
        }
      }
    }
  }
  return false;
}

double attribute_share(std::span<const CounterfactualRecord> records, const Scorer& scorer,
                       const std::string& attr, const std::string& value, int k) {
  if (records.empty()) return 0.0;
  std::vector<double> shares(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& rec = records[i];
    const ResultList list = reconstruct(rec, scorer, k);
    if (list.items.empty()) return;
    std::size_t hits = 0;
    for (const auto& id : list.items) {
      for (const auto& c : rec.candidates) {
        if (c.item != id) continue;
        auto it = c.attributes.find(attr);
        if (it != c.attributes.end() && it->second == value) ++hits;
        break;
      }
    }
    shares[i] = static_cast<double>(hits) / static_cast<double>(list.items.size());
  });
  return mean(shares);
}

nlohmann::ordered_json to_json(const WidthDepth& wd) {
  nlohmann::ordered_json j;
  j["width"] = wd.width;
  j["n_queries"] = wd.n_queries;
  j["n_changed"] = wd.n_changed;
  j["depth_jaccard"] = summary_json(wd.depth_jaccard);
  j["depth_spearman"] = summary_json(wd.depth_spearman);
  return j;
}

nlohmann::ordered_json to_json(const VerificationReport& report) {
  nlohmann::ordered_json j;
  j["overall"] = to_json(report.overall);
  j["by_success"] = nlohmann::ordered_json::object();
  for (const auto& [name, wd] : report.by_success) j["by_success"][name] = to_json(wd);
  j["by_attribute"] = nlohmann::ordered_json::object();
  for (const auto& [attr, values] : report.by_attribute) {
    auto& a = j["by_attribute"][attr];
    a = nlohmann::ordered_json::object();
    for (const auto& [value, wd] : values) a[value] = to_json(wd);
  }
  j["gates"] = nlohmann::ordered_json::array();
  for (const auto& g : report.gates) j["gates"].push_back(to_json(g));
  return j;
}

}  // namespace funnelkit
