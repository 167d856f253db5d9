#pragma once

// Offline verification: how many queries changed (width), how much they
// changed (depth), segmented by prior success and by query attributes.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/criteria.hpp"
#include "funnelkit/stats.hpp"
#include "funnelkit/types.hpp"

namespace funnelkit {

struct WidthDepth {
  double width = 0.0;
  std::optional<Summary> depth_jaccard;   // over changed queries
  std::optional<Summary> depth_spearman;  // over changed queries with defined spearman
  std::size_t n_queries = 0;
  std::size_t n_changed = 0;
};

inline constexpr const char* kPreviouslySuccessful = "previously_successful";
inline constexpr const char* kPreviouslyUnsuccessful = "previously_unsuccessful";
// Segment value for queries that lack a segmentation attribute.
inline constexpr const char* kMissingAttribute = "unknown";

struct VerificationReport {
  WidthDepth overall;
  std::map<std::string, WidthDepth> by_success;
  // attribute name -> attribute value -> statistics
  std::map<std::string, std::map<std::string, WidthDepth>> by_attribute;
  std::vector<GateOutcome> gates;
};

using ListPair = std::pair<ResultList, ResultList>;

// A pair counts as changed iff the ordered sequences differ.
WidthDepth width_depth(std::span<const ListPair> pairs);

// Throws Error on empty records or a criterion naming an unknown statistic.
VerificationReport verification_report(std::span<const CounterfactualRecord> records,
                                       const Scorer& scorer_prod, const Scorer& scorer_new,
                                       std::span<const Interaction> interactions,
                                       std::span<const std::string> segment_attrs,
                                       std::span<const Criterion> criteria);

// Flattened dotted-path statistics; undefined cells are NaN.
StatMap report_statistics(const VerificationReport& report);

// True if `stat` is a path verification_report can publish for the given
// segmentation attributes (attribute values are not known statically).
bool is_verification_statistic(std::string_view stat, std::span<const std::string> segment_attrs);

// Mean over records of the share of top-k items whose metadata has
// attr == value under `scorer`.
double attribute_share(std::span<const CounterfactualRecord> records, const Scorer& scorer,
                       const std::string& attr, const std::string& value, int k);

nlohmann::ordered_json to_json(const WidthDepth& wd);
nlohmann::ordered_json to_json(const VerificationReport& report);

}  // namespace funnelkit
