#pragma once

// Domain types shared by every evaluation stage.

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace funnelkit {

// Opaque catalog item identifier. Ordering is byte order of the id.
class ItemId {
 public:
  ItemId() = default;
  explicit ItemId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend bool operator==(const ItemId&, const ItemId&) = default;
  friend std::strong_ordering operator<=>(const ItemId& a, const ItemId& b) {
    const int c = a.value_.compare(b.value_);
    if (c < 0) return std::strong_ordering::less;
    if (c > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

 private:
  std::string value_;
};

using Attributes = std::map<std::string, std::string>;

struct QueryContext {
  std::string query_id;
  std::string user_id;
  std::string query_text;
  std::int64_t timestamp = 0;  // ms since epoch
  Attributes attributes;       // segmentation characteristics, e.g. length_class

  friend bool operator==(const QueryContext&, const QueryContext&) = default;
};

// One retrieved candidate with its logged feature snapshot. `attributes`
// carries item metadata that boost rules can match on.
struct CandidateFeatures {
  ItemId item;
  std::vector<double> features;
  Attributes attributes;

  friend bool operator==(const CandidateFeatures&, const CandidateFeatures&) = default;
};

struct VariantId {
  std::string name;
  std::map<std::string, double> parameters;

  friend bool operator==(const VariantId&, const VariantId&) = default;
};

// Ordered list of displayed items; `k` is the display depth.
struct ResultList {
  std::vector<ItemId> items;
  int k = 1;

  std::size_t size() const { return items.size(); }
  friend bool operator==(const ResultList&, const ResultList&) = default;
};

struct CounterfactualRecord {
  QueryContext context;
  std::vector<CandidateFeatures> candidates;
  VariantId served_variant;
  ResultList served_results;

  friend bool operator==(const CounterfactualRecord&, const CounterfactualRecord&) = default;
};

enum class Action { click, consume, none };

struct Interaction {
  std::string query_id;
  ItemId item;
  int rank = 1;  // 1-based
  Action action = Action::click;
  bool success = false;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

enum class JudgmentSource { click_log, human, llm };

// Relevance judgment for one (query, item). `logged_rank` is the position
// the item held when the judgment was observed; only click-log judgments
// carry it and it drives position-bias correction.
struct Judgment {
  std::string query_id;
  ItemId item;
  int relevance = 0;
  JudgmentSource source = JudgmentSource::human;
  std::optional<int> logged_rank;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

std::string_view to_string(Action a);
std::string_view to_string(JudgmentSource s);
std::optional<Action> parse_action(std::string_view s);
std::optional<JudgmentSource> parse_judgment_source(std::string_view s);

// True iff any interaction for `query_id` is flagged as a success.
bool success_of_query(std::span<const Interaction> interactions, std::string_view query_id);

}  // namespace funnelkit

template <>
struct std::hash<funnelkit::ItemId> {
  std::size_t operator()(const funnelkit::ItemId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
