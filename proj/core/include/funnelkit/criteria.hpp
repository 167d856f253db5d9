#pragma once

// Criteria gates. A stage publishes named statistics (dotted paths such as
// "by_success.previously_unsuccessful.width"); criteria compare one of them
// against a threshold. Undefined statistics are stored as NaN and fail every
// comparison.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace funnelkit {

enum class Comparator { lt, le, gt, ge };
enum class CriterionKind { necessary, sufficient, guardrail };

using StatMap = std::map<std::string, double>;

struct Criterion {
  std::string id;
  std::string stat;
  Comparator cmp = Comparator::ge;
  double threshold = 0.0;
  CriterionKind kind = CriterionKind::necessary;
  std::string stage;  // owning funnel stage; empty outside a funnel
};

struct GateOutcome {
  std::string criterion_id;
  CriterionKind kind = CriterionKind::necessary;
  std::string stat;
  double observed = 0.0;
  Comparator comparator = Comparator::ge;
  double threshold = 0.0;
  bool passed = false;
};

std::string_view to_string(Comparator c);
std::string_view to_string(CriterionKind k);
std::optional<Comparator> parse_comparator(std::string_view s);
std::optional<CriterionKind> parse_criterion_kind(std::string_view s);

bool compare(double observed, Comparator cmp, double threshold);

// One outcome per criterion, in order. Throws Error naming any statistic
// that is not in `stats`.
std::vector<GateOutcome> evaluate_gates(const StatMap& stats, std::span<const Criterion> criteria);

nlohmann::ordered_json to_json(const GateOutcome& g);
// Human-readable form, e.g. "overall.width >= 0.05 (observed 0)".
std::string describe(const GateOutcome& g);

// JSON number, or null for NaN/inf.
nlohmann::ordered_json json_number(double v);

}  // namespace funnelkit
