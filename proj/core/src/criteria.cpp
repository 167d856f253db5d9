#include "funnelkit/criteria.hpp"

#include <cmath>
#include <sstream>

#include "funnelkit/error.hpp"

namespace funnelkit {

std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::lt:
      return "<";
    case Comparator::le:
      return "<=";
    case Comparator::gt:
      return ">";
    case Comparator::ge:
      return ">=";
  }
  return ">=";
}

std::string_view to_string(CriterionKind k) {
  switch (k) {
    case CriterionKind::necessary:
      return "necessary";
    case CriterionKind::sufficient:
      return "sufficient";
    case CriterionKind::guardrail:
      return "guardrail";
  }
  return "necessary";
}

std::optional<Comparator> parse_comparator(std::string_view s) {
  if (s == "<") return Comparator::lt;
  if (s == "<=" || s == "≤") return Comparator::le;
  if (s == ">") return Comparator::gt;
  if (s == ">=" || s == "≥") return Comparator::ge;
  return std::nullopt;
}

std::optional<CriterionKind> parse_criterion_kind(std::string_view s) {
  if (s == "necessary") return CriterionKind::necessary;
  if (s == "sufficient") return CriterionKind::sufficient;
  if (s == "guardrail") return CriterionKind::guardrail;
  return std::nullopt;
}

bool compare(double observed, Comparator cmp, double threshold) {
  switch (cmp) {
    case Comparator::lt:
      return observed < threshold;
    case Comparator::le:
      return observed <= threshold;
    case Comparator::gt:
      return observed > threshold;
    case Comparator::ge:
      return observed >= threshold;
  }
  return false;
}

std::vector<GateOutcome> evaluate_gates(const StatMap& stats, std::span<const Criterion> criteria) {
  std::vector<GateOutcome> out;
  out.reserve(criteria.size());
  for (const auto& c : criteria) {
    auto it = stats.find(c.stat);
    if (it == stats.end()) {
      throw Error("criterion '" + c.id + "' references unknown statistic '" + c.stat + "'");
    }
    GateOutcome g;
    g.criterion_id = c.id;
    g.kind = c.kind;
    g.stat = c.stat;
    g.observed = it->second;
    g.comparator = c.cmp;
    g.threshold = c.threshold;
    g.passed = compare(g.observed, c.cmp, c.threshold);
    out.push_back(std::move(g));
  }
  return out;
}

nlohmann::ordered_json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::ordered_json to_json(const GateOutcome& g) {
  nlohmann::ordered_json j;
  j["criterion_id"] = g.criterion_id;
  j["kind"] = std::string(to_string(g.kind));
  j["stat"] = g.stat;
  j["observed"] = json_number(g.observed);
  j["comparator"] = std::string(to_string(g.comparator));
  j["threshold"] = g.threshold;
  j["passed"] = g.passed;
  return j;
}

std::string describe(const GateOutcome& g) {
  std::ostringstream ss;
  ss << g.stat << ' ' << to_string(g.comparator) << ' ' << g.threshold << " (observed ";
  if (std::isfinite(g.observed)) {
    ss << g.observed;
  } else {
    ss << "undefined";
  }
  ss << ')';
  return ss.str();
}

}  // namespace funnelkit
