#include "funnelkit/types.hpp"

#include <algorithm>

namespace funnelkit {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::click:
      return "click";
    case Action::consume:
      return "consume";
    case Action::none:
      return "none";
  }
  return "none";
}

std::string_view to_string(JudgmentSource s) {
  switch (s) {
    case JudgmentSource::click_log:
      return "click_log";
    case JudgmentSource::human:
      return "human";
    case JudgmentSource::llm:
      return "llm";
  }
  return "human";
}

std::optional<Action> parse_action(std::string_view s) {
  if (s == "click") return Action::click;
  if (s == "consume") return Action::consume;
  if (s == "none") return Action::none;
  return std::nullopt;
}

std::optional<JudgmentSource> parse_judgment_source(std::string_view s) {
  if (s == "click_log") return JudgmentSource::click_log;
  if (s == "human") return JudgmentSource::human;
  if (s == "llm") return JudgmentSource::llm;
  return std::nullopt;
}

bool success_of_query(std::span<const Interaction> interactions, std::string_view query_id) {
  return std::any_of(interactions.begin(), interactions.end(), [&](const Interaction& i) {
    return i.success && i.query_id == query_id;
  });
}

}  // namespace funnelkit
