#pragma once

// Team-draft interleaving: merge two rankings into one displayed list with
// per-item team attribution, credit successes to teams and test the
// within-query preference with an exact sign test.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/criteria.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/types.hpp"

namespace funnelkit {

class World;

enum class Team { A, B };
enum class QueryWinner { A_wins, B_wins, tie };

std::string_view to_string(Team t);
std::string_view to_string(QueryWinner w);

struct InterleavedList {
  ResultList items;
  std::map<ItemId, Team> attribution;
};

// Each round a fair coin picks which team goes first; a team adds its
// highest-ranked item not yet shown. Stops at k items or when both inputs
// are exhausted. Throws Error if k < 1.
InterleavedList team_draft(const ResultList& a, const ResultList& b, int k, RngStream& rng);

// Counts success-flagged interactions per team. Throws Error when an
// interaction names an item that was not displayed.
QueryWinner score_query(const InterleavedList& list, std::span<const Interaction> interactions);

struct PreferenceResult {
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;
  std::optional<double> p_value;  // undefined without decisive queries
  std::optional<Team> preferred;
};

// Two-sided exact binomial sign test over decisive queries, null p = 0.5.
PreferenceResult preference_test(std::size_t wins_a, std::size_t wins_b, std::size_t ties, double alpha = 0.05);

struct InterleaveConfig {
  std::size_t n_queries = 0;  // 0 = every world query
  int k = 10;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
};

struct QueryPreference {
  std::string query_id;
  QueryWinner winner = QueryWinner::tie;
};

struct InterleaveResult {
  std::vector<QueryPreference> per_query;
  PreferenceResult test;
  std::vector<GateOutcome> gates;
};

// Serves both scorers once; every run() draws a fresh query sample, team
// draft and click simulation for its replication.
class InterleaveSimulator {
 public:
  InterleaveSimulator(const World& world, const Scorer& a, const Scorer& b, int k);

  InterleaveResult run(const InterleaveConfig& config, std::span<const Criterion> criteria = {}) const;

 private:
  const World& world_;
  int k_;
  std::vector<std::vector<std::uint16_t>> positions_a_;
  std::vector<std::vector<std::uint16_t>> positions_b_;
};

InterleaveResult run_interleave(const World& world, const Scorer& a, const Scorer& b, const InterleaveConfig& config,
                                std::span<const Criterion> criteria = {});

// wins_a, wins_b, ties, n_queries, p_value, win_rate_b, preferred_b,
// preferred_a. Undefined values are NaN.
StatMap interleave_statistics(const InterleaveResult& result);
bool is_interleave_statistic(std::string_view stat);

nlohmann::ordered_json to_json(const InterleaveResult& result);
std::string per_query_csv(const InterleaveResult& result);

}  // namespace funnelkit
