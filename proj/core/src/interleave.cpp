#include "funnelkit/interleave.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <boost/math/distributions/binomial.hpp>

#include "funnelkit/error.hpp"
#include "funnelkit/parallel.hpp"
#include "funnelkit/simworld.hpp"

namespace funnelkit {
namespace {

// Shared draft over any equality-comparable item type. `seen` tracks
// displayed items.
template <typename T, typename Seen>
void draft(std::span<const T> a, std::span<const T> b, std::size_t k, RngStream& rng, Seen& seen,
           std::vector<T>& out, std::vector<Team>& teams) {
  std::size_t ia = 0;
  std::size_t ib = 0;
  auto pick = [&](std::span<const T> list, std::size_t& cursor, Team team) {
    while (cursor < list.size() && seen.count(list[cursor]) > 0) ++cursor;
    if (cursor == list.size() || out.size() >= k) return;
    seen.insert(list[cursor]);
    out.push_back(list[cursor]);
    teams.push_back(team);
  };
  while (out.size() < k) {
    const std::size_t before = out.size();
    if (rng.bernoulli(0.5)) {
      pick(a, ia, Team::A);
      pick(b, ib, Team::B);
    } else {
      pick(b, ib, Team::B);
      pick(a, ia, Team::A);
    }
    if (out.size() == before) break;
  }
}

}  // namespace

std::string_view to_string(Team t) { return t == Team::A ? "A" : "B"; }

std::string_view to_string(QueryWinner w) {
  switch (w) {
    case QueryWinner::A_wins:
      return "A";
    case QueryWinner::B_wins:
      return "B";
    case QueryWinner::tie:
      return "tie";
  }
  return "tie";
}

InterleavedList team_draft(const ResultList& a, const ResultList& b, int k, RngStream& rng) {
  if (k < 1) throw Error("team_draft: k must be >= 1");
  std::unordered_set<ItemId> seen;
  std::vector<ItemId> items;
  std::vector<Team> teams;
  draft<ItemId>(a.items, b.items, static_cast<std::size_t>(k), rng, seen, items, teams);
  InterleavedList out;
  out.items.k = k;
  for (std::size_t i = 0; i < items.size(); ++i) out.attribution.emplace(items[i], teams[i]);
  out.items.items = std::move(items);
  return out;
}

QueryWinner score_query(const InterleavedList& list, std::span<const Interaction> interactions) {
  std::size_t a = 0;
  std::size_t b = 0;
  for (const auto& x : interactions) {
    auto it = list.attribution.find(x.item);
    if (it == list.attribution.end()) {
      throw Error("score_query: interaction on undisplayed item '" + x.item.str() + "' in query '" + x.query_id +
                  "'");
    }
    if (!x.success) continue;
    (it->second == Team::A ? a : b) += 1;
  }
  if (a > b) return QueryWinner::A_wins;
  if (b > a) return QueryWinner::B_wins;
  return QueryWinner::tie;
}

PreferenceResult preference_test(std::size_t wins_a, std::size_t wins_b, std::size_t ties, double alpha) {
  PreferenceResult r;
  r.wins_a = wins_a;
  r.wins_b = wins_b;
  r.ties = ties;
  const std::size_t n = wins_a + wins_b;
  if (n == 0) return r;
  const boost::math::binomial dist(static_cast<double>(n), 0.5);
  const double tail = boost::math::cdf(dist, static_cast<double>(std::min(wins_a, wins_b)));
  r.p_value = std::min(1.0, 2.0 * tail);
  if (*r.p_value <= alpha && wins_a != wins_b) r.preferred = wins_a > wins_b ? Team::A : Team::B;
  return r;
}

InterleaveSimulator::InterleaveSimulator(const World& world, const Scorer& a, const Scorer& b, int k)
    : world_(world), k_(k) {
  if (k < 1) throw Error("interleave: k must be >= 1");
  const std::size_t n = world.queries().size();
  positions_a_.resize(n);
  positions_b_.resize(n);
  parallel_for(n, [&](std::size_t j) {
    positions_a_[j] = world.rank_positions(static_cast<int>(j), a, k);
    positions_b_[j] = world.rank_positions(static_cast<int>(j), b, k);
  });
}

InterleaveResult InterleaveSimulator::run(const InterleaveConfig& cfg, std::span<const Criterion> criteria) const {
  const std::size_t total = world_.queries().size();
  const std::size_t n = cfg.n_queries == 0 ? total : cfg.n_queries;
  if (n > total) {
    throw Error("interleave: n_queries " + std::to_string(n) + " exceeds world queries " + std::to_string(total));
  }
  const RngStream rep = RngStream(cfg.seed, "interleave").child(cfg.replication);
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  if (n < total) {
    RngStream shuffle = rep.child("order");
    for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + shuffle.below(total - i)]);
    order.resize(n);
  }

  const ClickModel model = world_.click_model();
  const RngStream draft_rng = rep.child("draft");
  const RngStream click_rng = rep.child("click");
  InterleaveResult result;
  result.per_query.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const int q = order[i];
    const auto& pa = positions_a_[static_cast<std::size_t>(q)];
    const auto& pb = positions_b_[static_cast<std::size_t>(q)];
    std::unordered_set<std::uint16_t> seen;
    std::vector<std::uint16_t> shown;
    std::vector<Team> teams;
    RngStream d = draft_rng.child(static_cast<std::uint64_t>(q));
    draft<std::uint16_t>(pa, pb, static_cast<std::size_t>(k_), d, seen, shown, teams);
    const auto grades = world_.grades_at(q, shown);
    RngStream c = click_rng.child(static_cast<std::uint64_t>(q));
    const SessionOutcome s = simulate_session(grades, model, c);
    QueryWinner w = QueryWinner::tie;
    if (s.success) {
      w = teams[static_cast<std::size_t>(s.clicked_rank - 1)] == Team::A ? QueryWinner::A_wins : QueryWinner::B_wins;
    }
    result.per_query[i] = QueryPreference{world_.queries()[static_cast<std::size_t>(q)].context.query_id, w};
  });

  std::size_t wa = 0;
  std::size_t wb = 0;
  std::size_t ties = 0;
  for (const auto& p : result.per_query) {
    if (p.winner == QueryWinner::A_wins) {
      ++wa;
    } else if (p.winner == QueryWinner::B_wins) {
      ++wb;
    } else {
      ++ties;
    }
  }
  result.test = preference_test(wa, wb, ties, cfg.alpha);
  if (!criteria.empty()) result.gates = evaluate_gates(interleave_statistics(result), criteria);
  return result;
}

InterleaveResult run_interleave(const World& world, const Scorer& a, const Scorer& b, const InterleaveConfig& config,
                                std::span<const Criterion> criteria) {
  return InterleaveSimulator(world, a, b, config.k).run(config, criteria);
}

StatMap interleave_statistics(const InterleaveResult& r) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const auto& t = r.test;
  const std::size_t decisive = t.wins_a + t.wins_b;
  StatMap s;
  s["wins_a"] = static_cast<double>(t.wins_a);
  s["wins_b"] = static_cast<double>(t.wins_b);
  s["ties"] = static_cast<double>(t.ties);
  s["n_queries"] = static_cast<double>(decisive + t.ties);
  s["p_value"] = t.p_value.value_or(nan);
  s["win_rate_b"] = decisive == 0 ? nan : static_cast<double>(t.wins_b) / static_cast<double>(decisive);
  s["preferred_b"] = t.preferred == Team::B ? 1.0 : 0.0;
  s["preferred_a"] = t.preferred == Team::A ? 1.0 : 0.0;
  return s;
}

bool is_interleave_statistic(std::string_view stat) {
  static constexpr std::string_view kNames[] = {"wins_a",  "wins_b",     "ties",        "n_queries",
                                                "p_value", "win_rate_b", "preferred_b", "preferred_a"};
  return std::find(std::begin(kNames), std::end(kNames), stat) != std::end(kNames);
}

nlohmann::ordered_json to_json(const InterleaveResult& r) {
  nlohmann::ordered_json j;
  j["wins_a"] = r.test.wins_a;
  j["wins_b"] = r.test.wins_b;
  j["ties"] = r.test.ties;
  j["p_value"] = r.test.p_value ? nlohmann::ordered_json(*r.test.p_value) : nlohmann::ordered_json();
  j["preferred"] = r.test.preferred ? nlohmann::ordered_json(std::string(to_string(*r.test.preferred)))
                                    : nlohmann::ordered_json("none");
  j["gates"] = nlohmann::ordered_json::array();
  for (const auto& g : r.gates) j["gates"].push_back(to_json(g));
  return j;
}

std::string per_query_csv(const InterleaveResult& r) {
  std::ostringstream ss;
  ss << "query_id,winner\n";
  for (const auto& p : r.per_query) ss << p.query_id << ',' << to_string(p.winner) << '\n';
  return ss.str();
}

}  // namespace funnelkit
