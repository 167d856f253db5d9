#pragma once

// Synthetic personalized-search world used as ground truth for every online
// method: a catalog, users with preference vectors, a query stream with
// retrieved candidates, ground-truth relevance grades, and a position-based
// click model with geometric examination and a first-click cutoff.
//
// Features of candidate i for a query by user u:
//   f[0]   = popularity(i)
//   f[m]   = pref(u)[m-1] * latent(i)[m-1]          m = 1..d-1
// Latent utility (drives relevance):
//   U = popularity_weight * f[0] + sum_{m>=1} f[m] + relevance_noise * eta(q, i)
// so a scorer with weights (popularity_weight, 1, ..., 1) is the best linear
// ranker.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/types.hpp"

namespace funnelkit {

enum class RelevanceMode {
  threshold,   // grade 1 above relevance_threshold, grade 2 above threshold + 1.5
  single_best  // exactly one relevant candidate per query: the highest utility
};

struct WorldConfig {
  std::uint64_t seed = 1;
  int n_items = 200;
  int n_users = 500;
  int n_queries = 2000;
  int feature_dim = 6;
  int retrieval_depth = 20;
  int display_k = 10;
  double examination_decay = 0.8;        // gamma
  double relevance_click_prob = 0.9;     // p_rel
  double nonrelevance_click_prob = 0.05; // p_irr
  double long_query_share = 0.3;
  double podcast_share = 0.2;
  double podcast_long_affinity = 1.0;  // retrieval bonus for podcasts on long queries
  double popularity_weight = 0.5;
  double relevance_noise = 0.5;
  double relevance_threshold = 2.0;
  double user_scale_spread = 0.5;  // sd of log preference scale across users
  RelevanceMode relevance_mode = RelevanceMode::threshold;
  std::int64_t max_enumeration = 50'000'000;  // bound on n_queries * k for exact oracles
};

// Throws ConfigError naming the offending field.
void validate(const WorldConfig& config);

struct ClickModel {
  double examination_decay = 1.0;
  double p_rel = 1.0;
  double p_irr = 0.0;
};

// Outcome of one simulated query session.
struct SessionOutcome {
  int clicked_rank = 0;  // 1-based, 0 when nothing was clicked
  bool success = false;
};

// Samples the PBM: rank r is examined with probability decay^(r-1); an
// examined item is clicked with p_rel if grade > 0, else p_irr; the first
// click ends the session.
SessionOutcome simulate_session(std::span<const std::uint8_t> grades, const ClickModel& model, RngStream& rng);

// Exact probability that the session ends in a successful click.
double session_success_probability(std::span<const std::uint8_t> grades, const ClickModel& model);

// Probability of success if every displayed rank were examined.
double examination_free_success_probability(std::span<const std::uint8_t> grades, const ClickModel& model);

class World {
 public:
  struct Item {
    ItemId id;
    double popularity = 0.0;
    std::vector<double> latent;
    Attributes attributes;
  };
  struct User {
    std::string id;
    std::vector<double> preference;
  };
  struct Query {
    QueryContext context;
    int user = 0;
    std::vector<std::uint32_t> candidates;  // item indices in retrieval order
    std::vector<std::uint8_t> grades;       // ground-truth grade per candidate
  };

  const WorldConfig& config() const { return config_; }
  const std::vector<Item>& items() const { return items_; }
  const std::vector<User>& users() const { return users_; }
  const std::vector<Query>& queries() const { return queries_; }
  ClickModel click_model() const;

  // Query indices issued by `user`, in stream order.
  const std::vector<int>& queries_of_user(int user) const { return by_user_[static_cast<std::size_t>(user)]; }
  std::optional<int> query_index(const std::string& query_id) const;

  void candidate_features(int query, std::size_t pos, std::span<double> out) const;
  // Logged record with candidates only (served fields empty).
  CounterfactualRecord logged_candidates(int query) const;

  // Candidate positions of the top-k list under `scorer`; identical order to
  // reconstruct() on the logged record.
  std::vector<std::uint16_t> rank_positions(int query, const Scorer& scorer, int k) const;
  std::vector<std::uint8_t> grades_at(int query, std::span<const std::uint16_t> positions) const;
  ItemId item_at(int query, std::size_t pos) const;
  // Candidate position of `item` in `query`, if retrieved.
  std::optional<std::size_t> position_of(int query, const ItemId& item) const;

 private:
  friend World generate_world(const WorldConfig& config);

  WorldConfig config_;
  std::vector<Item> items_;
  std::vector<User> users_;
  std::vector<Query> queries_;
  std::vector<std::vector<int>> by_user_;
  std::unordered_map<std::string, int> index_;
};

World generate_world(const WorldConfig& config);

// Canonical text dump of the world (catalog, users, queries, grades).
std::string serialize_world(const World& world);

// Serves one query: candidates from retrieval, served results by `scorer`.
CounterfactualRecord serve(const World& world, int query, const Scorer& scorer, int k);
CounterfactualRecord serve(const World& world, const QueryContext& context, const Scorer& scorer, int k);

// Simulated interactions (clicks only) on a displayed list of items.
std::vector<Interaction> interact(const World& world, int query, const ResultList& shown, RngStream& rng);
std::vector<Interaction> interact(const World& world, const CounterfactualRecord& record, RngStream& rng);

// Top-k grade lists of `scorer` for every world query; shared by the online
// simulators so serving happens once per scorer.
std::vector<std::vector<std::uint8_t>> served_grades(const World& world, const Scorer& scorer, int k);

// Exact expected per-query success probability under the click model,
// averaged over all world queries (or the given subset). Throws Error when
// queries * k exceeds config.max_enumeration.
double true_success_rate(const World& world, const Scorer& scorer, int k);
double true_success_rate(const World& world, const Scorer& scorer, int k, std::span<const int> queries);

// Mean over the given lists of the examination-free success probability.
double examination_free_success_rate(const World& world, std::span<const int> queries,
                                     std::span<const ResultList> lists, int k);

struct SimulatedLogs {
  std::vector<CounterfactualRecord> records;
  std::vector<Interaction> interactions;
};

// Serves every world query with `scorer` and samples interactions from
// stream (seed, label).
SimulatedLogs simulate_logs(const World& world, const Scorer& scorer, int k, std::uint64_t seed,
                            std::string_view label = "production");

}  // namespace funnelkit
