#include "funnelkit/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "funnelkit/error.hpp"
#include "funnelkit/parallel.hpp"

namespace funnelkit {
namespace {

std::string padded(const char* prefix, int index, int width) {
  std::string digits = std::to_string(index);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return std::string(prefix) + "-" + digits;
}

int digits(int n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid world config: " + what);
}

}  // namespace

void validate(const WorldConfig& c) {
  require(c.n_items >= 1, "n_items must be >= 1");
  require(c.n_users >= 1, "n_users must be >= 1");
  require(c.n_queries >= 1, "n_queries must be >= 1");
  require(c.feature_dim >= 1, "feature_dim must be >= 1");
  require(c.retrieval_depth >= 1, "retrieval_depth must be >= 1");
  require(c.retrieval_depth <= 65535, "retrieval_depth must be <= 65535");
  require(c.display_k >= 1, "display_k must be >= 1");
  require(c.examination_decay > 0.0 && c.examination_decay <= 1.0, "examination_decay must be in (0, 1]");
  require(c.relevance_click_prob >= 0.0 && c.relevance_click_prob <= 1.0, "relevance_click_prob must be in [0, 1]");
  require(c.nonrelevance_click_prob >= 0.0 && c.nonrelevance_click_prob <= 1.0,
          "nonrelevance_click_prob must be in [0, 1]");
  // Equal probabilities are accepted only in the degenerate all-zero case.
  require(c.nonrelevance_click_prob < c.relevance_click_prob ||
              (c.nonrelevance_click_prob == 0.0 && c.relevance_click_prob == 0.0),
          "nonrelevance_click_prob must be < relevance_click_prob");
  require(c.long_query_share >= 0.0 && c.long_query_share <= 1.0, "long_query_share must be in [0, 1]");
  require(c.podcast_share >= 0.0 && c.podcast_share <= 1.0, "podcast_share must be in [0, 1]");
  require(c.relevance_noise >= 0.0, "relevance_noise must be >= 0");
  require(c.user_scale_spread >= 0.0, "user_scale_spread must be >= 0");
}

SessionOutcome simulate_session(std::span<const std::uint8_t> grades, const ClickModel& model, RngStream& rng) {
  double exam = 1.0;
  for (std::size_t r = 0; r < grades.size(); ++r) {
    const double p_click = grades[r] > 0 ? model.p_rel : model.p_irr;
    if (p_click > 0.0 && rng.bernoulli(exam) && rng.bernoulli(p_click)) {
      return SessionOutcome{static_cast<int>(r + 1), grades[r] > 0};
    }
    exam *= model.examination_decay;
  }
  return {};
}

double session_success_probability(std::span<const std::uint8_t> grades, const ClickModel& model) {
  double no_click_yet = 1.0;
  double exam = 1.0;
  double success = 0.0;
  for (std::uint8_t g : grades) {
    const double p_click = exam * (g > 0 ? model.p_rel : model.p_irr);
    if (g > 0) success += no_click_yet * p_click;
    no_click_yet *= 1.0 - p_click;
    exam *= model.examination_decay;
  }
  return success;
}

double examination_free_success_probability(std::span<const std::uint8_t> grades, const ClickModel& model) {
  double miss = 1.0;
  for (std::uint8_t g : grades) {
    if (g > 0) miss *= 1.0 - model.p_rel;
  }
  return 1.0 - miss;
}

ClickModel World::click_model() const {
  return ClickModel{config_.examination_decay, config_.relevance_click_prob, config_.nonrelevance_click_prob};
}

std::optional<int> World::query_index(const std::string& query_id) const {
  auto it = index_.find(query_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void World::candidate_features(int query, std::size_t pos, std::span<double> out) const {
  const Query& q = queries_[static_cast<std::size_t>(query)];
  const Item& item = items_[q.candidates[pos]];
  const User& user = users_[static_cast<std::size_t>(q.user)];
  out[0] = item.popularity;
  for (std::size_t m = 1; m < out.size(); ++m) out[m] = user.preference[m - 1] * item.latent[m - 1];
}

ItemId World::item_at(int query, std::size_t pos) const {
  return items_[queries_[static_cast<std::size_t>(query)].candidates[pos]].id;
}

std::optional<std::size_t> World::position_of(int query, const ItemId& item) const {
  const Query& q = queries_[static_cast<std::size_t>(query)];
  for (std::size_t p = 0; p < q.candidates.size(); ++p) {
    if (items_[q.candidates[p]].id == item) return p;
  }
  return std::nullopt;
}

CounterfactualRecord World::logged_candidates(int query) const {
  const Query& q = queries_[static_cast<std::size_t>(query)];
  CounterfactualRecord rec;
  rec.context = q.context;
  rec.candidates.reserve(q.candidates.size());
  for (std::size_t p = 0; p < q.candidates.size(); ++p) {
    CandidateFeatures cf;
    cf.item = items_[q.candidates[p]].id;
    cf.features.resize(static_cast<std::size_t>(config_.feature_dim));
    candidate_features(query, p, cf.features);
    cf.attributes = items_[q.candidates[p]].attributes;
    rec.candidates.push_back(std::move(cf));
  }
  return rec;
}

std::vector<std::uint16_t> World::rank_positions(int query, const Scorer& scorer, int k) const {
  if (k < 1) throw Error("rank_positions: k must be >= 1");
  if (scorer.weights.size() != static_cast<std::size_t>(config_.feature_dim)) {
    throw Error("scorer '" + scorer.variant.name + "' has dimension " + std::to_string(scorer.weights.size()) +
                " but the world has feature_dim " + std::to_string(config_.feature_dim));
  }
  const Query& q = queries_[static_cast<std::size_t>(query)];
  const std::size_t n = q.candidates.size();
  std::vector<double> feats(static_cast<std::size_t>(config_.feature_dim));
  std::vector<double> scores(n);
  for (std::size_t p = 0; p < n; ++p) {
    candidate_features(query, p, feats);
    scores[p] = scorer.score(feats, items_[q.candidates[p]].attributes);
  }
  std::vector<std::uint16_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::uint16_t{0});
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  // Item ids are zero-padded indices, so index order equals id byte order.
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    [&](std::uint16_t x, std::uint16_t y) {
                      if (scores[x] != scores[y]) return scores[x] > scores[y];
                      return q.candidates[x] < q.candidates[y];
                    });
  idx.resize(take);
  return idx;
}

std::vector<std::uint8_t> World::grades_at(int query, std::span<const std::uint16_t> positions) const {
  const Query& q = queries_[static_cast<std::size_t>(query)];
  std::vector<std::uint8_t> g;
  g.reserve(positions.size());
  for (auto p : positions) g.push_back(q.grades[p]);
  return g;
}

World generate_world(const WorldConfig& config) {
  validate(config);
  World w;
  w.config_ = config;
  const std::size_t latent_dim = static_cast<std::size_t>(config.feature_dim - 1);
  RngStream root(config.seed, "world");

  RngStream item_rng = root.child("items");
  const int item_width = std::max(5, digits(config.n_items - 1));
  w.items_.resize(static_cast<std::size_t>(config.n_items));
  for (int i = 0; i < config.n_items; ++i) {
    RngStream r = item_rng.child(static_cast<std::uint64_t>(i));
    auto& item = w.items_[static_cast<std::size_t>(i)];
    item.id = ItemId(padded("item", i, item_width));
    item.popularity = r.normal();
    item.latent.resize(latent_dim);
    for (auto& v : item.latent) v = r.normal();
    item.attributes["kind"] = r.bernoulli(config.podcast_share) ? "podcast" : "music";
  }

  RngStream user_rng = root.child("users");
  const int user_width = std::max(5, digits(config.n_users - 1));
  w.users_.resize(static_cast<std::size_t>(config.n_users));
  for (int u = 0; u < config.n_users; ++u) {
    RngStream r = user_rng.child(static_cast<std::uint64_t>(u));
    auto& user = w.users_[static_cast<std::size_t>(u)];
    user.id = padded("user", u, user_width);
    const double scale = std::exp(config.user_scale_spread * r.normal());
    user.preference.resize(latent_dim);
    for (auto& v : user.preference) v = scale * r.normal();
  }

  std::vector<char> is_podcast(w.items_.size());
  for (std::size_t i = 0; i < w.items_.size(); ++i) is_podcast[i] = w.items_[i].attributes.at("kind") == "podcast";

  RngStream query_rng = root.child("queries");
  const int query_width = std::max(6, digits(config.n_queries - 1));
  const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(config.retrieval_depth),
                                                  static_cast<std::size_t>(config.n_items));
  w.queries_.resize(static_cast<std::size_t>(config.n_queries));
  w.by_user_.assign(static_cast<std::size_t>(config.n_users), {});
  parallel_for(static_cast<std::size_t>(config.n_queries), [&](std::size_t j) {
    RngStream r = query_rng.child(static_cast<std::uint64_t>(j));
    auto& q = w.queries_[j];
    q.user = static_cast<int>(j % static_cast<std::size_t>(config.n_users));
    q.context.query_id = padded("q", static_cast<int>(j), query_width);
    q.context.user_id = w.users_[static_cast<std::size_t>(q.user)].id;
    q.context.query_text = "query " + std::to_string(j);
    q.context.timestamp = 1'700'000'000'000LL + static_cast<std::int64_t>(j) * 1000;
    const bool is_long = r.bernoulli(config.long_query_share);
    q.context.attributes["length_class"] = is_long ? "long" : "short";

    // Retrieval: popularity plus query-specific noise; podcasts favored on
    // long queries.
    std::vector<double> base(static_cast<std::size_t>(config.n_items));
    for (std::size_t i = 0; i < base.size(); ++i) {
      base[i] = w.items_[i].popularity + r.normal();
      if (is_long && is_podcast[i]) base[i] += config.podcast_long_affinity;
    }
    std::vector<std::uint32_t> order(base.size());
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (base[a] != base[b]) return base[a] > base[b];
                        return a < b;
                      });
    order.resize(depth);
    q.candidates = std::move(order);

    const World::User& user = w.users_[static_cast<std::size_t>(q.user)];
    std::vector<double> utility(depth);
    for (std::size_t p = 0; p < depth; ++p) {
      const auto& item = w.items_[q.candidates[p]];
      double u = config.popularity_weight * item.popularity;
      for (std::size_t m = 0; m < latent_dim; ++m) u += user.preference[m] * item.latent[m];
      utility[p] = u + config.relevance_noise * r.normal();
    }
    q.grades.assign(depth, 0);
    if (config.relevance_mode == RelevanceMode::single_best) {
      const auto best = static_cast<std::size_t>(std::max_element(utility.begin(), utility.end()) - utility.begin());
      q.grades[best] = 1;
    } else {
      for (std::size_t p = 0; p < depth; ++p) {
        if (utility[p] > config.relevance_threshold + 1.5) {
          q.grades[p] = 2;
        } else if (utility[p] > config.relevance_threshold) {
          q.grades[p] = 1;
        }
      }
    }
  });
  w.index_.reserve(w.queries_.size());
  for (std::size_t j = 0; j < w.queries_.size(); ++j) {
    w.index_.emplace(w.queries_[j].context.query_id, static_cast<int>(j));
    w.by_user_[static_cast<std::size_t>(w.queries_[j].user)].push_back(static_cast<int>(j));
  }
  return w;
}

std::string serialize_world(const World& world) {
  std::ostringstream ss;
  ss.precision(17);
  for (const auto& item : world.items()) {
    ss << "item " << item.id.str() << ' ' << item.popularity;
    for (double v : item.latent) ss << ' ' << v;
    for (const auto& [k, v] : item.attributes) ss << ' ' << k << '=' << v;
    ss << '\n';
  }
  for (const auto& user : world.users()) {
    ss << "user " << user.id;
    for (double v : user.preference) ss << ' ' << v;
    ss << '\n';
  }
  for (const auto& q : world.queries()) {
    ss << "query " << q.context.query_id << ' ' << q.context.user_id << ' ' << q.context.timestamp;
    for (const auto& [k, v] : q.context.attributes) ss << ' ' << k << '=' << v;
    for (std::size_t p = 0; p < q.candidates.size(); ++p) {
      ss << ' ' << q.candidates[p] << ':' << static_cast<int>(q.grades[p]);
    }
    ss << '\n';
  }
  return ss.str();
}

CounterfactualRecord serve(const World& world, int query, const Scorer& scorer, int k) {
  if (query < 0 || static_cast<std::size_t>(query) >= world.queries().size()) {
    throw Error("serve: query index out of range");
  }
  CounterfactualRecord rec = world.logged_candidates(query);
  rec.served_variant = scorer.variant;
  rec.served_results = reconstruct(rec, scorer, k);
  return rec;
}

CounterfactualRecord serve(const World& world, const QueryContext& context, const Scorer& scorer, int k) {
  auto idx = world.query_index(context.query_id);
  if (!idx) throw Error("serve: unknown query '" + context.query_id + "'");
  return serve(world, *idx, scorer, k);
}

std::vector<Interaction> interact(const World& world, int query, const ResultList& shown, RngStream& rng) {
  const auto& q = world.queries()[static_cast<std::size_t>(query)];
  std::vector<std::uint8_t> grades;
  grades.reserve(shown.items.size());
  for (const auto& id : shown.items) {
    auto pos = world.position_of(query, id);
    grades.push_back(pos ? q.grades[*pos] : 0);
  }
  const SessionOutcome s = simulate_session(grades, world.click_model(), rng);
  std::vector<Interaction> out;
  if (s.clicked_rank > 0) {
    Interaction it;
    it.query_id = q.context.query_id;
    it.item = shown.items[static_cast<std::size_t>(s.clicked_rank - 1)];
    it.rank = s.clicked_rank;
    it.action = Action::click;
    it.success = s.success;
    out.push_back(std::move(it));
  }
  return out;
}

std::vector<Interaction> interact(const World& world, const CounterfactualRecord& record, RngStream& rng) {
  auto idx = world.query_index(record.context.query_id);
  if (!idx) throw Error("interact: unknown query '" + record.context.query_id + "'");
  return interact(world, *idx, record.served_results, rng);
}

std::vector<std::vector<std::uint8_t>> served_grades(const World& world, const Scorer& scorer, int k) {
  std::vector<std::vector<std::uint8_t>> out(world.queries().size());
  parallel_for(out.size(), [&](std::size_t j) {
    const int q = static_cast<int>(j);
    out[j] = world.grades_at(q, world.rank_positions(q, scorer, k));
  });
  return out;
}

double true_success_rate(const World& world, const Scorer& scorer, int k, std::span<const int> queries) {
  if (queries.empty()) throw Error("true_success_rate: no queries");
  if (static_cast<std::int64_t>(queries.size()) * k > world.config().max_enumeration) {
    throw Error("true_success_rate: enumeration bound exceeded (" + std::to_string(queries.size()) + " queries x k=" +
                std::to_string(k) + " > " + std::to_string(world.config().max_enumeration) + ")");
  }
  const ClickModel model = world.click_model();
  std::vector<double> p(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) {
    const int q = queries[i];
    p[i] = session_success_probability(world.grades_at(q, world.rank_positions(q, scorer, k)), model);
  });
  return std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
}

double true_success_rate(const World& world, const Scorer& scorer, int k) {
  std::vector<int> all(world.queries().size());
  std::iota(all.begin(), all.end(), 0);
  return true_success_rate(world, scorer, k, all);
}

double examination_free_success_rate(const World& world, std::span<const int> queries,
                                     std::span<const ResultList> lists, int k) {
  if (queries.size() != lists.size()) throw Error("examination_free_success_rate: size mismatch");
  if (queries.empty()) return 0.0;
  const ClickModel model = world.click_model();
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = world.queries()[static_cast<std::size_t>(queries[i])];
    std::vector<std::uint8_t> grades;
    for (std::size_t r = 0; r < lists[i].items.size() && r < static_cast<std::size_t>(k); ++r) {
      auto pos = world.position_of(queries[i], lists[i].items[r]);
      grades.push_back(pos ? q.grades[*pos] : 0);
    }
    total += examination_free_success_probability(grades, model);
  }
  return total / static_cast<double>(queries.size());
}

SimulatedLogs simulate_logs(const World& world, const Scorer& scorer, int k, std::uint64_t seed,
                            std::string_view label) {
  SimulatedLogs logs;
  const std::size_t n = world.queries().size();
  logs.records.resize(n);
  std::vector<std::vector<Interaction>> per_query(n);
  RngStream root(seed, label);
  parallel_for(n, [&](std::size_t j) {
    logs.records[j] = serve(world, static_cast<int>(j), scorer, k);
    RngStream r = root.child(static_cast<std::uint64_t>(j));
    per_query[j] = interact(world, static_cast<int>(j), logs.records[j].served_results, r);
  });
  for (auto& v : per_query) {
    for (auto& it : v) logs.interactions.push_back(std::move(it));
  }
  return logs;
}

}  // namespace funnelkit
