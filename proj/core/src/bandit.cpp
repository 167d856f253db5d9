#include "funnelkit/bandit.hpp"

#include <algorithm>
#include <sstream>

#include "funnelkit/error.hpp"
#include "funnelkit/simworld.hpp"

namespace funnelkit {

BanditState BanditState::fresh(std::size_t n_arms, double prior_alpha, double prior_beta) {
  if (!(prior_alpha > 0.0 && prior_beta > 0.0)) throw Error("bandit: prior parameters must be > 0");
  BanditState s;
  s.arms.assign(n_arms, ArmState{prior_alpha, prior_beta, 0, 0});
  return s;
}

std::size_t thompson_select(const BanditState& state, RngStream& rng) {
  if (state.arms.empty()) throw Error("thompson_select: no arms");
  std::size_t best = 0;
  double best_draw = -1.0;
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    const double draw = rng.beta(state.arms[i].alpha, state.arms[i].beta);
    if (draw > best_draw) {
      best_draw = draw;
      best = i;
    }
  }
  return best;
}

std::size_t epsilon_greedy_select(const BanditState& state, double epsilon, RngStream& rng) {
  if (state.arms.empty()) throw Error("epsilon_greedy_select: no arms");
  if (rng.uniform() < epsilon) return static_cast<std::size_t>(rng.below(state.arms.size()));
  std::size_t best = 0;
  double best_mean = -1.0;
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    const double m = state.arms[i].alpha / (state.arms[i].alpha + state.arms[i].beta);
    if (m > best_mean) {
      best_mean = m;
      best = i;
    }
  }
  return best;
}

void bandit_update_in_place(BanditState& state, std::size_t arm, bool reward) {
  if (arm >= state.arms.size()) {
    throw Error("bandit_update: arm " + std::to_string(arm) + " out of range for " +
                std::to_string(state.arms.size()) + " arms");
  }
  auto& a = state.arms[arm];
  ++a.pulls;
  if (reward) {
    ++a.successes;
    a.alpha += 1.0;
  } else {
    a.beta += 1.0;
  }
  ++state.round;
}

BanditState bandit_update(BanditState state, std::size_t arm, bool reward) {
  bandit_update_in_place(state, arm, reward);
  return state;
}

BernoulliArms::BernoulliArms(std::vector<double> rates) : rates_(std::move(rates)) {
  for (double r : rates_) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error("BernoulliArms: rates must lie in [0, 1]");
  }
}

bool BernoulliArms::pull(std::size_t arm, RngStream& rng) const { return rng.bernoulli(rates_.at(arm)); }

WorldArms::WorldArms(const World& world, std::span<const Scorer> arms, int k) : world_(world) {
  if (world.queries().empty()) throw Error("WorldArms: world has no queries");
  for (const auto& s : arms) {
    grades_.push_back(served_grades(world, s, k));
    rates_.push_back(true_success_rate(world, s, k));
  }
}

bool WorldArms::pull(std::size_t arm, RngStream& rng) const {
  const auto& per_query = grades_.at(arm);
  const auto q = static_cast<std::size_t>(rng.below(per_query.size()));
  return simulate_session(per_query[q], world_.click_model(), rng).success;
}

std::string_view to_string(BanditStrategy s) {
  return s == BanditStrategy::thompson ? "thompson" : "epsilon_greedy";
}

std::optional<BanditStrategy> parse_bandit_strategy(std::string_view s) {
  if (s == "thompson") return BanditStrategy::thompson;
  if (s == "epsilon_greedy") return BanditStrategy::epsilon_greedy;
  return std::nullopt;
}

BanditRun run_bandit(const ArmEnvironment& env, std::size_t horizon, const BanditConfig& cfg) {
  if (horizon < 1) throw Error("run_bandit: horizon must be >= 1");
  const std::size_t n_arms = env.n_arms();
  if (n_arms == 0) throw Error("run_bandit: no arms");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw Error("run_bandit: epsilon must lie in [0, 1]");

  BanditRun run;
  for (std::size_t a = 0; a < n_arms; ++a) run.true_rates.push_back(env.true_rate(a));
  run.best_arm = static_cast<std::size_t>(std::max_element(run.true_rates.begin(), run.true_rates.end()) -
                                          run.true_rates.begin());
  const double best_rate = run.true_rates[run.best_arm];

  BanditState state = BanditState::fresh(n_arms, cfg.prior_alpha, cfg.prior_beta);
  const RngStream rep = RngStream(cfg.seed, "bandit").child(cfg.replication);
  const RngStream select_rng = rep.child("select");
  const RngStream reward_rng = rep.child("reward");
  run.choices.reserve(horizon);
  run.rewards.reserve(horizon);
  run.cumulative_regret.reserve(horizon);
  double regret = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    RngStream s = select_rng.child(t);
    const std::size_t arm = cfg.strategy == BanditStrategy::thompson ? thompson_select(state, s)
                                                                     : epsilon_greedy_select(state, cfg.epsilon, s);
    RngStream r = reward_rng.child(t);
    const bool reward = env.pull(arm, r);
    bandit_update_in_place(state, arm, reward);
    regret += best_rate - run.true_rates[arm];
    run.choices.push_back(static_cast<std::uint32_t>(arm));
    run.rewards.push_back(reward ? 1 : 0);
    run.cumulative_regret.push_back(regret);
    if (cfg.snapshot_every > 0 && (t + 1) % cfg.snapshot_every == 0) run.history.push_back(state);
  }
  run.final_state = state;
  return run;
}

BanditRun run_bandit(const World& world, std::span<const Scorer> arms, int k, std::size_t horizon,
                     const BanditConfig& config) {
  return run_bandit(WorldArms(world, arms, k), horizon, config);
}

double pull_share(const BanditRun& run, std::size_t arm, std::size_t begin, std::size_t end) {
  end = std::min(end, run.choices.size());
  if (begin >= end) return 0.0;
  const auto n = std::count(run.choices.begin() + static_cast<std::ptrdiff_t>(begin),
                            run.choices.begin() + static_cast<std::ptrdiff_t>(end), static_cast<std::uint32_t>(arm));
  return static_cast<double>(n) / static_cast<double>(end - begin);
}

StatMap bandit_statistics(const BanditRun& run, std::span<const std::string> arm_names) {
  if (arm_names.size() != run.true_rates.size()) throw Error("bandit_statistics: arm name count mismatch");
  StatMap s;
  const std::size_t horizon = run.choices.size();
  s["cumulative_regret"] = run.cumulative_regret.empty() ? 0.0 : run.cumulative_regret.back();
  s["regret_per_round"] = horizon == 0 ? 0.0 : s["cumulative_regret"] / static_cast<double>(horizon);
  double rewards = 0.0;
  for (auto r : run.rewards) rewards += r;
  s["mean_reward"] = horizon == 0 ? 0.0 : rewards / static_cast<double>(horizon);
  const std::size_t q3 = horizon - horizon / 4;
  for (std::size_t a = 0; a < arm_names.size(); ++a) {
    const auto& arm = run.final_state.arms[a];
    s["pull_share." + arm_names[a]] = pull_share(run, a, 0, horizon);
    s["last_quartile_share." + arm_names[a]] = pull_share(run, a, q3, horizon);
    s["posterior_mean." + arm_names[a]] = arm.alpha / (arm.alpha + arm.beta);
  }
  return s;
}

bool is_bandit_statistic(std::string_view stat, std::span<const std::string> arm_names) {
  if (stat == "cumulative_regret" || stat == "regret_per_round" || stat == "mean_reward") return true;
  for (std::string_view prefix : {"pull_share.", "last_quartile_share.", "posterior_mean."}) {
    if (stat.substr(0, prefix.size()) != prefix) continue;
    const auto name = stat.substr(prefix.size());
    return std::find(arm_names.begin(), arm_names.end(), name) != arm_names.end();
  }
  return false;
}

nlohmann::ordered_json to_json(const BanditRun& run, std::span<const std::string> arm_names) {
  if (arm_names.size() != run.true_rates.size()) throw Error("bandit: arm name count mismatch");
  nlohmann::ordered_json j;
  j["horizon"] = run.choices.size();
  j["best_arm"] = arm_names[run.best_arm];
  j["cumulative_regret"] = run.cumulative_regret.empty() ? 0.0 : run.cumulative_regret.back();
  j["arms"] = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < arm_names.size(); ++a) {
    const auto& s = run.final_state.arms[a];
    nlohmann::ordered_json aj;
    aj["name"] = arm_names[a];
    aj["true_rate"] = run.true_rates[a];
    aj["alpha"] = s.alpha;
    aj["beta"] = s.beta;
    aj["pulls"] = s.pulls;
    aj["successes"] = s.successes;
    j["arms"].push_back(std::move(aj));
  }
  return j;
}

std::string bandit_trajectory_csv(const BanditRun& run) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "round,arm,reward,cumulative_regret\n";
  for (std::size_t t = 0; t < run.choices.size(); ++t) {
    ss << t + 1 << ',' << run.choices[t] << ',' << static_cast<int>(run.rewards[t]) << ','
       << run.cumulative_regret[t] << '\n';
  }
  return ss.str();
}

}  // namespace funnelkit
