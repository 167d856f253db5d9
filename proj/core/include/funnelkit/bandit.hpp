#pragma once

// Bernoulli multi-armed bandits: Thompson sampling with Beta posteriors and
// epsilon-greedy for comparison, run against either fixed-rate arms or
// scorers served in the simulated world.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/criteria.hpp"
#include "funnelkit/rng.hpp"

namespace funnelkit {

class World;

struct ArmState {
  double alpha = 1.0;
  double beta = 1.0;
  std::size_t pulls = 0;
  std::size_t successes = 0;
};

struct BanditState {
  std::vector<ArmState> arms;
  std::size_t round = 0;

  static BanditState fresh(std::size_t n_arms, double prior_alpha = 1.0, double prior_beta = 1.0);
};

// Draws theta_i ~ Beta(alpha_i, beta_i) and returns the argmax, lowest index
// on ties. Throws Error when there are no arms.
std::size_t thompson_select(const BanditState& state, RngStream& rng);

// With probability epsilon a uniform arm, else the highest posterior mean.
std::size_t epsilon_greedy_select(const BanditState& state, double epsilon, RngStream& rng);

// Conjugate Beta update. Throws Error on an invalid arm.
BanditState bandit_update(BanditState state, std::size_t arm, bool reward);
void bandit_update_in_place(BanditState& state, std::size_t arm, bool reward);

// Source of rewards. pull() must depend only on (arm, round, rng).
class ArmEnvironment {
 public:
  virtual ~ArmEnvironment() = default;
  virtual std::size_t n_arms() const = 0;
  virtual bool pull(std::size_t arm, RngStream& rng) const = 0;
  virtual double true_rate(std::size_t arm) const = 0;
};

class BernoulliArms final : public ArmEnvironment {
 public:
  explicit BernoulliArms(std::vector<double> rates);
  std::size_t n_arms() const override { return rates_.size(); }
  bool pull(std::size_t arm, RngStream& rng) const override;
  double true_rate(std::size_t arm) const override { return rates_.at(arm); }

 private:
  std::vector<double> rates_;
};

// Each pull serves a uniformly drawn world query with the arm's scorer and
// samples one click-model session; the reward is session success. True
// rates come from true_success_rate.
class WorldArms final : public ArmEnvironment {
 public:
  WorldArms(const World& world, std::span<const Scorer> arms, int k);
  std::size_t n_arms() const override { return grades_.size(); }
  bool pull(std::size_t arm, RngStream& rng) const override;
  double true_rate(std::size_t arm) const override { return rates_.at(arm); }

 private:
  const World& world_;
  std::vector<std::vector<std::vector<std::uint8_t>>> grades_;  // arm -> query -> grades
  std::vector<double> rates_;
};

enum class BanditStrategy { thompson, epsilon_greedy };
std::string_view to_string(BanditStrategy s);
std::optional<BanditStrategy> parse_bandit_strategy(std::string_view s);

struct BanditConfig {
  BanditStrategy strategy = BanditStrategy::thompson;
  double epsilon = 0.1;
  double prior_alpha = 1.0;
  double prior_beta = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
  std::size_t snapshot_every = 100;  // state history cadence; final state always kept
};

struct BanditRun {
  std::vector<std::uint32_t> choices;
  std::vector<std::uint8_t> rewards;
  std::vector<double> cumulative_regret;  // pseudo-regret against the best true rate
  std::vector<BanditState> history;
  BanditState final_state;
  std::vector<double> true_rates;
  std::size_t best_arm = 0;
};

// Throws Error if horizon < 1 or the environment has no arms.
BanditRun run_bandit(const ArmEnvironment& env, std::size_t horizon, const BanditConfig& config);
BanditRun run_bandit(const World& world, std::span<const Scorer> arms, int k, std::size_t horizon,
                     const BanditConfig& config);

// Share of pulls going to `arm` among rounds [begin, end).
double pull_share(const BanditRun& run, std::size_t arm, std::size_t begin, std::size_t end);

// cumulative_regret, regret_per_round, mean_reward, and per arm name
// pull_share.<name>, last_quartile_share.<name>, posterior_mean.<name>.
StatMap bandit_statistics(const BanditRun& run, std::span<const std::string> arm_names);
bool is_bandit_statistic(std::string_view stat, std::span<const std::string> arm_names);

nlohmann::ordered_json to_json(const BanditRun& run, std::span<const std::string> arm_names);
// round,arm,reward,cumulative_regret
std::string bandit_trajectory_csv(const BanditRun& run);

}  // namespace funnelkit
