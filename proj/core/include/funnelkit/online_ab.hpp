#pragma once

// Online A/B engine: hash-based assignment, fixed-horizon Welch analysis,
// CUPED regression adjustment, always-valid confidence sequences for
// guardrail monitoring, and exposure filtering from reconstructed pairs.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/criteria.hpp"
#include "funnelkit/stats.hpp"

namespace funnelkit {

class World;

// ---------------------------------------------------------------------------
// Assignment
//
// slot = stable_hash64(unit_id + ":" + salt) % 1'000'000; the slot range is
// split into consecutive arms by cumulative ratio.

inline constexpr std::uint64_t kAssignmentSlots = 1'000'000;

struct Assignment {
  std::string unit_id;
  std::string salt;
  int arm = 0;
};

std::uint64_t assignment_slot(std::string_view unit_id, std::string_view salt);

// Empty `ratios` means an equal split. Throws Error if n_arms < 2, the ratio
// count differs from n_arms, any ratio is negative or they do not sum to 1.
int assign(std::string_view unit_id, std::string_view salt, int n_arms, std::span<const double> ratios = {});

// ---------------------------------------------------------------------------
// Fixed-horizon analysis

struct WelchResult {
  double estimate = 0.0;  // mean_b - mean_a
  double std_error = 0.0;
  double dof = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite dof and a
// (1 - alpha) confidence interval. Throws Error if either sample has n < 2.
WelchResult welch_t(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

struct CupedResult {
  std::vector<double> adjusted;
  double theta = 0.0;
  bool warning = false;  // covariate had zero variance; outcomes returned unadjusted
};

// y' = y - theta * (x - mean(x)), theta = cov(x, y) / var(x), computed over
// all units passed in (pool both arms). Throws Error on length mismatch.
CupedResult cuped_adjust(std::span<const double> y, std::span<const double> x);

// ---------------------------------------------------------------------------
// Sequential monitoring

struct SequentialPoint {
  std::size_t t = 0;
  double estimate = 0.0;
  double cs_low = 0.0;
  double cs_high = 0.0;
  bool crossed = false;
};

// Normal-mixture always-valid confidence sequence for the mean of a stream.
// With V_t the running sum of squared deviations, the radius at time t is
//   sqrt((V_t + rho) * ln((V_t + rho) / (rho * alpha^2))) / t.
// `crossed` latches once 0 leaves the interval at some t >= min_t.
class ConfidenceSequence {
 public:
  ConfidenceSequence(double alpha, double rho_mix, std::size_t min_t = 1);

  SequentialPoint push(double x);
  const SequentialPoint& current() const { return current_; }
  bool crossed() const { return current_.crossed; }

 private:
  double alpha_;
  double rho_;
  std::size_t min_t_;
  RunningStats stats_;
  SequentialPoint current_;
};

// Throws Error unless alpha in (0, 1) and rho_mix > 0.
std::vector<SequentialPoint> sequential_cs(std::span<const double> diffs, double alpha, double rho_mix,
                                           std::size_t min_t = 1);

// rho_mix that makes the boundary tightest around `fraction` of the horizon,
// i.e. the intrinsic time expected there for per-step variance `variance`.
double default_rho_mix(std::size_t horizon, double variance, double fraction = 0.1);

// ---------------------------------------------------------------------------
// Exposure filtering

enum class ExposureLevel { none, query_level, user_level };

std::string_view to_string(ExposureLevel level);
std::optional<ExposureLevel> parse_exposure_level(std::string_view s);

struct QueryObservation {
  std::string query_id;
  std::string user_id;
  int arm = 0;  // 0 = control, 1 = treatment
  double outcome = 0.0;
};

struct ExposureFilterResult {
  ExposureLevel level = ExposureLevel::none;
  std::vector<std::size_t> kept;  // indices into the observations
  double exposure_rate = 0.0;     // exposed queries (query/none) or users (user) over total
  std::size_t n_queries = 0;
  std::size_t n_exposed_queries = 0;
  std::size_t n_users = 0;
  std::size_t n_exposed_users = 0;
};

// query_level keeps observations whose query's pair differs; user_level
// keeps every observation of a user with at least one differing query;
// none keeps everything. Throws Error if an observation's query has no pair.
ExposureFilterResult exposure_filter(std::span<const QueryObservation> observations,
                                     std::span<const ReconstructedPair> pairs, ExposureLevel level);

// Welch comparison of kept observations: per query for query_level,
// per-user means otherwise.
WelchResult analyze_filtered(std::span<const QueryObservation> observations, const ExposureFilterResult& filter,
                             double alpha = 0.05);

// ---------------------------------------------------------------------------
// Simulated A/B test

inline constexpr const char* kMetricSuccessRate = "success_rate";
inline constexpr const char* kMetricClickRate = "click_rate";
inline constexpr const char* kMetricReciprocalRank = "reciprocal_rank";
inline constexpr const char* kMetricAbandonmentRate = "abandonment_rate";

bool is_known_metric(std::string_view name);

enum class AnalysisMethod { fixed_welch, cuped_welch };
std::string_view to_string(AnalysisMethod m);

struct AbTestConfig {
  std::size_t n_users = 0;  // 0 = every world user
  std::vector<std::string> metrics{kMetricSuccessRate};
  ExposureLevel filter = ExposureLevel::none;
  std::optional<std::string> cuped_covariate;  // "pre_success_rate"
  double alpha = 0.05;
  double treatment_share = 0.5;
  std::optional<double> rho_mix;  // default: default_rho_mix(expected pairs, 0.5)
  std::size_t min_units = 0;      // guardrails cannot abort before this many pairs
  std::string salt = "abtest";
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
  int k = 10;
  std::vector<Criterion> criteria;  // guardrails monitored sequentially; others at the end
};

struct MetricResult {
  std::string metric;
  AnalysisMethod method = AnalysisMethod::fixed_welch;
  WelchResult unadjusted;
  std::optional<WelchResult> adjusted;
  double theta = 0.0;
  bool cuped_warning = false;

  const WelchResult& primary() const { return adjusted ? *adjusted : unadjusted; }
};

struct SequentialTrajectory {
  std::string metric;
  std::vector<SequentialPoint> points;
};

struct ExperimentResult {
  std::vector<MetricResult> metrics;
  ExposureLevel exposure_filter = ExposureLevel::none;
  double exposure_rate = 0.0;
  std::size_t n_control = 0;    // analysed units
  std::size_t n_treatment = 0;
  std::size_t users_enrolled = 0;
  std::vector<SequentialTrajectory> trajectories;
  bool aborted = false;
  std::size_t abort_t = 0;  // pair index at which a guardrail failed
  std::string abort_criterion;
  std::vector<GateOutcome> gates;
  std::vector<std::string> notes;

  const MetricResult* metric(std::string_view name) const;
};

// Serves both scorers once over the world and reuses the lists for every
// replication.
class AbTestSimulator {
 public:
  AbTestSimulator(const World& world, const Scorer& control, const Scorer& treatment, int k);
  // Reuses the control lists of `base` and serves only `treatment`.
  AbTestSimulator(const AbTestSimulator& base, const Scorer& treatment);

  ExperimentResult run(const AbTestConfig& config) const;

  // Queries whose two lists differ.
  const std::vector<char>& exposed() const { return exposed_; }
  const World& world() const { return world_; }

 private:
  const World& world_;
  int k_;
  struct ServedArm {
    std::vector<std::vector<std::uint16_t>> positions;
    std::vector<std::vector<std::uint8_t>> grades;
  };
  std::shared_ptr<const ServedArm> control_;
  std::vector<std::vector<std::uint8_t>> grades_treatment_;
  std::vector<char> exposed_;
};

ExperimentResult run_abtest(const World& world, const Scorer& control, const Scorer& treatment,
                            const AbTestConfig& config);

StatMap experiment_statistics(const ExperimentResult& result);
bool is_abtest_statistic(std::string_view stat, std::span<const std::string> metrics);

nlohmann::ordered_json to_json(const WelchResult& r);
nlohmann::ordered_json to_json(const ExperimentResult& r);
std::string trajectory_csv(const ExperimentResult& r);

}  // namespace funnelkit
