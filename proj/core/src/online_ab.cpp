#include "funnelkit/online_ab.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "funnelkit/error.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/simworld.hpp"

namespace funnelkit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

WelchResult undefined_welch(std::size_t n_a, std::size_t n_b) {
  WelchResult r;
  r.estimate = r.std_error = r.dof = r.t_stat = r.p_value = r.ci_low = r.ci_high = kNaN;
  r.n_a = n_a;
  r.n_b = n_b;
  return r;
}

WelchResult welch_or_undefined(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) return undefined_welch(a.size(), b.size());
  return welch_t(a, b, alpha);
}

// Keeps observations according to per-observation exposure flags.
ExposureFilterResult filter_by_flags(std::span<const QueryObservation> obs, std::span<const char> exposed,
                                     ExposureLevel level) {
  ExposureFilterResult r;
  r.level = level;
  std::unordered_map<std::string_view, bool> user_exposed;
  std::unordered_map<std::string_view, bool> query_seen;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto [qit, q_new] = query_seen.emplace(obs[i].query_id, exposed[i] != 0);
    if (q_new) {
      ++r.n_queries;
      if (exposed[i]) ++r.n_exposed_queries;
    }
    auto [it, inserted] = user_exposed.emplace(obs[i].user_id, false);
    it->second = it->second || exposed[i] != 0;
  }
  r.n_users = user_exposed.size();
  for (const auto& [_, e] : user_exposed) r.n_exposed_users += e ? 1 : 0;

  for (std::size_t i = 0; i < obs.size(); ++i) {
    bool keep = true;
    if (level == ExposureLevel::query_level) keep = exposed[i] != 0;
    if (level == ExposureLevel::user_level) keep = user_exposed.at(obs[i].user_id);
    if (keep) r.kept.push_back(i);
  }
  if (level == ExposureLevel::user_level) {
    r.exposure_rate = r.n_users == 0 ? 0.0 : static_cast<double>(r.n_exposed_users) / static_cast<double>(r.n_users);
  } else {
    r.exposure_rate =
        r.n_queries == 0 ? 0.0 : static_cast<double>(r.n_exposed_queries) / static_cast<double>(r.n_queries);
  }
  return r;
}

// Analysis units (per query or per user) with outcome and optional covariate.
struct Units {
  std::vector<double> y[2];
  std::vector<double> x[2];
};

Units build_units(std::span<const QueryObservation> obs, const ExposureFilterResult& filter,
                  std::span<const double> covariate) {
  Units u;
  const bool with_x = !covariate.empty();
  if (filter.level == ExposureLevel::query_level) {
    for (std::size_t i : filter.kept) {
      const int arm = obs[i].arm == 0 ? 0 : 1;
      u.y[arm].push_back(obs[i].outcome);
      if (with_x) u.x[arm].push_back(covariate[i]);
    }
    return u;
  }
  // Per-user means in first-appearance order.
  struct Acc {
    int arm;
    double sum;
    std::size_t n;
    double x;
  };
  std::vector<Acc> accs;
  std::unordered_map<std::string_view, std::size_t> slot;
  for (std::size_t i : filter.kept) {
    auto [it, inserted] = slot.emplace(obs[i].user_id, accs.size());
    if (inserted) accs.push_back(Acc{obs[i].arm == 0 ? 0 : 1, 0.0, 0, with_x ? covariate[i] : 0.0});
    accs[it->second].sum += obs[i].outcome;
    ++accs[it->second].n;
  }
  for (const auto& a : accs) {
    u.y[a.arm].push_back(a.sum / static_cast<double>(a.n));
    if (with_x) u.x[a.arm].push_back(a.x);
  }
  return u;
}

std::string metric_of_seq_stat(const std::string& stat) {
  const auto pos = stat.find(".seq.");
  return pos == std::string::npos ? std::string() : stat.substr(0, pos);
}

nlohmann::ordered_json num(double v) { return json_number(v); }

}  // namespace

// ---------------------------------------------------------------------------

std::uint64_t assignment_slot(std::string_view unit_id, std::string_view salt) {
  std::string key;
  key.reserve(unit_id.size() + salt.size() + 1);
  key.append(unit_id);
  key.push_back(':');
  key.append(salt);
  return stable_hash64(key) % kAssignmentSlots;
}

int assign(std::string_view unit_id, std::string_view salt, int n_arms, std::span<const double> ratios) {
  if (n_arms < 2) throw Error("assign: n_arms must be >= 2");
  if (!ratios.empty()) {
    if (ratios.size() != static_cast<std::size_t>(n_arms)) throw Error("assign: ratio count differs from n_arms");
    double total = 0.0;
    for (double r : ratios) {
      if (!(r >= 0.0)) throw Error("assign: ratios must be non-negative");
      total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("assign: ratios must sum to 1");
  }
  const double u = static_cast<double>(assignment_slot(unit_id, salt)) / static_cast<double>(kAssignmentSlots);
  double cumulative = 0.0;
  for (int arm = 0; arm < n_arms - 1; ++arm) {
    cumulative += ratios.empty() ? 1.0 / n_arms : ratios[static_cast<std::size_t>(arm)];
    if (u < cumulative) return arm;
  }
  return n_arms - 1;
}

WelchResult welch_t(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) throw Error("welch_t: each sample needs at least 2 observations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("welch_t: alpha must be in (0, 1)");
  WelchResult r;
  r.n_a = a.size();
  r.n_b = b.size();
  const double ma = mean(a);
  const double mb = mean(b);
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  r.estimate = mb - ma;
  r.std_error = std::sqrt(va + vb);
  if (r.std_error == 0.0) {
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.t_stat = r.estimate == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.estimate);
    r.p_value = r.estimate == 0.0 ? 1.0 : 0.0;
    r.ci_low = r.ci_high = r.estimate;
    return r;
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  r.dof = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.t_stat = r.estimate / r.std_error;
  boost::math::students_t dist(r.dof);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_stat)));
  const double q = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
  r.ci_low = r.estimate - q * r.std_error;
  r.ci_high = r.estimate + q * r.std_error;
  return r;
}

CupedResult cuped_adjust(std::span<const double> y, std::span<const double> x) {
  if (x.size() != y.size()) throw Error("cuped_adjust: x and y differ in length");
  CupedResult r;
  r.adjusted.assign(y.begin(), y.end());
  const double vx = sample_variance(x);
  if (!(vx > 0.0)) {
    r.warning = true;
    return r;
  }
  r.theta = sample_covariance(x, y) / vx;
  const double mx = mean(x);
  for (std::size_t i = 0; i < y.size(); ++i) r.adjusted[i] = y[i] - r.theta * (x[i] - mx);
  return r;
}

// ---------------------------------------------------------------------------

ConfidenceSequence::ConfidenceSequence(double alpha, double rho_mix, std::size_t min_t)
    : alpha_(alpha), rho_(rho_mix), min_t_(std::max<std::size_t>(1, min_t)) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("sequential_cs: alpha must be in (0, 1)");
  if (!(rho_mix > 0.0)) throw Error("sequential_cs: rho_mix must be > 0");
}

SequentialPoint ConfidenceSequence::push(double x) {
  stats_.push(x);
  const double t = static_cast<double>(stats_.count());
  const double v = stats_.sum_sq() + rho_;
  const double radius = std::sqrt(v * std::log(v / (rho_ * alpha_ * alpha_))) / t;
  const bool was_crossed = current_.crossed;
  current_.t = stats_.count();
  current_.estimate = stats_.mean();
  current_.cs_low = current_.estimate - radius;
  current_.cs_high = current_.estimate + radius;
  current_.crossed = was_crossed || (current_.t >= min_t_ && (current_.cs_low > 0.0 || current_.cs_high < 0.0));
  return current_;
}

std::vector<SequentialPoint> sequential_cs(std::span<const double> diffs, double alpha, double rho_mix,
                                           std::size_t min_t) {
  ConfidenceSequence cs(alpha, rho_mix, min_t);
  std::vector<SequentialPoint> out;
  out.reserve(diffs.size());
  for (double d : diffs) out.push_back(cs.push(d));
  return out;
}

double default_rho_mix(std::size_t horizon, double variance, double fraction) {
  return std::max(1e-9, fraction * static_cast<double>(horizon) * variance);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ExposureLevel level) {
  switch (level) {
    case ExposureLevel::none:
      return "none";
    case ExposureLevel::query_level:
      return "query_level";
    case ExposureLevel::user_level:
      return "user_level";
  }
  return "none";
}

std::optional<ExposureLevel> parse_exposure_level(std::string_view s) {
  if (s == "none") return ExposureLevel::none;
  if (s == "query_level") return ExposureLevel::query_level;
  if (s == "user_level") return ExposureLevel::user_level;
  return std::nullopt;
}

ExposureFilterResult exposure_filter(std::span<const QueryObservation> observations,
                                     std::span<const ReconstructedPair> pairs, ExposureLevel level) {
  std::unordered_map<std::string_view, bool> differs;
  differs.reserve(pairs.size());
  for (const auto& p : pairs) differs[p.query_id] = p.a.items != p.b.items;
  std::vector<char> flags(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    auto it = differs.find(observations[i].query_id);
    if (it == differs.end()) {
      throw Error("exposure_filter: no reconstruction pair for query '" + observations[i].query_id + "'");
    }
    flags[i] = it->second ? 1 : 0;
  }
  return filter_by_flags(observations, flags, level);
}

WelchResult analyze_filtered(std::span<const QueryObservation> observations, const ExposureFilterResult& filter,
                             double alpha) {
  const Units u = build_units(observations, filter, {});
  return welch_or_undefined(u.y[0], u.y[1], alpha);
}

// ---------------------------------------------------------------------------

bool is_known_metric(std::string_view name) {
  return name == kMetricSuccessRate || name == kMetricClickRate || name == kMetricReciprocalRank ||
         name == kMetricAbandonmentRate;
}

std::string_view to_string(AnalysisMethod m) {
  return m == AnalysisMethod::cuped_welch ? "cuped_welch" : "fixed_welch";
}

const MetricResult* ExperimentResult::metric(std::string_view name) const {
  for (const auto& m : metrics) {
    if (m.metric == name) return &m;
  }
  return nullptr;
}

AbTestSimulator::AbTestSimulator(const World& world, const Scorer& control, const Scorer& treatment, int k)
    : world_(world), k_(k) {
  const std::size_t n = world.queries().size();
  auto served = std::make_shared<ServedArm>();
  served->positions.resize(n);
  served->grades.resize(n);
  grades_treatment_.resize(n);
  exposed_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int q = static_cast<int>(j);
    served->positions[j] = world.rank_positions(q, control, k);
    const auto pt = world.rank_positions(q, treatment, k);
    exposed_[j] = served->positions[j] != pt ? 1 : 0;
    served->grades[j] = world.grades_at(q, served->positions[j]);
    grades_treatment_[j] = world.grades_at(q, pt);
  }
  control_ = std::move(served);
}

AbTestSimulator::AbTestSimulator(const AbTestSimulator& base, const Scorer& treatment)
    : world_(base.world_),
      k_(base.k_),
      control_(base.control_) {
  const std::size_t n = world_.queries().size();
  grades_treatment_.resize(n);
  exposed_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int q = static_cast<int>(j);
    const auto pt = world_.rank_positions(q, treatment, k_);
    exposed_[j] = control_->positions[j] != pt ? 1 : 0;
    grades_treatment_[j] = world_.grades_at(q, pt);
  }
}

namespace {

double metric_value(std::string_view metric, const SessionOutcome& s) {
  if (metric == kMetricSuccessRate) return s.success ? 1.0 : 0.0;
  if (metric == kMetricClickRate) return s.clicked_rank > 0 ? 1.0 : 0.0;
  if (metric == kMetricAbandonmentRate) return s.clicked_rank > 0 ? 0.0 : 1.0;
  if (metric == kMetricReciprocalRank) return s.success ? 1.0 / s.clicked_rank : 0.0;
  throw Error("unknown metric '" + std::string(metric) + "'");
}

}  // namespace

ExperimentResult AbTestSimulator::run(const AbTestConfig& cfg) const {
  for (const auto& m : cfg.metrics) {
    if (!is_known_metric(m)) throw Error("run_abtest: unknown metric '" + m + "'");
  }
  if (cfg.metrics.empty()) throw Error("run_abtest: no metrics requested");
  if (!(cfg.treatment_share > 0.0 && cfg.treatment_share < 1.0)) {
    throw Error("run_abtest: treatment_share must be in (0, 1)");
  }
  if (cfg.cuped_covariate && *cfg.cuped_covariate != "pre_success_rate") {
    throw Error("run_abtest: unsupported cuped_covariate '" + *cfg.cuped_covariate + "'");
  }
  const std::size_t total_users = world_.users().size();
  const std::size_t n_users = cfg.n_users == 0 ? total_users : cfg.n_users;
  if (n_users > total_users) {
    throw Error("run_abtest: n_users " + std::to_string(n_users) + " exceeds world users " +
                std::to_string(total_users));
  }

  const RngStream rep = RngStream(cfg.seed, "abtest").child(cfg.replication);
  std::vector<int> arrival(total_users);
  std::iota(arrival.begin(), arrival.end(), 0);
  {
    RngStream shuffle = rep.child("arrival");
    for (std::size_t i = total_users; i > 1; --i) {
      std::swap(arrival[i - 1], arrival[shuffle.below(i)]);
    }
  }
  arrival.resize(n_users);

  const std::string salt = cfg.salt + ":" + std::to_string(cfg.replication);
  const double ratios[2] = {1.0 - cfg.treatment_share, cfg.treatment_share};
  const ClickModel model = world_.click_model();
  const RngStream post_rng = rep.child("post");
  const RngStream pre_rng = rep.child("pre");
  const bool with_cuped = cfg.cuped_covariate.has_value();

  // Metrics monitored sequentially: success_rate plus any guardrail metric.
  std::vector<std::string> monitored{kMetricSuccessRate};
  std::vector<const Criterion*> seq_guardrails;
  for (const auto& c : cfg.criteria) {
    const std::string m = metric_of_seq_stat(c.stat);
    if (m.empty()) continue;
    if (!is_known_metric(m)) throw Error("run_abtest: criterion '" + c.id + "' monitors unknown metric '" + m + "'");
    if (c.kind == CriterionKind::guardrail) seq_guardrails.push_back(&c);
    if (std::find(monitored.begin(), monitored.end(), m) == monitored.end()) monitored.push_back(m);
  }
  const std::size_t expected_pairs = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(n_users) * std::min(cfg.treatment_share, 1.0 - cfg.treatment_share)));
  const double rho = cfg.rho_mix.value_or(default_rho_mix(expected_pairs, 0.5));
  std::vector<ConfidenceSequence> cs;
  for (std::size_t m = 0; m < monitored.size(); ++m) cs.emplace_back(cfg.alpha, rho, std::max<std::size_t>(1, cfg.min_units));

  ExperimentResult result;
  result.exposure_filter = cfg.filter;
  result.trajectories.resize(monitored.size());
  for (std::size_t m = 0; m < monitored.size(); ++m) result.trajectories[m].metric = monitored[m];

  // Per-query observations for every requested metric.
  std::vector<QueryObservation> obs;
  std::vector<std::vector<double>> outcomes(cfg.metrics.size());
  std::vector<char> obs_exposed;
  std::vector<double> obs_covariate;

  std::deque<std::vector<double>> pending[2];  // per-user monitored-metric means awaiting a pair
  std::vector<double> user_monitored(monitored.size());

  for (std::size_t a = 0; a < arrival.size(); ++a) {
    const int u = arrival[a];
    const auto& user = world_.users()[static_cast<std::size_t>(u)];
    const int arm = assign(user.id, salt, 2, ratios);
    const auto& queries = world_.queries_of_user(u);
    if (queries.empty()) continue;

    double pre_rate = 0.0;
    if (with_cuped) {
      for (int q : queries) {
        RngStream r = pre_rng.child(static_cast<std::uint64_t>(q));
        pre_rate += simulate_session(control_->grades[static_cast<std::size_t>(q)], model, r).success ? 1.0 : 0.0;
      }
      pre_rate /= static_cast<double>(queries.size());
    }

    std::fill(user_monitored.begin(), user_monitored.end(), 0.0);
    for (int q : queries) {
      const auto& grades = arm == 0 ? control_->grades[static_cast<std::size_t>(q)]
                                    : grades_treatment_[static_cast<std::size_t>(q)];
      RngStream r = post_rng.child(static_cast<std::uint64_t>(q));
      const SessionOutcome s = simulate_session(grades, model, r);
      QueryObservation o;
      o.query_id = world_.queries()[static_cast<std::size_t>(q)].context.query_id;
      o.user_id = user.id;
      o.arm = arm;
      obs.push_back(std::move(o));
      obs_exposed.push_back(exposed_[static_cast<std::size_t>(q)]);
      obs_covariate.push_back(pre_rate);
      for (std::size_t m = 0; m < cfg.metrics.size(); ++m) outcomes[m].push_back(metric_value(cfg.metrics[m], s));
      for (std::size_t m = 0; m < monitored.size(); ++m) user_monitored[m] += metric_value(monitored[m], s);
    }
    for (auto& v : user_monitored) v /= static_cast<double>(queries.size());
    result.users_enrolled = a + 1;

    pending[arm].push_back(user_monitored);
    if (pending[0].empty() || pending[1].empty()) continue;
    const auto c = std::move(pending[0].front());
    const auto t = std::move(pending[1].front());
    pending[0].pop_front();
    pending[1].pop_front();
    StatMap seq_stats;
    for (std::size_t m = 0; m < monitored.size(); ++m) {
      const SequentialPoint p = cs[m].push(t[m] - c[m]);
      result.trajectories[m].points.push_back(p);
      seq_stats[monitored[m] + ".seq.estimate"] = p.estimate;
      seq_stats[monitored[m] + ".seq.cs_low"] = p.cs_low;
      seq_stats[monitored[m] + ".seq.cs_high"] = p.cs_high;
      seq_stats[monitored[m] + ".seq.crossed"] = p.crossed ? 1.0 : 0.0;
    }
    const std::size_t pair_t = cs.front().current().t;
    if (pair_t < std::max<std::size_t>(1, cfg.min_units)) continue;
    for (const Criterion* g : seq_guardrails) {
      auto it = seq_stats.find(g->stat);
      if (it == seq_stats.end()) throw Error("run_abtest: unknown sequential statistic '" + g->stat + "'");
      if (!compare(it->second, g->cmp, g->threshold)) {
        result.aborted = true;
        result.abort_t = pair_t;
        result.abort_criterion = g->id;
        break;
      }
    }
    if (result.aborted) break;
  }

  // Fixed-horizon analysis over enrolled users.
  const ExposureFilterResult filter = filter_by_flags(obs, obs_exposed, cfg.filter);
  result.exposure_rate = filter.exposure_rate;
  for (std::size_t m = 0; m < cfg.metrics.size(); ++m) {
    for (std::size_t i = 0; i < obs.size(); ++i) obs[i].outcome = outcomes[m][i];
    const Units units = build_units(obs, filter, with_cuped ? std::span<const double>(obs_covariate) : std::span<const double>{});
    MetricResult mr;
    mr.metric = cfg.metrics[m];
    mr.unadjusted = welch_or_undefined(units.y[0], units.y[1], cfg.alpha);
    if (with_cuped) {
      std::vector<double> y(units.y[0]);
      y.insert(y.end(), units.y[1].begin(), units.y[1].end());
      std::vector<double> x(units.x[0]);
      x.insert(x.end(), units.x[1].begin(), units.x[1].end());
      const CupedResult adj = cuped_adjust(y, x);
      mr.theta = adj.theta;
      mr.cuped_warning = adj.warning;
      const auto split = static_cast<std::ptrdiff_t>(units.y[0].size());
      const std::span<const double> all(adj.adjusted);
      mr.adjusted = welch_or_undefined(all.subspan(0, static_cast<std::size_t>(split)),
                                       all.subspan(static_cast<std::size_t>(split)), cfg.alpha);
      mr.method = AnalysisMethod::cuped_welch;
    }
    result.metrics.push_back(std::move(mr));
  }
  if (!result.metrics.empty()) {
    result.n_control = result.metrics.front().unadjusted.n_a;
    result.n_treatment = result.metrics.front().unadjusted.n_b;
  }

  if (cfg.filter == ExposureLevel::query_level) {
    result.notes.push_back("query-level filtering analyses queries as independent units; queries from the same user "
                           "may be correlated");
  }
  if (cfg.filter != ExposureLevel::none) {
    result.notes.push_back("filtered estimates are effects among exposed units; the overall effect is roughly "
                           "exposure_rate times the exposed effect");
  }
  result.notes.push_back("sequential trajectories support guardrail aborts only; shipping decisions use the "
                         "fixed-horizon estimates");
  if (cfg.min_units > 0) {
    result.notes.push_back("min_units=" + std::to_string(cfg.min_units) +
                           " stands in for a minimum runtime; weekday seasonality is not simulated");
  }

  result.gates = evaluate_gates(experiment_statistics(result), cfg.criteria);
  return result;
}

ExperimentResult run_abtest(const World& world, const Scorer& control, const Scorer& treatment,
                            const AbTestConfig& config) {
  return AbTestSimulator(world, control, treatment, config.k).run(config);
}

StatMap experiment_statistics(const ExperimentResult& r) {
  StatMap out;
  for (const auto& m : r.metrics) {
    const WelchResult& p = m.primary();
    out[m.metric + ".estimate"] = p.estimate;
    out[m.metric + ".std_error"] = p.std_error;
    out[m.metric + ".ci_low"] = p.ci_low;
    out[m.metric + ".ci_high"] = p.ci_high;
    out[m.metric + ".p_value"] = p.p_value;
    out[m.metric + ".unadjusted.estimate"] = m.unadjusted.estimate;
    out[m.metric + ".unadjusted.std_error"] = m.unadjusted.std_error;
  }
  for (const auto& t : r.trajectories) {
    const bool has = !t.points.empty();
    out[t.metric + ".seq.estimate"] = has ? t.points.back().estimate : kNaN;
    out[t.metric + ".seq.cs_low"] = has ? t.points.back().cs_low : kNaN;
    out[t.metric + ".seq.cs_high"] = has ? t.points.back().cs_high : kNaN;
    out[t.metric + ".seq.crossed"] = has && t.points.back().crossed ? 1.0 : 0.0;
  }
  out["exposure_rate"] = r.exposure_rate;
  out["n_control"] = static_cast<double>(r.n_control);
  out["n_treatment"] = static_cast<double>(r.n_treatment);
  out["users_enrolled"] = static_cast<double>(r.users_enrolled);
  out["aborted"] = r.aborted ? 1.0 : 0.0;
  return out;
}

bool is_abtest_statistic(std::string_view stat, std::span<const std::string> metrics) {
  static constexpr std::string_view kGlobal[] = {"exposure_rate", "n_control", "n_treatment", "users_enrolled",
                                                 "aborted"};
  for (auto g : kGlobal) {
    if (stat == g) return true;
  }
  static constexpr std::string_view kMetricLeaves[] = {
      "estimate", "std_error", "ci_low", "ci_high", "p_value", "unadjusted.estimate", "unadjusted.std_error"};
  static constexpr std::string_view kSeqLeaves[] = {"seq.estimate", "seq.cs_low", "seq.cs_high", "seq.crossed"};
  const auto dot = stat.find('.');
  if (dot == std::string_view::npos) return false;
  const std::string_view metric = stat.substr(0, dot);
  const std::string_view leaf = stat.substr(dot + 1);
  for (auto l : kSeqLeaves) {
    if (leaf == l) return is_known_metric(metric);
  }
  if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end()) return false;
  for (auto l : kMetricLeaves) {
    if (leaf == l) return true;
  }
  return false;
}

nlohmann::ordered_json to_json(const WelchResult& r) {
  nlohmann::ordered_json j;
  j["estimate"] = num(r.estimate);
  j["std_error"] = num(r.std_error);
  j["ci_low"] = num(r.ci_low);
  j["ci_high"] = num(r.ci_high);
  j["p_value"] = num(r.p_value);
  j["dof"] = num(r.dof);
  j["n_control"] = r.n_a;
  j["n_treatment"] = r.n_b;
  return j;
}

nlohmann::ordered_json to_json(const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["exposure_filter"] = std::string(to_string(r.exposure_filter));
  j["exposure_rate"] = r.exposure_rate;
  j["users_enrolled"] = r.users_enrolled;
  j["n_control"] = r.n_control;
  j["n_treatment"] = r.n_treatment;
  j["aborted"] = r.aborted;
  if (r.aborted) {
    j["abort_t"] = r.abort_t;
    j["abort_criterion"] = r.abort_criterion;
  }
  j["metrics"] = nlohmann::ordered_json::array();
  for (const auto& m : r.metrics) {
    nlohmann::ordered_json mj;
    mj["metric"] = m.metric;
    mj["method"] = std::string(to_string(m.method));
    mj["result"] = to_json(m.primary());
    mj["unadjusted"] = to_json(m.unadjusted);
    if (m.adjusted) {
      mj["theta"] = m.theta;
      mj["cuped_warning"] = m.cuped_warning;
    }
    j["metrics"].push_back(std::move(mj));
  }
  j["sequential"] = nlohmann::ordered_json::array();
  for (const auto& t : r.trajectories) {
    nlohmann::ordered_json tj;
    tj["metric"] = t.metric;
    tj["points"] = t.points.size();
    if (!t.points.empty()) {
      const auto& last = t.points.back();
      tj["final"] = {{"t", last.t},
                     {"estimate", num(last.estimate)},
                     {"cs_low", num(last.cs_low)},
                     {"cs_high", num(last.cs_high)},
                     {"crossed", last.crossed}};
      auto first = std::find_if(t.points.begin(), t.points.end(), [](const SequentialPoint& p) { return p.crossed; });
      if (first != t.points.end()) tj["first_crossed_t"] = first->t;
    }
    j["sequential"].push_back(std::move(tj));
  }
  j["gates"] = nlohmann::ordered_json::array();
  for (const auto& g : r.gates) j["gates"].push_back(to_json(g));
  j["notes"] = r.notes;
  return j;
}

std::string trajectory_csv(const ExperimentResult& r) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "metric,t,estimate,cs_low,cs_high,crossed\n";
  for (const auto& t : r.trajectories) {
    for (const auto& p : t.points) {
      ss << t.metric << ',' << p.t << ',' << p.estimate << ',' << p.cs_low << ',' << p.cs_high << ','
         << (p.crossed ? 1 : 0) << '\n';
    }
  }
  return ss.str();
}

}  // namespace funnelkit
