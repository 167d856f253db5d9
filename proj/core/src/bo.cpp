#include "funnelkit/bo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "funnelkit/error.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/stats.hpp"
#include "funnelkit/verify.hpp"

namespace funnelkit {
namespace {

constexpr std::size_t kMaxDim = 8;

struct Standardized {
  std::vector<double> y;
  double mean = 0.0;
  double scale = 1.0;
};

Standardized standardize(const std::vector<BoObservation>& history) {
  Standardized s;
  std::vector<double> u;
  for (const auto& h : history) u.push_back(h.utility);
  s.mean = mean(u);
  const double sd = u.size() > 1 ? std::sqrt(sample_variance(u)) : 0.0;
  s.scale = sd > 0.0 ? sd : 1.0;
  for (double v : u) s.y.push_back((v - s.mean) / s.scale);
  return s;
}

GpModel fit_history(const std::vector<BoObservation>& history, const KernelParams& kernel) {
  std::vector<std::vector<double>> x;
  for (const auto& h : history) x.push_back(h.unit);
  return gp_fit(x, standardize(history).y, kernel);
}

void finish(BoResult& r) {
  double lo = r.history.front().utility;
  double hi = lo;
  for (const auto& h : r.history) {
    lo = std::min(lo, h.utility);
    hi = std::max(hi, h.utility);
  }
  r.utility_spread = hi - lo;
  const auto& best = r.history[r.best_index];
  r.best_unit = best.unit;
  r.best_values = best.values;
  r.best_utility = best.utility;
}

}  // namespace

std::vector<double> ScorerTemplate::values(std::span<const double> unit) const {
  if (unit.size() != parameters.size()) throw Error("scorer template: expected " + std::to_string(parameters.size()) +
                                                    " parameters, got " + std::to_string(unit.size()));
  std::vector<double> v(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const auto& p = parameters[i];
    v[i] = p.lo + std::clamp(unit[i], 0.0, 1.0) * (p.hi - p.lo);
  }
  return v;
}

Scorer ScorerTemplate::instantiate(std::span<const double> unit) const {
  const auto v = values(unit);
  Scorer s = base;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = parameters[i];
    if (p.target == TemplateParameter::Target::weight) {
      if (p.index >= s.weights.size()) throw Error("scorer template: weight index out of range for '" + p.name + "'");
      s.weights[p.index] = v[i];
    } else {
      if (p.index >= s.boosts.size()) throw Error("scorer template: boost index out of range for '" + p.name + "'");
      s.boosts[p.index].boost = v[i];
    }
    s.variant.parameters[p.name] = v[i];
  }
  return s;
}

std::vector<double> halton_point(std::size_t index, std::size_t dim) {
  static constexpr unsigned kPrimes[kMaxDim] = {2, 3, 5, 7, 11, 13, 17, 19};
  if (dim == 0 || dim > kMaxDim) throw Error("halton_point: dim must be in [1, 8]");
  std::vector<double> x(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    double f = 1.0;
    double r = 0.0;
    for (std::size_t i = index; i > 0; i /= kPrimes[d]) {
      f /= kPrimes[d];
      r += f * static_cast<double>(i % kPrimes[d]);
    }
    x[d] = r;
  }
  return x;
}

BoResult run_bo(std::size_t dim, const BoObjective& objective, const BoConfig& cfg) {
  if (cfg.budget < 1) throw Error("run_bo: budget must be >= 1");
  if (dim == 0 || dim > kMaxDim) throw Error("run_bo: parameter dimension must be in [1, 8]");
  if (cfg.n_candidates < 1) throw Error("run_bo: n_candidates must be >= 1");
  BoResult r;
  const std::size_t n_init = std::min(std::max<std::size_t>(cfg.initial_design, 1), cfg.budget);
  for (std::size_t i = 0; i < n_init; ++i) r.history.push_back(objective(halton_point(i + 1, dim), i));

  const RngStream cand_rng = RngStream(cfg.seed, "bo").child(cfg.replication).child("candidates");
  for (std::size_t round = n_init; round < cfg.budget; ++round) {
    const GpModel gp = fit_history(r.history, cfg.kernel);
    const Standardized s = standardize(r.history);
    const double best = *std::max_element(s.y.begin(), s.y.end());
    RngStream rng = cand_rng.child(round);
    std::vector<double> chosen;
    double best_ei = -1.0;
    std::vector<double> x(dim);
    for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
      for (auto& v : x) v = rng.uniform();
      const double ei = expected_improvement(gp, x, best);
      if (ei > best_ei) {
        best_ei = ei;
        chosen = x;
      }
    }
    r.history.push_back(objective(chosen, round));
  }
  r.best_index = 0;
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    if (r.history[i].utility > r.history[r.best_index].utility) r.best_index = i;
  }
  finish(r);
  return r;
}

BoResult run_bo_offline(std::span<const CounterfactualRecord> records, const ScorerTemplate& tmpl,
                        const std::string& attr, const std::string& value, double target, int k,
                        const BoConfig& config) {
  if (records.empty()) throw Error("run_bo_offline: no records");
  auto objective = [&](std::span<const double> unit, std::size_t) {
    BoObservation o;
    o.unit.assign(unit.begin(), unit.end());
    o.values = tmpl.values(unit);
    o.aux = attribute_share(records, tmpl.instantiate(unit), attr, value, k);
    o.utility = -(o.aux - target) * (o.aux - target);
    return o;
  };
  BoResult r = run_bo(tmpl.dim(), objective, config);
  r.flat_surface = r.utility_spread <= 1e-6;
  return r;
}

BoResult run_bo_online(const World& world, const Scorer& control, const ScorerTemplate& tmpl,
                       const AbTestConfig& ab, const BoConfig& config) {
  if (ab.metrics.empty()) throw Error("run_bo_online: A/B config has no metrics");
  const AbTestSimulator served_control(world, control, control, ab.k);
  auto objective = [&](std::span<const double> unit, std::size_t round) {
    AbTestConfig cfg = ab;
    cfg.replication = ab.replication * 1'000'003 + round;
    cfg.criteria.clear();
    const ExperimentResult e = AbTestSimulator(served_control, tmpl.instantiate(unit)).run(cfg);
    const WelchResult& w = e.metrics.front().primary();
    BoObservation o;
    o.unit.assign(unit.begin(), unit.end());
    o.values = tmpl.values(unit);
    o.utility = w.estimate;
    o.aux = w.p_value;
    return o;
  };
  BoResult r = run_bo(tmpl.dim(), objective, config);

  if (r.history.size() > 1) {
    const GpModel gp = fit_history(r.history, config.kernel);
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      const double m = gp.predict(r.history[i].unit).mean;
      if (m > best_mean) {
        best_mean = m;
        r.best_index = i;
      }
    }
    finish(r);
  }
  // Bonferroni over rounds; at alpha per round a null surface would almost
  // always show one significant round.
  const double per_round = ab.alpha / static_cast<double>(r.history.size());
  r.flat_surface = std::none_of(r.history.begin(), r.history.end(),
                                [&](const BoObservation& o) { return o.aux <= per_round; });
  return r;
}

StatMap bo_statistics(const BoResult& r, const ScorerTemplate& tmpl) {
  StatMap s;
  s["best_utility"] = r.best_utility;
  s["utility_spread"] = r.utility_spread;
  s["flat_surface"] = r.flat_surface ? 1.0 : 0.0;
  s["evaluations"] = static_cast<double>(r.history.size());
  s["best_aux"] = r.history.empty() ? std::numeric_limits<double>::quiet_NaN() : r.history[r.best_index].aux;
  for (std::size_t i = 0; i < tmpl.parameters.size() && i < r.best_values.size(); ++i) {
    s["best." + tmpl.parameters[i].name] = r.best_values[i];
  }
  return s;
}

bool is_bo_statistic(std::string_view stat, const ScorerTemplate& tmpl) {
  if (stat == "best_utility" || stat == "utility_spread" || stat == "flat_surface" || stat == "evaluations" ||
      stat == "best_aux") {
    return true;
  }
  for (const auto& p : tmpl.parameters) {
    if (stat == "best." + p.name) return true;
  }
  return false;
}

nlohmann::ordered_json to_json(const BoResult& r, const ScorerTemplate& tmpl) {
  nlohmann::ordered_json j;
  j["evaluations"] = r.history.size();
  j["best_index"] = r.best_index;
  j["best_utility"] = json_number(r.best_utility);
  nlohmann::ordered_json best = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < tmpl.parameters.size() && i < r.best_values.size(); ++i) {
    best[tmpl.parameters[i].name] = r.best_values[i];
  }
  j["best_parameters"] = std::move(best);
  j["utility_spread"] = r.utility_spread;
  j["flat_surface"] = r.flat_surface;
  return j;
}

std::string bo_history_csv(const BoResult& r, const ScorerTemplate& tmpl) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "round";
  for (const auto& p : tmpl.parameters) ss << ',' << p.name;
  ss << ",utility,aux\n";
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    ss << i + 1;
    for (double v : r.history[i].values) ss << ',' << v;
    ss << ',' << r.history[i].utility << ',' << r.history[i].aux << '\n';
  }
  return ss.str();
}

std::string bo_surface_csv(const BoResult& r, const BoConfig& config, std::size_t points) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "x,mean,sd\n";
  if (r.history.empty() || points < 2) return ss.str();
  const GpModel gp = fit_history(r.history, config.kernel);
  const Standardized s = standardize(r.history);
  std::vector<double> x = r.best_unit;
  for (std::size_t i = 0; i < points; ++i) {
    x[0] = static_cast<double>(i) / static_cast<double>(points - 1);
    const GpPrediction p = gp.predict(x);
    ss << x[0] << ',' << s.mean + s.scale * p.mean << ',' << s.scale * std::sqrt(p.variance) << '\n';
  }
  return ss.str();
}

}  // namespace funnelkit
