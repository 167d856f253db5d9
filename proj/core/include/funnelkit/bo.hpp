#pragma once

// Bayesian optimization over scorer parameters. Offline, the utility is how
// close an attribute's top-k share lands to a target; online, it is the lift
// estimated by a simulated A/B test against a fixed control.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/criteria.hpp"
#include "funnelkit/gp.hpp"
#include "funnelkit/online_ab.hpp"

namespace funnelkit {

class World;

// A free parameter mapped from [0, 1] onto [lo, hi] of one scorer weight or
// boost.
struct TemplateParameter {
  enum class Target { weight, boost };
  std::string name;
  Target target = Target::weight;
  std::size_t index = 0;
  double lo = 0.0;
  double hi = 1.0;
};

struct ScorerTemplate {
  Scorer base;
  std::vector<TemplateParameter> parameters;

  std::size_t dim() const { return parameters.size(); }
  std::vector<double> values(std::span<const double> unit) const;
  // Throws Error on a dimension mismatch or an index outside the base scorer.
  Scorer instantiate(std::span<const double> unit) const;
};

struct BoConfig {
  std::size_t budget = 25;
  std::size_t initial_design = 5;  // Halton points; truncated to the budget
  std::size_t n_candidates = 1000;
  KernelParams kernel{1.0, 0.2, 1e-6};  // on standardized utilities
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
};

struct BoObservation {
  std::vector<double> unit;
  std::vector<double> values;
  double utility = 0.0;
  double aux = 0.0;  // observed proportion offline; A/B p-value online
};

struct BoResult {
  std::vector<BoObservation> history;
  std::size_t best_index = 0;
  std::vector<double> best_unit;
  std::vector<double> best_values;
  double best_utility = 0.0;
  double utility_spread = 0.0;  // max - min observed utility
  bool flat_surface = false;
};

// Radical-inverse Halton point `index` (1-based) in [0, 1]^dim, dim <= 8.
std::vector<double> halton_point(std::size_t index, std::size_t dim);

// Generic maximizer: Halton initial design, then EI over uniform candidates
// on a GP fitted to standardized utilities. The best observation by utility
// is reported. Throws Error if budget < 1 or dim is 0 or > 8.
using BoObjective = std::function<BoObservation(std::span<const double> unit, std::size_t round)>;
BoResult run_bo(std::size_t dim, const BoObjective& objective, const BoConfig& config);

// Minimizes (share(attr == value in top-k) - target)^2 over the template via
// counterfactual reconstruction of the records. flat_surface when the
// utility spread is <= 1e-6.
BoResult run_bo_offline(std::span<const CounterfactualRecord> records, const ScorerTemplate& tmpl,
                        const std::string& attr, const std::string& value, double target, int k,
                        const BoConfig& config);

// Each round runs a fresh A/B replication of the instantiated template
// against `control`; utility is the estimate of the first metric. The result
// is the evaluated point with the highest GP posterior mean. flat_surface
// when no round reached p <= ab.alpha / rounds.
BoResult run_bo_online(const World& world, const Scorer& control, const ScorerTemplate& tmpl,
                       const AbTestConfig& ab, const BoConfig& config);

// best_utility, utility_spread, flat_surface, evaluations, best_aux, and
// best.<parameter name> per parameter.
StatMap bo_statistics(const BoResult& result, const ScorerTemplate& tmpl);
bool is_bo_statistic(std::string_view stat, const ScorerTemplate& tmpl);

nlohmann::ordered_json to_json(const BoResult& result, const ScorerTemplate& tmpl);
// round,<param...>,utility,aux
std::string bo_history_csv(const BoResult& result, const ScorerTemplate& tmpl);
// Posterior mean and sd on a 1-d grid (first parameter, others at the best
// point): x,mean,sd.
std::string bo_surface_csv(const BoResult& result, const BoConfig& config, std::size_t points = 101);

}  // namespace funnelkit
