#pragma once

// Declarative funnel configuration loaded from TOML. Every subcommand of the
// CLI reads the same file; the funnel uses all of it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "funnelkit/bandit.hpp"
#include "funnelkit/bo.hpp"
#include "funnelkit/counterfactual.hpp"
#include "funnelkit/criteria.hpp"
#include "funnelkit/error.hpp"
#include "funnelkit/interleave.hpp"
#include "funnelkit/online_ab.hpp"
#include "funnelkit/simworld.hpp"

namespace funnelkit {

enum class Stage { reconstruction_quality, offline_verify, offline_validate, interleave, abtest, bandit, bo };

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);
const std::vector<Stage>& all_stages();

class FunnelConfigError : public ConfigError {
 public:
  enum class Kind {
    syntax,
    invalid_value,
    unknown_key,
    unknown_stage,
    missing_variant,
    dangling_statistic,
    later_stage_reference,
    multiple_sufficient_stages,
  };
  FunnelConfigError(Kind kind, const std::string& what) : ConfigError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct DataSources {
  std::optional<std::filesystem::path> counterfactual_log;
  std::optional<std::filesystem::path> interaction_log;
  std::optional<std::filesystem::path> judgments;
};

struct VerifySettings {
  std::vector<std::string> segment_attrs{"length_class"};
};

struct ValidateSettings {
  int k = 10;
  double w_max = 10.0;
  std::set<JudgmentSource> sources;  // empty = all
  // Examination decay used for IPS weights; defaults to the world's decay
  // when logs are simulated and to a uniform curve otherwise.
  std::optional<double> examination_decay;
};

struct BanditSettings {
  std::size_t horizon = 10'000;
  int k = 10;
  BanditConfig config;
};

enum class BoMode { offline, online };

struct BoSettings {
  BoMode mode = BoMode::offline;
  BoConfig config;
  std::vector<TemplateParameter> parameters;
  // offline proportion matching
  std::string attr = "kind";
  std::string value = "podcast";
  double target = 0.2;
  int k = 10;
};

// A criterion with its statistic resolved to the stage that publishes it.
struct ResolvedCriterion {
  Criterion criterion;  // stat without any "stage." qualifier
  Stage stage;          // where the gate is evaluated
  Stage source;         // stage whose statistics it reads
};

struct FunnelConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "funnel-out";
  std::vector<Stage> stages;
  std::string control = "control";
  std::string candidate = "candidate";
  std::map<std::string, Scorer> variants;
  WorldConfig world;
  DataSources data;
  VerifySettings verify;
  ValidateSettings validate;
  InterleaveConfig interleave;
  AbTestConfig abtest;
  BanditSettings bandit;
  BoSettings bo;
  std::vector<ResolvedCriterion> criteria;
  bool world_seed_explicit = false;

  const Scorer& control_scorer() const { return variants.at(control); }
  const Scorer& candidate_scorer() const { return variants.at(candidate); }
  std::vector<Criterion> criteria_for(Stage stage) const;
  bool has_stage(Stage s) const;
};

// Relative data paths resolve against `base_dir`. Throws FunnelConfigError.
FunnelConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir = ".");
// Throws Error naming the path when the file cannot be read.
FunnelConfig load_config(const std::filesystem::path& path);

// Replaces the master seed and every seed derived from it that the file did
// not set explicitly.
void apply_seed(FunnelConfig& config, std::uint64_t seed);

// True if `stage` can publish `stat` under this configuration.
bool stage_produces(const FunnelConfig& config, Stage stage, std::string_view stat);

}  // namespace funnelkit
