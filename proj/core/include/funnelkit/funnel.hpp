#pragma once

// The evaluation funnel: stages run in order, each publishing statistics
// that criteria gates check. The first failed necessary or guardrail gate
// ends the run with a shortcut exit; passing the sufficient criteria ships.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/config.hpp"
#include "funnelkit/offline_validate.hpp"
#include "funnelkit/simworld.hpp"

namespace funnelkit {

enum class StageVerdict { advance, shortcut_exit, ship, error };
enum class FinalVerdict { ship, shortcut_exit, inconclusive, error };

std::string_view to_string(StageVerdict v);
std::string_view to_string(FinalVerdict v);

// Process exit code for a verdict: ship 0, error 1, shortcut_exit 3,
// inconclusive 4.
int exit_code(FinalVerdict v);

// Inputs shared by stages, built on first use: the simulated world, the
// counterfactual log with its interactions, and relevance judgments.
class FunnelContext {
 public:
  explicit FunnelContext(const FunnelConfig& config);

  const World& world();
  const std::vector<CounterfactualRecord>& records();
  const std::vector<Interaction>& interactions();
  const std::vector<Judgment>& judgments();
  ExaminationCurve examination_curve();
  // True when the logs come from the simulator rather than files.
  bool simulated_logs() const { return !config_.data.counterfactual_log; }

 private:
  void load_logs();

  const FunnelConfig& config_;
  std::optional<World> world_;
  std::optional<std::vector<CounterfactualRecord>> records_;
  std::vector<Interaction> interactions_;
  std::optional<std::vector<Judgment>> judgments_;
};

struct StageFile {
  std::string name;  // relative to the stage directory
  std::string content;
};

struct StageOutput {
  Stage stage = Stage::reconstruction_quality;
  StatMap statistics;
  nlohmann::ordered_json report;
  std::vector<StageFile> files;   // written while the funnel runs
  std::vector<StageFile> charts;  // written by emit_report
  std::vector<std::string> notes;
};

// Runs one stage. Criteria whose statistics this stage publishes are passed
// to the stage module (A/B guardrails are monitored sequentially).
StageOutput run_stage(const FunnelConfig& config, Stage stage, FunnelContext& context);

struct StageRecord {
  std::size_t index = 0;
  Stage stage = Stage::reconstruction_quality;
  // Logical clock ticks, not wall time, so reruns are byte-identical.
  std::uint64_t started = 0;
  std::uint64_t finished = 0;
  std::vector<GateOutcome> gates;
  StageVerdict verdict = StageVerdict::advance;
  std::string error;
  std::vector<std::string> artifacts;  // relative to the output directory
  std::vector<std::string> notes;
  std::vector<StageFile> charts;
  StatMap statistics;
};

struct FailureReason {
  std::string stage;
  std::string criterion;
  CriterionKind kind = CriterionKind::necessary;
  std::string stat;
  double observed = 0.0;
  Comparator comparator = Comparator::ge;
  double threshold = 0.0;
  std::string message;
};

struct DecisionLog {
  std::string control;
  std::string candidate;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;
  FinalVerdict verdict = FinalVerdict::error;
  std::optional<FailureReason> failure;
  std::string error;
};

// Stage directory name, e.g. "stages/02_offline_verify".
std::string stage_directory(std::size_t index, Stage stage);

// Executes the stages and writes their reports under config.output_dir
// (stale stage directories from earlier runs are removed first). Stage
// exceptions become an error verdict rather than propagating.
DecisionLog run_funnel(const FunnelConfig& config);

// decision.json, summary.md and one chart per executed stage. Throws Error
// if the directory cannot be written.
void emit_report(const DecisionLog& log, const std::filesystem::path& output_dir);

nlohmann::ordered_json to_json(const DecisionLog& log);
std::string summary_markdown(const DecisionLog& log);

}  // namespace funnelkit
