#include "funnelkit/funnel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "funnelkit/bandit.hpp"
#include "funnelkit/bo.hpp"
#include "funnelkit/interleave.hpp"
#include "funnelkit/jsonl.hpp"
#include "funnelkit/online_ab.hpp"
#include "funnelkit/svg.hpp"
#include "funnelkit/verify.hpp"

namespace funnelkit {
namespace {

constexpr std::size_t kMaxChartPoints = 400;

std::string number(double v) {
  if (std::isnan(v)) return "undefined";
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

nlohmann::ordered_json stats_json(const StatMap& stats) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : stats) j[k] = json_number(v);
  return j;
}

// Every `stride`-th index plus the last.
std::vector<std::size_t> thin(std::size_t n) {
  std::vector<std::size_t> idx;
  const std::size_t stride = std::max<std::size_t>(1, (n + kMaxChartPoints - 1) / kMaxChartPoints);
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (n > 0 && idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

std::vector<Criterion> own_criteria(const FunnelConfig& c, Stage stage) {
  std::vector<Criterion> out;
  for (const auto& rc : c.criteria) {
    if (rc.stage == stage && rc.source == stage) out.push_back(rc.criterion);
  }
  return out;
}

StageOutput stage_reconstruction(const FunnelConfig& c, FunnelContext& ctx) {
  const ReconstructionQuality q = quality_check(ctx.records(), c.control_scorer());
  StageOutput out;
  out.statistics = {{"mean_jaccard", q.mean_jaccard},
                    {"mean_spearman", q.n_spearman > 0 ? q.mean_spearman : std::nan("")},
                    {"exact_match_rate", q.exact_match_rate},
                    {"n_queries", static_cast<double>(q.n_queries)}};
  out.report = {{"mean_jaccard", q.mean_jaccard},
                {"mean_spearman", q.mean_spearman},
                {"n_spearman", q.n_spearman},
                {"exact_match_rate", q.exact_match_rate},
                {"n_queries", q.n_queries}};
  const std::string labels[] = {"jaccard", "spearman", "exact match"};
  const double values[] = {q.mean_jaccard, q.mean_spearman, q.exact_match_rate};
  out.charts.push_back({"reconstruction.svg", bar_chart_svg("Reconstruction quality", labels, values, 1.0)});
  return out;
}

StageOutput stage_verify(const FunnelConfig& c, FunnelContext& ctx) {
  const VerificationReport r = verification_report(ctx.records(), c.control_scorer(), c.candidate_scorer(),
                                                   ctx.interactions(), c.verify.segment_attrs, {});
  StageOutput out;
  out.statistics = report_statistics(r);
  out.report = to_json(r);
  std::vector<std::string> labels{"overall"};
  std::vector<double> values{r.overall.width};
  for (const auto& [seg, wd] : r.by_success) {
    labels.push_back(seg == kPreviouslySuccessful ? "prev. success" : "prev. no success");
    values.push_back(wd.width);
  }
  for (const auto& [attr, by_value] : r.by_attribute) {
    for (const auto& [value, wd] : by_value) {
      labels.push_back(attr + "=" + value);
      values.push_back(wd.width);
    }
  }
  out.charts.push_back({"width.svg", bar_chart_svg("Width by segment", labels, values)});
  return out;
}

StageOutput stage_validate(const FunnelConfig& c, FunnelContext& ctx) {
  const auto pairs = reconstruct_pair(ctx.records(), c.control_scorer(), c.candidate_scorer(), c.validate.k);
  const JudgmentIndex index(ctx.judgments(), ctx.examination_curve(), c.validate.w_max, c.validate.sources);
  const OfflineValidationComparison cmp = offline_validation_report(pairs, index, c.validate.k);
  StageOutput out;
  out.statistics = offline_validation_statistics(cmp);
  out.report = to_json(cmp);
  if (cmp.candidate.no_overlap) out.notes.push_back("candidate lists share no judged items; metrics undefined");
  auto ips = [](const MetricValue& m) { return m.ips_weighted.value_or(std::nan("")); };
  const std::string labels[] = {"succ ctl", "succ cand", "mrr ctl", "mrr cand", "ndcg ctl", "ndcg cand"};
  const double values[] = {ips(cmp.control.success_at_k), ips(cmp.candidate.success_at_k), ips(cmp.control.mrr),
                           ips(cmp.candidate.mrr),          ips(cmp.control.ndcg_at_k),      ips(cmp.candidate.ndcg_at_k)};
  out.charts.push_back({"metrics.svg", bar_chart_svg("IPS-weighted offline metrics", labels, values)});
  return out;
}

StageOutput stage_interleave(const FunnelConfig& c, FunnelContext& ctx) {
  const auto criteria = own_criteria(c, Stage::interleave);
  const InterleaveResult r =
      run_interleave(ctx.world(), c.control_scorer(), c.candidate_scorer(), c.interleave, criteria);
  StageOutput out;
  out.statistics = interleave_statistics(r);
  out.report = to_json(r);
  out.report["team_a"] = c.control;
  out.report["team_b"] = c.candidate;
  out.files.push_back({"per_query.csv", per_query_csv(r)});
  const std::string labels[] = {c.control + " wins", c.candidate + " wins", "ties"};
  const double values[] = {static_cast<double>(r.test.wins_a), static_cast<double>(r.test.wins_b),
                           static_cast<double>(r.test.ties)};
  out.charts.push_back({"preference.svg", bar_chart_svg("Interleaving outcomes", labels, values)});
  return out;
}

StageOutput stage_abtest(const FunnelConfig& c, FunnelContext& ctx) {
  AbTestConfig cfg = c.abtest;
  cfg.criteria = own_criteria(c, Stage::abtest);
  const ExperimentResult r = run_abtest(ctx.world(), c.control_scorer(), c.candidate_scorer(), cfg);
  StageOutput out;
  out.statistics = experiment_statistics(r);
  out.report = to_json(r);
  out.notes = r.notes;
  if (r.aborted) {
    out.notes.push_back("guardrail '" + r.abort_criterion + "' crossed at pair " + std::to_string(r.abort_t) +
                        " after " + std::to_string(r.users_enrolled) + " enrolled users; experiment aborted");
  }
  out.files.push_back({"trajectory.csv", trajectory_csv(r)});
  for (const auto& t : r.trajectories) {
    Series est{"estimate", {}, {}};
    Series lo{"cs_low", {}, {}};
    Series hi{"cs_high", {}, {}};
    for (std::size_t i : thin(t.points.size())) {
      const auto& p = t.points[i];
      const double x = static_cast<double>(p.t);
      est.x.push_back(x);
      est.y.push_back(p.estimate);
      lo.x.push_back(x);
      lo.y.push_back(p.cs_low);
      hi.x.push_back(x);
      hi.y.push_back(p.cs_high);
    }
    const Series series[] = {est, lo, hi};
    out.charts.push_back({"sequential_" + t.metric + ".svg",
                          line_chart_svg("Confidence sequence: " + t.metric, "pairs", "difference", series, 0.0)});
  }
  return out;
}

StageOutput stage_bandit(const FunnelConfig& c, FunnelContext& ctx) {
  const Scorer arms[] = {c.control_scorer(), c.candidate_scorer()};
  const std::string names[] = {c.control, c.candidate};
  const BanditRun run = run_bandit(ctx.world(), arms, c.bandit.k, c.bandit.horizon, c.bandit.config);
  StageOutput out;
  out.statistics = bandit_statistics(run, names);
  out.report = to_json(run, names);
  out.notes.push_back("bandit allocation is adaptive; posterior means are not unbiased effect estimates");
  out.files.push_back({"trajectory.csv", bandit_trajectory_csv(run)});
  Series regret{"cumulative regret", {}, {}};
  for (std::size_t i : thin(run.cumulative_regret.size())) {
    regret.x.push_back(static_cast<double>(i + 1));
    regret.y.push_back(run.cumulative_regret[i]);
  }
  out.charts.push_back({"regret.svg", line_chart_svg("Bandit pseudo-regret", "round", "regret", {&regret, 1})});
  return out;
}

StageOutput stage_bo(const FunnelConfig& c, FunnelContext& ctx) {
  ScorerTemplate tmpl{c.candidate_scorer(), c.bo.parameters};
  const BoResult r = c.bo.mode == BoMode::offline
                         ? run_bo_offline(ctx.records(), tmpl, c.bo.attr, c.bo.value, c.bo.target, c.bo.k, c.bo.config)
                         : run_bo_online(ctx.world(), c.control_scorer(), tmpl, c.abtest, c.bo.config);
  StageOutput out;
  out.statistics = bo_statistics(r, tmpl);
  out.report = to_json(r, tmpl);
  out.report["mode"] = c.bo.mode == BoMode::offline ? "offline" : "online";
  if (r.flat_surface) out.notes.push_back("response surface is flat; no parameter setting is preferred");
  out.files.push_back({"history.csv", bo_history_csv(r, tmpl)});
  out.files.push_back({"surface.csv", bo_surface_csv(r, c.bo.config)});
  Series u{"utility", {}, {}};
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    u.x.push_back(static_cast<double>(i + 1));
    u.y.push_back(r.history[i].utility);
  }
  out.charts.push_back({"utility.svg", line_chart_svg("BO utility per evaluation", "evaluation", "utility", {&u, 1})});
  return out;
}

}  // namespace

std::string_view to_string(StageVerdict v) {
  switch (v) {
    case StageVerdict::advance:
      return "advance";
    case StageVerdict::shortcut_exit:
      return "shortcut_exit";
    case StageVerdict::ship:
      return "ship";
    case StageVerdict::error:
      return "error";
  }
  return "error";
}

std::string_view to_string(FinalVerdict v) {
  switch (v) {
    case FinalVerdict::ship:
      return "ship";
    case FinalVerdict::shortcut_exit:
      return "shortcut_exit";
    case FinalVerdict::inconclusive:
      return "inconclusive";
    case FinalVerdict::error:
      return "error";
  }
  return "error";
}

int exit_code(FinalVerdict v) {
  switch (v) {
    case FinalVerdict::ship:
      return 0;
    case FinalVerdict::shortcut_exit:
      return 3;
    case FinalVerdict::inconclusive:
      return 4;
    case FinalVerdict::error:
      return 1;
  }
  return 1;
}

FunnelContext::FunnelContext(const FunnelConfig& config) : config_(config) {}

const World& FunnelContext::world() {
  if (!world_) world_ = generate_world(config_.world);
  return *world_;
}

void FunnelContext::load_logs() {
  if (records_) return;
  if (config_.data.counterfactual_log) {
    records_ = read_counterfactual_log(*config_.data.counterfactual_log);
    if (config_.data.interaction_log) interactions_ = read_interaction_log(*config_.data.interaction_log);
  } else {
    SimulatedLogs logs =
        simulate_logs(world(), config_.control_scorer(), config_.world.display_k, config_.seed, "production");
    records_ = std::move(logs.records);
    interactions_ = std::move(logs.interactions);
  }
}

const std::vector<CounterfactualRecord>& FunnelContext::records() {
  load_logs();
  return *records_;
}

const std::vector<Interaction>& FunnelContext::interactions() {
  load_logs();
  return interactions_;
}

const std::vector<Judgment>& FunnelContext::judgments() {
  if (judgments_) return *judgments_;
  if (config_.data.judgments) {
    judgments_ = read_judgment_log(*config_.data.judgments);
  } else {
    judgments_ = judgments_from_clicks(records(), interactions());
  }
  return *judgments_;
}

ExaminationCurve FunnelContext::examination_curve() {
  if (config_.validate.examination_decay) return ExaminationCurve::geometric(*config_.validate.examination_decay);
  if (simulated_logs()) return ExaminationCurve::geometric(config_.world.examination_decay);
  return ExaminationCurve::uniform();
}

StageOutput run_stage(const FunnelConfig& config, Stage stage, FunnelContext& context) {
  StageOutput out;
  switch (stage) {
    case Stage::reconstruction_quality:
      out = stage_reconstruction(config, context);
      break;
    case Stage::offline_verify:
      out = stage_verify(config, context);
      break;
    case Stage::offline_validate:
      out = stage_validate(config, context);
      break;
    case Stage::interleave:
      out = stage_interleave(config, context);
      break;
    case Stage::abtest:
      out = stage_abtest(config, context);
      break;
    case Stage::bandit:
      out = stage_bandit(config, context);
      break;
    case Stage::bo:
      out = stage_bo(config, context);
      break;
  }
  out.stage = stage;
  return out;
}

std::string stage_directory(std::size_t index, Stage stage) {
  std::string n = std::to_string(index + 1);
  if (n.size() < 2) n.insert(0, "0");
  return "stages/" + n + "_" + std::string(to_string(stage));
}

DecisionLog run_funnel(const FunnelConfig& config) {
  DecisionLog log;
  log.control = config.control;
  log.candidate = config.candidate;
  log.seed = config.seed;

  std::error_code ec;
  std::filesystem::remove_all(config.output_dir / "stages", ec);
  std::filesystem::remove(config.output_dir / "decision.json", ec);
  std::filesystem::remove(config.output_dir / "summary.md", ec);

  std::optional<Stage> sufficient_stage;
  for (const auto& rc : config.criteria) {
    if (rc.criterion.kind == CriterionKind::sufficient) sufficient_stage = rc.stage;
  }

  FunnelContext context(config);
  std::map<Stage, StatMap> published;
  std::uint64_t clock = 0;
  bool sufficient_failed = false;

  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const Stage stage = config.stages[i];
    StageRecord rec;
    rec.index = i;
    rec.stage = stage;
    rec.started = clock++;
    try {
      StageOutput out = run_stage(config, stage, context);
      published[stage] = out.statistics;
      for (const auto& rc : config.criteria) {
        if (rc.stage != stage) continue;
        const Criterion one[] = {rc.criterion};
        rec.gates.push_back(evaluate_gates(published.at(rc.source), one).front());
      }
      const std::string dir = stage_directory(i, stage);
      nlohmann::ordered_json report;
      report["stage"] = std::string(to_string(stage));
      report["statistics"] = stats_json(out.statistics);
      report["report"] = out.report;
      report["gates"] = nlohmann::ordered_json::array();
      for (const auto& g : rec.gates) report["gates"].push_back(to_json(g));
      report["notes"] = out.notes;
      write_text_file(config.output_dir / dir / "report.json", dump(report));
      rec.artifacts.push_back(dir + "/report.json");
      for (const auto& f : out.files) {
        write_text_file(config.output_dir / dir / f.name, f.content);
        rec.artifacts.push_back(dir + "/" + f.name);
      }
      for (const auto& f : out.charts) rec.artifacts.push_back(dir + "/" + f.name);
      rec.charts = std::move(out.charts);
      rec.notes = std::move(out.notes);
      rec.statistics = std::move(out.statistics);
    } catch (const std::exception& e) {
      rec.verdict = StageVerdict::error;
      rec.error = e.what();
      rec.finished = clock++;
      log.stages.push_back(std::move(rec));
      log.verdict = FinalVerdict::error;
      log.error = "stage '" + std::string(to_string(stage)) + "' failed: " + e.what();
      return log;
    }
    rec.finished = clock++;

    const auto blocking = std::find_if(rec.gates.begin(), rec.gates.end(), [](const GateOutcome& g) {
      return !g.passed && (g.kind == CriterionKind::necessary || g.kind == CriterionKind::guardrail);
    });
    if (blocking != rec.gates.end()) {
      rec.verdict = StageVerdict::shortcut_exit;
      FailureReason f;
      f.stage = std::string(to_string(stage));
      f.criterion = blocking->criterion_id;
      f.kind = blocking->kind;
      f.stat = blocking->stat;
      f.observed = blocking->observed;
      f.comparator = blocking->comparator;
      f.threshold = blocking->threshold;
      f.message = std::string(to_string(blocking->kind)) + " criterion '" + blocking->criterion_id + "' failed at " +
                  f.stage + ": " + describe(*blocking);
      log.failure = std::move(f);
      log.verdict = FinalVerdict::shortcut_exit;
      log.stages.push_back(std::move(rec));
      return log;
    }
    if (sufficient_stage == stage) {
      const bool all = std::all_of(rec.gates.begin(), rec.gates.end(), [](const GateOutcome& g) {
        return g.kind != CriterionKind::sufficient || g.passed;
      });
      if (all) {
        rec.verdict = StageVerdict::ship;
        log.verdict = FinalVerdict::ship;
        log.stages.push_back(std::move(rec));
        return log;
      }
      sufficient_failed = true;
    }
    log.stages.push_back(std::move(rec));
  }

  if (sufficient_failed) {
    log.verdict = FinalVerdict::inconclusive;
  } else {
    log.verdict = FinalVerdict::ship;
    if (!log.stages.empty()) log.stages.back().verdict = StageVerdict::ship;
  }
  return log;
}

nlohmann::ordered_json to_json(const DecisionLog& log) {
  nlohmann::ordered_json j;
  j["tool"] = "funnelkit";
  j["seed"] = log.seed;
  j["control"] = log.control;
  j["candidate"] = log.candidate;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : log.stages) {
    nlohmann::ordered_json sj;
    sj["index"] = s.index;
    sj["stage"] = std::string(to_string(s.stage));
    sj["started"] = s.started;
    sj["finished"] = s.finished;
    sj["verdict"] = std::string(to_string(s.verdict));
    sj["gates"] = nlohmann::ordered_json::array();
    for (const auto& g : s.gates) sj["gates"].push_back(to_json(g));
    if (!s.error.empty()) sj["error"] = s.error;
    sj["notes"] = s.notes;
    sj["artifacts"] = s.artifacts;
    j["stages"].push_back(std::move(sj));
  }
  j["verdict"] = std::string(to_string(log.verdict));
  if (log.failure) {
    const auto& f = *log.failure;
    j["failure_reason"] = {{"stage", f.stage},
                           {"criterion", f.criterion},
                           {"kind", std::string(to_string(f.kind))},
                           {"stat", f.stat},
                           {"observed", json_number(f.observed)},
                           {"comparator", std::string(to_string(f.comparator))},
                           {"threshold", json_number(f.threshold)},
                           {"message", f.message}};
  } else {
    j["failure_reason"] = nullptr;
  }
  if (!log.error.empty()) j["error"] = log.error;
  return j;
}

std::string summary_markdown(const DecisionLog& log) {
  std::ostringstream md;
  md << "# Funnel decision: " << to_string(log.verdict) << "\n\n";
  md << "Candidate `" << log.candidate << "` against control `" << log.control << "`, seed " << log.seed << ".\n\n";
  if (log.failure) {
    const auto& f = *log.failure;
    md << "Shortcut exit at stage `" << f.stage << "`: criterion `" << f.criterion << "` (" << to_string(f.kind)
       << ") failed, `" << f.stat << ' ' << to_string(f.comparator) << ' ' << number(f.threshold) << "` observed "
       << number(f.observed) << ".\n\n";
  }
  if (!log.error.empty()) md << "Error: " << log.error << "\n\n";
  if (log.verdict == FinalVerdict::inconclusive) {
    md << "All necessary criteria passed but the sufficient criteria did not; the idea needs more evidence.\n\n";
  }
  for (const auto& s : log.stages) {
    md << "## " << s.index + 1 << ". " << to_string(s.stage) << ": " << to_string(s.verdict) << "\n\n";
    if (!s.error.empty()) md << "Error: " << s.error << "\n\n";
    if (!s.gates.empty()) {
      md << "| criterion | kind | check | observed | result |\n|---|---|---|---|---|\n";
      for (const auto& g : s.gates) {
        md << "| " << g.criterion_id << " | " << to_string(g.kind) << " | `" << g.stat << ' '
           << to_string(g.comparator) << ' ' << number(g.threshold) << "` | " << number(g.observed) << " | "
           << (g.passed ? "passed" : "FAILED") << " |\n";
      }
      md << '\n';
    }
    for (const auto& n : s.notes) md << "- " << n << '\n';
    if (!s.notes.empty()) md << '\n';
    for (const auto& c : s.charts) md << "![" << c.name << "](" << stage_directory(s.index, s.stage) << '/' << c.name << ")\n";
    if (!s.charts.empty()) md << '\n';
  }
  return md.str();
}

void emit_report(const DecisionLog& log, const std::filesystem::path& output_dir) {
  write_text_file(output_dir / "decision.json", dump(to_json(log)));
  write_text_file(output_dir / "summary.md", summary_markdown(log));
  for (const auto& s : log.stages) {
    for (const auto& c : s.charts) write_text_file(output_dir / stage_directory(s.index, s.stage) / c.name, c.content);
  }
}

}  // namespace funnelkit
