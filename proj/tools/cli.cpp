#include "cli.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "funnelkit/config.hpp"
#include "funnelkit/funnel.hpp"
#include "funnelkit/jsonl.hpp"
#include "funnelkit/parallel.hpp"

namespace funnelkit::cli {
namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 1;

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::string format = "json";
  unsigned threads = 0;
};

void add_common(CLI::App* sub, Options& o, bool config_required = true) {
  auto* c = sub->add_option("--config", o.config, "TOML configuration file");
  if (config_required) c->required();
  sub->add_option("--out", o.out, "Output directory (default: print to standard output)");
  sub->add_option("--seed", o.seed, "Master seed (fallback: FUNNELKIT_SEED, then the config file)");
  sub->add_option("--format", o.format, "Standard output format")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--threads", o.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
}

std::string stats_csv(const StatMap& stats) {
  std::ostringstream ss;
  ss.precision(12);
  ss << "stat,value\n";
  for (const auto& [k, v] : stats) ss << k << ',' << v << '\n';
  return ss.str();
}

// Writes a single stage's outputs to `dir`, or prints them.
void emit_stage(const FunnelConfig& config, const StageOutput& out, const std::vector<GateOutcome>& gates,
                const Options& o, std::ostream& stdout_) {
  nlohmann::ordered_json report;
  report["stage"] = std::string(to_string(out.stage));
  nlohmann::ordered_json stats = nlohmann::ordered_json::object();
  for (const auto& [k, v] : out.statistics) stats[k] = json_number(v);
  report["statistics"] = std::move(stats);
  report["report"] = out.report;
  report["gates"] = nlohmann::ordered_json::array();
  for (const auto& g : gates) report["gates"].push_back(to_json(g));
  report["notes"] = out.notes;
  if (!o.out.empty()) {
    const std::filesystem::path dir(o.out);
    write_text_file(dir / "report.json", report.dump(2) + "\n");
    for (const auto& f : out.files) write_text_file(dir / f.name, f.content);
    for (const auto& f : out.charts) write_text_file(dir / f.name, f.content);
    return;
  }
  (void)config;
  if (o.format == "csv") {
    stdout_ << (out.files.empty() ? stats_csv(out.statistics) : out.files.front().content);
  } else {
    stdout_ << report.dump(2) << '\n';
  }
}

int run_single_stage(FunnelConfig& config, Stage stage, const Options& o, std::ostream& out) {
  FunnelContext ctx(config);
  const StageOutput result = run_stage(config, stage, ctx);
  std::vector<Criterion> criteria;
  for (const auto& rc : config.criteria) {
    if (rc.stage == stage && rc.source == stage) criteria.push_back(rc.criterion);
  }
  const auto gates = evaluate_gates(result.statistics, criteria);
  emit_stage(config, result, gates, o, out);
  return 0;
}

int run_simulate(const FunnelConfig& config, const Options& o, std::ostream& out) {
  FunnelContext ctx(config);
  const World& world = ctx.world();
  if (o.out.empty()) {
    out << serialize_world(world);
    return 0;
  }
  const std::filesystem::path dir(o.out);
  write_text_file(dir / "world.txt", serialize_world(world));
  write_text_file(dir / "counterfactual.jsonl", serialize_log(ctx.records()));
  write_text_file(dir / "interactions.jsonl", serialize_log(ctx.interactions()));
  write_text_file(dir / "judgments.jsonl", serialize_log(ctx.judgments()));
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"funnelkit: evaluation funnel for search and recommendation changes", "funnelkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "funnelkit 0.1.0");
  Options o;

  struct Command {
    const char* name;
    const char* help;
    std::optional<Stage> stage;
  };
  const Command commands[] = {
      {"simulate", "Generate the simulated world and its production logs", std::nullopt},
      {"reconstruct-check", "Check counterfactual reconstruction against served results",
       Stage::reconstruction_quality},
      {"verify", "Offline verification: width and depth of the candidate's changes", Stage::offline_verify},
      {"validate-offline", "Offline validation with IPS-weighted ranking metrics", Stage::offline_validate},
      {"abtest", "Simulated A/B test with sequential guardrail monitoring", Stage::abtest},
      {"interleave", "Team-draft interleaving preference test", Stage::interleave},
      {"bandit", "Thompson-sampling bandit over control and candidate", Stage::bandit},
      {"bo", "Bayesian optimization of the candidate's parameters", Stage::bo},
      {"funnel", "Run every configured stage with criteria gates", std::nullopt},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, o);
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsage;
  }

  const CLI::App* chosen = nullptr;
  const Command* command = nullptr;
  for (const auto& [sub, c] : subs) {
    if (sub->parsed()) {
      chosen = sub;
      command = c;
    }
  }
  std::optional<std::uint64_t> seed;
  if (chosen->count("--seed") > 0) {
    seed = o.seed;
  } else if (const char* env = std::getenv("FUNNELKIT_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string_view(env).size()) throw std::invalid_argument(env);
      seed = v;
    } catch (const std::exception&) {
      err << "error: FUNNELKIT_SEED must be an unsigned integer, got '" << env << "'\n";
      return kUsage;
    }
  }

  try {
    set_thread_count(o.threads);
    FunnelConfig config = load_config(o.config);
    if (seed) apply_seed(config, *seed);
    if (!o.out.empty()) config.output_dir = o.out;

    const std::string name = command->name;
    if (name == "simulate") return run_simulate(config, o, out);
    if (command->stage) return run_single_stage(config, *command->stage, o, out);

    const DecisionLog log = run_funnel(config);
    emit_report(log, config.output_dir);
    if (o.format == "json") {
      out << to_json(log).dump(2) << '\n';
    }
    if (log.failure) err << "funnel: " << log.failure->message << '\n';
    if (!log.error.empty()) err << "funnel: " << log.error << '\n';
    err << "funnel verdict: " << to_string(log.verdict) << " (report in " << config.output_dir.string() << ")\n";
    return exit_code(log.verdict);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace funnelkit::cli
