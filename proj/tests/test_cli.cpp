#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "funnelkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = funnelkit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fixture(const std::string& name) {
  return (std::filesystem::path(FUNNELKIT_FIXTURE_DIR) / "funnel" / (name + ".toml")).string();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Small config so single-stage runs stay fast.
std::filesystem::path small_config(const std::string& name) {
  const auto dir = fktest::scratch_dir(name);
  std::ofstream f(dir / "small.toml");
  f << R"(seed = 5
stages = ["offline_verify", "abtest"]
control = "prod"
candidate = "cand"
[world]
n_users = 200
n_queries = 600
[variants.prod]
weights = [1.0, 0.5, 0.5, 0.5, 0.5, 0.5]
[variants.cand]
weights = [0.5, 1.0, 1.0, 1.0, 1.0, 1.0]
)";
  return dir / "small.toml";
}

class EnvGuard {
 public:
  explicit EnvGuard(const char* value) {
    if (value) {
      ::setenv("FUNNELKIT_SEED", value, 1);
    } else {
      ::unsetenv("FUNNELKIT_SEED");
    }
  }
  ~EnvGuard() { ::unsetenv("FUNNELKIT_SEED"); }
};

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EnvGuard env(nullptr);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"teleport"}).code, 2);
  EXPECT_EQ(run({"verify"}).code, 2);
  EXPECT_EQ(run({"verify", "--config", "x.toml", "--format", "yaml"}).code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
  EnvGuard env(nullptr);
  auto r = run({"verify", "--config", "/nonexistent/funnelkit.toml"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/funnelkit.toml"), std::string::npos) << r.err;

  const auto dir = fktest::scratch_dir("cli_bad_config");
  {
    std::ofstream f(dir / "bad.toml");
    f << "stages = [\"offline_verify\"]\nsurprise = true\ncontrol = \"a\"\ncandidate = \"b\"\n"
      << "[variants.a]\nweights = [1.0]\n[variants.b]\nweights = [2.0]\n";
  }
  r = run({"verify", "--config", (dir / "bad.toml").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("surprise"), std::string::npos) << r.err;
}

TEST(Cli, FunnelExitCodes) {
  EnvGuard env(nullptr);
  const auto out = fktest::scratch_dir("cli_funnel");
  auto r = run({"funnel", "--config", fixture("shortcut_verify"), "--out", (out / "a").string()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("changes-something"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out / "a" / "decision.json"));

  r = run({"funnel", "--config", fixture("ship"), "--out", (out / "b").string(), "--format", "csv"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, SingleStagePrintsStatistics) {
  EnvGuard env(nullptr);
  const auto cfg = small_config("cli_stage");
  auto r = run({"verify", "--config", cfg.string(), "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "stat,value");
  EXPECT_NE(r.out.find("overall.width,"), std::string::npos);

  r = run({"verify", "--config", cfg.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"stage\": \"offline_verify\""), std::string::npos);
}

TEST(Cli, SeedFromEnvironment) {
  const auto cfg = small_config("cli_seed");
  std::string env_out, flag_out, default_out;
  {
    EnvGuard env("77");
    auto r = run({"abtest", "--config", cfg.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    env_out = r.out;
    // The flag wins over the environment.
    auto f = run({"abtest", "--config", cfg.string(), "--seed", "5"});
    ASSERT_EQ(f.code, 0);
    default_out = f.out;
  }
  {
    EnvGuard env(nullptr);
    auto r = run({"abtest", "--config", cfg.string(), "--seed", "77"});
    ASSERT_EQ(r.code, 0);
    flag_out = r.out;
    EXPECT_EQ(run({"abtest", "--config", cfg.string()}).out, default_out);
  }
  EXPECT_EQ(env_out, flag_out);
  EXPECT_NE(env_out, default_out);

  EnvGuard bad("seven");
  auto r = run({"abtest", "--config", cfg.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("FUNNELKIT_SEED"), std::string::npos);
}

TEST(Cli, SameArgvSameFiles) {
  EnvGuard env(nullptr);
  const auto cfg = small_config("cli_determinism");
  const auto out = fktest::scratch_dir("cli_determinism_out");
  ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--out", (out / "a").string()}).code, 0);
  ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--out", (out / "b").string()}).code, 0);
  for (const char* f : {"world.txt", "counterfactual.jsonl", "interactions.jsonl", "judgments.jsonl"}) {
    const std::string a = slurp(out / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(out / "b" / f)) << f;
  }
}

TEST(CliGolden, HelpText) {
  auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(std::filesystem::path(FUNNELKIT_GOLDEN_DIR) / "help.txt"));
  for (const char* cmd : {"simulate", "reconstruct-check", "verify", "validate-offline", "abtest", "interleave",
                          "bandit", "bo", "funnel"}) {
    auto h = run({cmd, "--help"});
    EXPECT_EQ(h.code, 0) << cmd;
    EXPECT_EQ(h.out, slurp(std::filesystem::path(FUNNELKIT_GOLDEN_DIR) / (std::string("help_") + cmd + ".txt")))
        << cmd;
  }
}
