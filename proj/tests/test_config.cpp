#include <gtest/gtest.h>

#include <fstream>

#include "funnelkit/config.hpp"
#include "support.hpp"

using namespace funnelkit;
using Kind = FunnelConfigError::Kind;

namespace {

const std::string kVariants = R"(
control = "prod"
candidate = "cand"
[variants.prod]
weights = [1.0, 0.5]
[variants.cand]
weights = [0.5, 1.0]
)";

// Parses and returns the error kind, or nullopt if parsing succeeded.
std::optional<Kind> kind_of(const std::string& text, std::string* message = nullptr) {
  try {
    parse_config(text);
  } catch (const FunnelConfigError& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace

TEST(Config, Minimal) {
  auto c = parse_config("stages = [\"offline_verify\"]\n" + kVariants);
  EXPECT_EQ(c.stages, std::vector<Stage>{Stage::offline_verify});
  EXPECT_EQ(c.control_scorer().weights, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(c.candidate_scorer().variant.name, "cand");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.world.seed, 1u);
  EXPECT_TRUE(c.criteria.empty());
}

TEST(Config, SeedPropagatesUnlessWorldSeedIsExplicit) {
  auto c = parse_config("seed = 42\nstages = [\"abtest\"]\n" + kVariants);
  EXPECT_EQ(c.world.seed, 42u);
  EXPECT_EQ(c.abtest.seed, 42u);
  apply_seed(c, 7);
  EXPECT_EQ(c.world.seed, 7u);
  EXPECT_EQ(c.bandit.config.seed, 7u);

  c = parse_config("seed = 42\nstages = [\"abtest\"]\n" + kVariants + "[world]\nseed = 3\n");
  apply_seed(c, 7);
  EXPECT_EQ(c.world.seed, 3u);
  EXPECT_EQ(c.abtest.seed, 7u);
}

TEST(Config, ErrorKinds) {
  EXPECT_EQ(kind_of("stages = [\"offline_verify\"\n"), Kind::syntax);
  EXPECT_EQ(kind_of("stages = [\"offline_verify\"]\nbogus = 1\n" + kVariants), Kind::unknown_key);
  EXPECT_EQ(kind_of("stages = [\"teleport\"]\n" + kVariants), Kind::unknown_stage);
  EXPECT_EQ(kind_of("stages = [\"offline_verify\"]\ncontrol = \"ghost\"\n[variants.candidate]\nweights = [1.0]\n"),
            Kind::missing_variant);
  EXPECT_EQ(kind_of("stages = [\"abtest\"]\n" + kVariants + "[abtest]\nalpha = 1.5\n"), Kind::invalid_value);
  EXPECT_EQ(kind_of("stages = []\n" + kVariants), Kind::invalid_value);

  std::string msg;
  EXPECT_EQ(kind_of("stages = [\"offline_verify\"]\n" + kVariants + "[world]\nn_itmes = 5\n", &msg), Kind::unknown_key);
  EXPECT_NE(msg.find("world.n_itmes"), std::string::npos) << msg;
}

TEST(Config, DanglingStatistic) {
  const std::string text = "stages = [\"offline_verify\"]\n" + kVariants + R"(
[[criteria]]
id = "c1"
stage = "offline_verify"
stat = "overall.nonsense"
cmp = ">="
threshold = 0.1
)";
  std::string msg;
  EXPECT_EQ(kind_of(text, &msg), Kind::dangling_statistic);
  EXPECT_NE(msg.find("overall.nonsense"), std::string::npos);
}

TEST(Config, LaterStageReferenceNamesBothStages) {
  const std::string text = "stages = [\"offline_verify\", \"abtest\"]\n" + kVariants + R"(
[[criteria]]
id = "too-early"
stage = "offline_verify"
stat = "abtest.success_rate.ci_low"
cmp = ">"
threshold = 0.0
)";
  std::string msg;
  EXPECT_EQ(kind_of(text, &msg), Kind::later_stage_reference);
  EXPECT_NE(msg.find("offline_verify"), std::string::npos) << msg;
  EXPECT_NE(msg.find("abtest"), std::string::npos) << msg;
}

TEST(Config, EarlierStageStatisticResolves) {
  const std::string text = "stages = [\"offline_verify\", \"abtest\"]\n" + kVariants + R"(
[[criteria]]
id = "carry"
stage = "abtest"
stat = "overall.width"
cmp = ">="
threshold = 0.0
)";
  auto c = parse_config(text);
  ASSERT_EQ(c.criteria.size(), 1u);
  EXPECT_EQ(c.criteria[0].stage, Stage::abtest);
  EXPECT_EQ(c.criteria[0].source, Stage::offline_verify);
  EXPECT_EQ(c.criteria_for(Stage::abtest).size(), 1u);
  EXPECT_TRUE(c.criteria_for(Stage::offline_verify).empty());
}

TEST(Config, TwoSufficientStages) {
  const std::string text = "stages = [\"offline_verify\", \"abtest\"]\n" + kVariants + R"(
[[criteria]]
id = "s1"
stage = "offline_verify"
stat = "overall.width"
cmp = ">="
threshold = 0.1
kind = "sufficient"

[[criteria]]
id = "s2"
stage = "abtest"
stat = "success_rate.ci_low"
cmp = ">"
threshold = 0.0
kind = "sufficient"
)";
  std::string msg;
  EXPECT_EQ(kind_of(text, &msg), Kind::multiple_sufficient_stages);
  EXPECT_NE(msg.find("offline_verify, abtest"), std::string::npos) << msg;
}

TEST(Config, CriterionForStageNotConfigured) {
  const std::string text = "stages = [\"offline_verify\"]\n" + kVariants + R"(
[[criteria]]
id = "x"
stage = "abtest"
stat = "success_rate.ci_low"
cmp = ">"
threshold = 0.0
)";
  EXPECT_EQ(kind_of(text), Kind::unknown_stage);
}

TEST(Config, ControlEqualsCandidateRejected) {
  EXPECT_EQ(kind_of("stages = [\"offline_verify\"]\ncontrol = \"a\"\ncandidate = \"a\"\n[variants.a]\nweights = [1.0]\n"),
            Kind::invalid_value);
}

TEST(Config, LoadResolvesRelativePaths) {
  const auto dir = fktest::scratch_dir("config_load");
  {
    std::ofstream f(dir / "f.toml");
    f << "stages = [\"offline_verify\"]\n" << kVariants << "[data]\ncounterfactual_log = \"logs/cf.jsonl\"\n";
  }
  auto c = load_config(dir / "f.toml");
  ASSERT_TRUE(c.data.counterfactual_log);
  EXPECT_EQ(*c.data.counterfactual_log, dir / "logs/cf.jsonl");
  EXPECT_THROW(load_config(dir / "missing.toml"), Error);
}

TEST(Config, FixturesParse) {
  for (const char* name : {"ship", "shortcut_verify", "guardrail_abort"}) {
    auto c = load_config(std::filesystem::path(FUNNELKIT_FIXTURE_DIR) / "funnel" / (std::string(name) + ".toml"));
    EXPECT_EQ(c.seed, 11u) << name;
  }
}
