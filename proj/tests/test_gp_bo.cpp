#include <gtest/gtest.h>

#include <cmath>

#include "funnelkit/bo.hpp"
#include "funnelkit/error.hpp"
#include "funnelkit/gp.hpp"
#include "funnelkit/rng.hpp"
#include "funnelkit/simworld.hpp"
#include "support.hpp"

using namespace funnelkit;

namespace {

// Plain Gaussian elimination with partial pivoting, no Eigen.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

double k1(double x, double y, const KernelParams& p) {
  const double d = (x - y) / p.length_scale;
  return p.signal_variance * std::exp(-0.5 * d * d);
}

double dense_mean(const std::vector<double>& xs, const std::vector<double>& ys, double x, const KernelParams& p) {
  std::vector<std::vector<double>> k(xs.size(), std::vector<double>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xs.size(); ++j) k[i][j] = k1(xs[i], xs[j], p) + (i == j ? p.noise_variance : 0.0);
  }
  const auto alpha = dense_solve(k, ys);
  double m = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) m += k1(x, xs[i], p) * alpha[i];
  return m;
}

double top_k_share(std::span<const CounterfactualRecord> recs, const Scorer& s, int k) {
  double hit = 0.0, total = 0.0;
  for (const auto& r : recs) {
    for (const auto& id : reconstruct(r, s, k).items) {
      for (const auto& c : r.candidates) {
        if (c.item == id) hit += c.attributes.count("kind") && c.attributes.at("kind") == "podcast";
      }
      total += 1.0;
    }
  }
  return hit / total;
}

}  // namespace

TEST(Gp, InterpolatesWithoutNoise) {
  KernelParams p{1.0, 0.2, 0.0};
  std::vector<std::vector<double>> pts = {{0.1}, {0.4}, {0.8}};
  std::vector<double> ys = {0.5, -0.3, 1.2};
  auto m = gp_fit(pts, ys, p);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto pr = gp_predict(m, pts[i]);
    EXPECT_NEAR(pr.mean, ys[i], 1e-8);
    EXPECT_LE(pr.variance, 1e-8);
  }
}

TEST(Gp, RevertsToPriorFarFromData) {
  KernelParams p{2.0, 0.05, 1e-6};
  auto m = gp_fit({{0.0}, {0.02}}, std::vector<double>{1.5, 1.4}, p);
  const std::vector<double> far = {0.6};  // more than 10 length scales away
  auto pr = gp_predict(m, far);
  EXPECT_NEAR(pr.mean, 0.0, 1e-6);
  EXPECT_NEAR(pr.variance, 2.0, 0.02);
}

TEST(Gp, MatchesDenseOracleOnQuadratic) {
  KernelParams p{1.0, 0.3, 1e-4};
  const std::vector<double> xs = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> ys;
  std::vector<std::vector<double>> pts;
  for (double x : xs) {
    ys.push_back(-(x - 0.3) * (x - 0.3) + 0.2);
    pts.push_back({x});
  }
  auto m = gp_fit(pts, ys, p);
  for (double x : {0.125, 0.375, 0.625, 0.875}) {
    const std::vector<double> q = {x};
    EXPECT_NEAR(gp_predict(m, q).mean, dense_mean(xs, ys, x, p), 1e-8);
  }
}

TEST(Gp, Errors) {
  KernelParams p;
  EXPECT_THROW(gp_fit({}, std::vector<double>{}, p), Error);
  EXPECT_THROW(gp_fit({{0.1}}, std::vector<double>{1.0, 2.0}, p), Error);
  EXPECT_THROW(gp_fit({{0.1}, {0.2, 0.3}}, std::vector<double>{1.0, 2.0}, p), Error);
  EXPECT_THROW(gp_fit({{0.1}}, std::vector<double>{1.0}, KernelParams{1.0, 0.0, 1e-6}), Error);
  auto m = gp_fit({{0.1}}, std::vector<double>{1.0}, p);
  EXPECT_THROW(gp_predict(m, std::vector<double>{0.1, 0.2}), Error);
}

TEST(Gp, DuplicatePointsNeedJitter) {
  KernelParams p{1.0, 0.2, 0.0};
  auto m = gp_fit({{0.5}, {0.5}}, std::vector<double>{1.0, 1.0}, p);
  EXPECT_GT(m.jitter(), 0.0);
  EXPECT_NEAR(gp_predict(m, std::vector<double>{0.5}).mean, 1.0, 1e-4);
}

TEST(GpProperty, VarianceNonNegative) {
  RngStream rng(7, "gp-prop");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.below(3);
    const std::size_t n = 1 + rng.below(12);
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    std::vector<double> ys(n);
    for (auto& pt : pts) {
      for (auto& v : pt) v = rng.uniform();
    }
    for (auto& y : ys) y = rng.normal();
    KernelParams p{0.1 + rng.uniform() * 3.0, 0.05 + rng.uniform(), rng.bernoulli(0.5) ? 0.0 : 1e-3};
    auto m = gp_fit(pts, ys, p);
    for (int q = 0; q < 50; ++q) {
      std::vector<double> x(d);
      for (auto& v : x) v = rng.uniform();
      const auto pr = gp_predict(m, x);
      ASSERT_GE(pr.variance, 0.0);
      ASSERT_LE(pr.variance, p.signal_variance * (1.0 + 1e-9));
      ASSERT_GE(expected_improvement(m, x, rng.normal()), 0.0);
    }
  }
}

TEST(ExpectedImprovement, Examples) {
  EXPECT_EQ(expected_improvement(0.4, 0.0, 0.4), 0.0);
  EXPECT_NEAR(expected_improvement(0.4, 2.0, 0.4), 2.0 * 0.3989422804014327, 1e-12);
  EXPECT_NEAR(expected_improvement(5.0, 1e-9, 1.0), 4.0, 1e-9);
  EXPECT_EQ(expected_improvement(0.3, 0.0, 0.9), 0.0);
  EXPECT_NEAR(expected_improvement(1.2, 0.0, 0.2), 1.0, 1e-15);
}

TEST(ExpectedImprovementProperty, NonNegative) {
  RngStream rng(8, "ei-prop");
  for (int i = 0; i < 100000; ++i) {
    const double mu = rng.normal() * 3.0;
    const double sigma = rng.bernoulli(0.1) ? 0.0 : std::abs(rng.normal());
    const double best = rng.normal() * 3.0;
    const double ei = expected_improvement(mu, sigma, best);
    ASSERT_GE(ei, 0.0);
    if (sigma == 0.0 && mu <= best) {
      ASSERT_EQ(ei, 0.0);
    }
  }
}

TEST(Halton, KnownPoints) {
  EXPECT_EQ(halton_point(1, 2), (std::vector<double>{0.5, 1.0 / 3.0}));
  EXPECT_EQ(halton_point(2, 2), (std::vector<double>{0.25, 2.0 / 3.0}));
  const auto p3 = halton_point(3, 3);
  EXPECT_DOUBLE_EQ(p3[0], 0.75);
  EXPECT_DOUBLE_EQ(p3[1], 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(p3[2], 3.0 / 5.0);
}

TEST(Bo, GenericMaximizerFindsPeak) {
  auto obj = [](std::span<const double> u, std::size_t) {
    BoObservation o;
    o.unit.assign(u.begin(), u.end());
    o.values = o.unit;
    o.utility = -(u[0] - 0.3) * (u[0] - 0.3);
    return o;
  };
  BoConfig c;
  auto r = run_bo(1, obj, c);
  EXPECT_EQ(r.history.size(), 25u);
  EXPECT_NEAR(r.best_unit[0], 0.3, 0.02);
  EXPECT_THROW(run_bo(0, obj, c), Error);
  c.budget = 0;
  EXPECT_THROW(run_bo(1, obj, c), Error);
}

TEST(Bo, BudgetOfInitialDesignReturnsBestOfDesign) {
  auto obj = [](std::span<const double> u, std::size_t) {
    BoObservation o;
    o.unit.assign(u.begin(), u.end());
    o.values = o.unit;
    o.utility = -std::abs(u[0] - 0.6);
    return o;
  };
  BoConfig c;
  c.budget = 5;
  auto r = run_bo(1, obj, c);
  ASSERT_EQ(r.history.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.history[i].unit, halton_point(i + 1, 1));
  double best = -1e9;
  for (const auto& o : r.history) best = std::max(best, o.utility);
  EXPECT_EQ(r.best_utility, best);

  c.budget = 1;
  r = run_bo(1, obj, c);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.best_index, 0u);
}

class BoOffline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    WorldConfig wc;
    wc.n_queries = 400;
    world_ = new World(generate_world(wc));
    logs_ = new SimulatedLogs(simulate_logs(*world_, fktest::scorer("prod", {0.5, 1, 1, 1, 1, 1}), 10, 1));
  }
  static void TearDownTestSuite() {
    delete logs_;
    delete world_;
  }
  static ScorerTemplate boost_template(const std::string& value) {
    ScorerTemplate t;
    t.base = fktest::scorer("cand", {0.5, 1, 1, 1, 1, 1}, {{"kind", value, 0.0}});
    t.parameters.push_back({"podcast_boost", TemplateParameter::Target::boost, 0, 0.0, 2.0});
    return t;
  }
  static World* world_;
  static SimulatedLogs* logs_;
};
World* BoOffline::world_ = nullptr;
SimulatedLogs* BoOffline::logs_ = nullptr;

TEST_F(BoOffline, MatchesGridOracleAtBoundaryTarget) {
  const auto tmpl = boost_template("podcast");
  const std::vector<double> hi = {1.0};
  const double target = top_k_share(logs_->records, tmpl.instantiate(hi), 10);
  double oracle = 1e9;
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> u = {i / 199.0};
    oracle = std::min(oracle, std::abs(top_k_share(logs_->records, tmpl.instantiate(u), 10) - target));
  }
  BoConfig c;
  auto r = run_bo_offline(logs_->records, tmpl, "kind", "podcast", target, 10, c);
  EXPECT_LE(r.history.size(), 25u);
  const double got = top_k_share(logs_->records, tmpl.instantiate(r.best_unit), 10);
  EXPECT_NEAR(got, r.history[r.best_index].aux, 1e-12);
  EXPECT_LE(std::abs(got - target), oracle + 0.02);
  EXPECT_NEAR(r.best_utility, -(got - target) * (got - target), 1e-12);
}

TEST_F(BoOffline, FlatSurface) {
  const auto tmpl = boost_template("no_such_kind");
  BoConfig c;
  c.budget = 8;
  auto r = run_bo_offline(logs_->records, tmpl, "kind", "podcast", 0.5, 10, c);
  EXPECT_LE(r.utility_spread, 1e-6);
  EXPECT_TRUE(r.flat_surface);
  auto stats = bo_statistics(r, tmpl);
  EXPECT_EQ(stats.at("flat_surface"), 1.0);
  EXPECT_EQ(stats.at("evaluations"), 8.0);
  EXPECT_TRUE(is_bo_statistic("best.podcast_boost", tmpl));
  EXPECT_FALSE(is_bo_statistic("best.other", tmpl));
  const std::string csv = bo_history_csv(r, tmpl);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,podcast_boost,utility,aux");
}

TEST_F(BoOffline, Deterministic) {
  const auto tmpl = boost_template("podcast");
  BoConfig c;
  c.budget = 10;
  auto a = run_bo_offline(logs_->records, tmpl, "kind", "podcast", 0.3, 10, c);
  auto b = run_bo_offline(logs_->records, tmpl, "kind", "podcast", 0.3, 10, c);
  EXPECT_EQ(to_json(a, tmpl).dump(), to_json(b, tmpl).dump());
}

TEST_F(BoOffline, OnlineBudgetOneAndZeroEffect) {
  const auto control = fktest::scorer("prod", {0.5, 1, 1, 1, 1, 1});
  const auto tmpl = boost_template("no_such_kind");
  AbTestConfig ab;
  ab.n_users = 300;
  BoConfig c;
  c.budget = 1;
  auto r = run_bo_online(*world_, control, tmpl, ab, c);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.best_index, 0u);

  c.budget = 10;
  r = run_bo_online(*world_, control, tmpl, ab, c);
  EXPECT_EQ(r.history.size(), 10u);
  EXPECT_TRUE(r.flat_surface);
}

TEST(ScorerTemplateTest, InstantiateMapsUnitInterval) {
  ScorerTemplate t;
  t.base = fktest::scorer("s", {1.0, 2.0}, {{"kind", "podcast", 0.0}});
  t.parameters = {{"w1", TemplateParameter::Target::weight, 1, -1.0, 3.0},
                  {"b", TemplateParameter::Target::boost, 0, 0.0, 0.5}};
  const std::vector<double> u = {0.25, 1.0};
  auto s = t.instantiate(u);
  EXPECT_DOUBLE_EQ(s.weights[1], 0.0);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(s.boosts[0].boost, 0.5);
  EXPECT_THROW(t.instantiate(std::vector<double>{0.5}), Error);
  t.parameters[0].index = 7;
  EXPECT_THROW(t.instantiate(u), Error);
}
