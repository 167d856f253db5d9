#include <benchmark/benchmark.h>

#include <vector>

#include "funnelkit/bandit.hpp"
#include "funnelkit/counterfactual.hpp"
#include "funnelkit/gp.hpp"
#include "funnelkit/interleave.hpp"
#include "funnelkit/online_ab.hpp"
#include "funnelkit/similarity.hpp"
#include "funnelkit/simworld.hpp"

using namespace funnelkit;

namespace {

Scorer make_scorer(std::vector<double> w) {
  Scorer s;
  s.variant.name = "bench";
  s.weights = std::move(w);
  return s;
}

const World& small_world() {
  static const World w = generate_world(WorldConfig{});
  return w;
}

ResultList list_of(int offset, int n) {
  ResultList l;
  for (int i = 0; i < n; ++i) l.items.emplace_back("i" + std::to_string((i * 7 + offset) % (2 * n)));
  l.k = n;
  return l;
}

}  // namespace

static void BM_Reconstruct(benchmark::State& state) {
  const auto logs = simulate_logs(small_world(), make_scorer({1, .5, .5, .5, .5, .5}), 10, 1);
  const Scorer s = make_scorer({0.5, 1, 1, 1, 1, 1});
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reconstruct(logs.records[q], s, 10));
    q = (q + 1) % logs.records.size();
  }
}
BENCHMARK(BM_Reconstruct);

static void BM_Similarity(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ResultList a = list_of(0, n), b = list_of(3, n);
  for (auto _ : state) benchmark::DoNotOptimize(similarity(a, b));
}
BENCHMARK(BM_Similarity)->Arg(10)->Arg(100);

static void BM_TeamDraft(benchmark::State& state) {
  const ResultList a = list_of(0, 10), b = list_of(5, 10);
  RngStream rng(1, "bench");
  for (auto _ : state) benchmark::DoNotOptimize(team_draft(a, b, 10, rng));
}
BENCHMARK(BM_TeamDraft);

static void BM_WelchT(benchmark::State& state) {
  RngStream rng(1, "bench");
  std::vector<double> a(state.range(0)), b(state.range(0));
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(welch_t(a, b));
}
BENCHMARK(BM_WelchT)->Arg(1000)->Arg(100000);

static void BM_AbTestReplication(benchmark::State& state) {
  AbTestSimulator sim(small_world(), make_scorer({1, .5, .5, .5, .5, .5}), make_scorer({0.5, 1, 1, 1, 1, 1}), 10);
  AbTestConfig c;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim.run(c));
    ++c.replication;
  }
}
BENCHMARK(BM_AbTestReplication)->Unit(benchmark::kMillisecond);

static void BM_Thompson(benchmark::State& state) {
  BernoulliArms env({0.5, 0.6});
  BanditConfig c;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_bandit(env, static_cast<std::size_t>(state.range(0)), c));
    ++c.replication;
  }
}
BENCHMARK(BM_Thompson)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_GpFitPredict(benchmark::State& state) {
  RngStream rng(1, "bench");
  std::vector<std::vector<double>> pts(state.range(0));
  std::vector<double> ys;
  for (auto& p : pts) {
    p = {rng.uniform(), rng.uniform()};
    ys.push_back(rng.normal());
  }
  const std::vector<double> x = {0.5, 0.5};
  for (auto _ : state) {
    const auto m = gp_fit(pts, ys, KernelParams{1.0, 0.2, 1e-6});
    benchmark::DoNotOptimize(gp_predict(m, x));
  }
}
BENCHMARK(BM_GpFitPredict)->Arg(25)->Arg(100);

static void BM_GenerateWorld(benchmark::State& state) {
  WorldConfig c;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_world(c));
    ++c.seed;
  }
}
BENCHMARK(BM_GenerateWorld)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
