#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dynrisk/assignment.hpp"
#include "dynrisk/processes.hpp"
#include "dynrisk/rearrange.hpp"
#include "dynrisk/space.hpp"
#include "dynrisk/utility.hpp"
#include "dynrisk/worstcase.hpp"

using namespace dynrisk;

namespace {

std::vector<std::vector<double>> random_weights(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::vector<double>> w(n, std::vector<double>(n));
  for (auto& row : w)
    for (double& v : row) v = uniform01(rng);
  return w;
}

// Binary tree of the given depth, so M = 2^depth.
SpacePtr binary_tree(int depth) { return make_space(FiniteFilteredSpace::tree(std::vector<std::size_t>(depth, 2))); }

// Values in {0, 1} per atom: small rearrangement classes.
AdaptedProcess coin_process(const SpacePtr& sp, int t0, std::mt19937_64& rng) {
  auto x = random_adapted(sp, t0, sp->horizon(), rng, 0.0, 2.0);
  auto rows = x.rows();
  for (auto& r : rows)
    for (double& v : r) v = v < 1.0 ? 0.0 : 1.0;
  return AdaptedProcess(sp, t0, std::move(rows));
}

}  // namespace

static void BM_Assignment(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto w = random_weights(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve_assignment_max(w).value);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Assignment)->RangeMultiplier(2)->Range(8, 256)->Complexity(benchmark::oNCubed);

static void BM_CondExpect(benchmark::State& state) {
  const auto sp = binary_tree(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(2);
  std::vector<double> y(sp->outcome_count());
  for (double& v : y) v = uniform01(rng);
  const int t = sp->horizon() / 2;
  for (auto _ : state) benchmark::DoNotOptimize(cond_expect(*sp, y, t));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size()));
}
BENCHMARK(BM_CondExpect)->DenseRange(4, 16, 4);

static void BM_MaxCorrelationVsAssignment(benchmark::State& state) {
  const auto sp = binary_tree(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(3);
  const auto x = coin_process(sp, 1, rng);
  const auto a = DensityProcess::uniform(sp, 1, sp->horizon());
  const bool exact = state.range(1) == 1;
  for (auto _ : state) {
    if (exact) {
      benchmark::DoNotOptimize(max_correlation(a, x, 1).value);
    } else {
      benchmark::DoNotOptimize(lap_upper_bound(a, x, 1));
    }
  }
  state.SetLabel(exact ? "class enumeration" : "assignment bound");
}
BENCHMARK(BM_MaxCorrelationVsAssignment)->ArgsProduct({{2, 3}, {0, 1}});

static void BM_WorstPortfolio(benchmark::State& state) {
  const auto sp = binary_tree(2);
  std::mt19937_64 rng(4);
  std::vector<AdaptedProcess> xs;
  for (int i = 0; i < state.range(0); ++i) xs.push_back(coin_process(sp, 0, rng));
  const UtilityFunction u = EntropicUtility(sp, 1.0, 0, sp->horizon());
  WorstPortfolioOptions opts;
  opts.workers = static_cast<std::size_t>(state.range(1));
  std::size_t searched = 0;
  for (auto _ : state) {
    const auto res = worst_portfolio_bruteforce(Portfolio(xs), u, opts);
    searched = res.search_size;
    benchmark::DoNotOptimize(res.sup_value);
  }
  state.counters["tuples"] = static_cast<double>(searched);
}
BENCHMARK(BM_WorstPortfolio)->ArgsProduct({{2, 3}, {1, 4}})->UseRealTime();

static void BM_PenaltyLp(benchmark::State& state) {
  const auto sp = binary_tree(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(5);
  std::vector<Scenario> sc;
  for (int i = 0; i < 4; ++i) {
    auto inc = random_adapted(sp, 0, sp->horizon(), rng, 0.1, 1.0);
    std::vector<double> mass(sp->outcome_count(), 0.0);
    for (int s = 0; s <= sp->horizon(); ++s)
      for (std::size_t w = 0; w < mass.size(); ++w) mass[w] += inc(s, w);
    double total = 0.0;
    for (std::size_t w = 0; w < mass.size(); ++w) total += sp->prob(w) * mass[w];
    inc *= 1.0 / total;
    sc.push_back({DensityProcess(inc), ConditionalValue(0, {i == 0 ? 0.0 : -uniform01(rng)})});
  }
  const DualFiniteUtility u(sc);
  const auto a = DensityProcess::uniform(sp, 0, sp->horizon());
  for (auto _ : state) benchmark::DoNotOptimize(penalty(u, a));
}
BENCHMARK(BM_PenaltyLp)->DenseRange(1, 3);
BENCHMARK_MAIN();
