// Serial reference path against the OpenMP path for the heavy kernels.
// Run with --benchmark_filter=<name> to pick one.

#include <benchmark/benchmark.h>

#include "qss/ingest.hpp"
#include "qss/langevin.hpp"
#include "qss/synth.hpp"

namespace {

using qss::Execution;

struct Market {
  qss::ReturnPanel returns;
  qss::SectorIndex index;
};

const Market& market() {
  static const Market m = [] {
    qss::ScenarioSpec spec;
    spec.sectors = 5;
    spec.stocks_per_sector = 20;
    spec.regimes = {{"flat", qss::Matrix(5, 5)}};
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t b = 0; b < 5; ++b)
        spec.regimes[0].sector_correlation(a, b) = a == b ? 0.4 : 0.1;
    spec.schedule = {{0, 2000}};
    const auto data = qss::generate_scenario(spec);
    auto returns = qss::local_normalize(qss::compute_returns(data.prices, 1), 13);
    auto index = qss::SectorIndex::build(data.sectors, returns.tickers);
    return Market{std::move(returns), std::move(index)};
  }();
  return m;
}

const std::vector<double>& ou_series() {
  static const auto x = qss::simulate_ou({0.5, 1.9, 0.1, 1.9, 1.0, 100000, 1});
  return x;
}

Execution mode(const benchmark::State& state) {
  return state.range(0) ? Execution::parallel : Execution::serial;
}

void state_points(benchmark::State& state) {
  const auto& m = market();
  for (auto _ : state)
    benchmark::DoNotOptimize(qss::rolling_state_points(m.returns, m.index, 42, 1, mode(state)));
}
BENCHMARK(state_points)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void moments(benchmark::State& state) {
  const auto& x = ou_series();
  const auto grid = qss::default_grid(x);
  const double h = qss::silverman_bandwidth(x);
  const std::vector<std::size_t> taus{1, 2, 3};
  for (auto _ : state)
    benchmark::DoNotOptimize(qss::conditional_moments(x, taus, grid, h, mode(state)));
}
BENCHMARK(moments)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void potentials(benchmark::State& state) {
  const std::span<const double> x(ou_series().data(), 20000);
  for (auto _ : state)
    benchmark::DoNotOptimize(qss::sliding_potentials(x, 1000, 21, {}, mode(state)));
}
BENCHMARK(potentials)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
