#include <benchmark/benchmark.h>

#include <random>

#include "tsnfabric/allocator.hpp"
#include "tsnfabric/analytics.hpp"
#include "tsnfabric/network.hpp"
#include "tsnfabric/sim.hpp"

namespace {

using namespace tsnfabric;

// Fabric cycles per second under Bernoulli load.
void BM_NetworkCycles(benchmark::State& state) {
  SimConfig cfg;
  cfg.injection_rate = static_cast<double>(state.range(0)) / 100.0;
  cfg.high_priority_fraction = 0.5;
  const auto topo = cfg.topology.build().topology;
  Network net(topo, {cfg.priority_mode, cfg.scheme, cfg.link_latency}, cfg.seed);
  TrafficGenerator gen(cfg, topo.terminals());
  Cycle now = 0;
  for (auto _ : state) {
    for (const auto& p : gen.generate()) net.create_packet(p.src, p.dst, p.priority, 1, now, false);
    net.step(now++);
  }
  state.SetItemsProcessed(state.iterations());
  state.counters["ejected"] = static_cast<double>(net.packets_ejected());
}
BENCHMARK(BM_NetworkCycles)->Arg(10)->Arg(50)->Arg(90);

void BM_RunSimulation(benchmark::State& state) {
  SimConfig cfg;
  cfg.injection_rate = 0.4;
  cfg.warmup_cycles = 1000;
  cfg.measure_cycles = 5000;
  cfg.max_drain_cycles = 5000;
  for (auto _ : state) benchmark::DoNotOptimize(run_simulation(cfg));
}
BENCHMARK(BM_RunSimulation)->Unit(benchmark::kMillisecond);

void BM_SeparableAllocator(benchmark::State& state) {
  const int ports = static_cast<int>(state.range(0));
  const int vcs = 2;
  std::mt19937_64 gen(1);
  std::vector<std::vector<AllocRequest>> batches(64);
  for (auto& b : batches) {
    for (int g = 0; g < ports; ++g) {
      for (int v = 0; v < vcs; ++v) {
        if (gen() % 2) b.push_back({g, v, static_cast<int>(gen() % ports), gen() % 2 ? Priority::High : Priority::Low});
      }
    }
  }
  SeparableAllocator alloc(ports, vcs, ports);
  std::size_t i = 0;
  for (auto _ : state) {
    auto grants = alloc.allocate(batches[i++ % batches.size()], true);
    benchmark::DoNotOptimize(grants.data());
  }
}
BENCHMARK(BM_SeparableAllocator)->Arg(4)->Arg(8)->Arg(32);

void BM_MonteCarloReliability(benchmark::State& state) {
  const int ports = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(terminal_reliability_monte_carlo(ports, 0.9, 10000, 1).connected);
  }
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_MonteCarloReliability)->Arg(8)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
