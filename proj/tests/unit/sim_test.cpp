#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "tsnfabric/sim.hpp"

namespace tsnfabric {
namespace {

SimConfig short_config(double rate) {
  SimConfig cfg;
  cfg.injection_rate = rate;
  cfg.warmup_cycles = 1000;
  cfg.measure_cycles = 4000;
  cfg.max_drain_cycles = 4000;
  return cfg;
}

TEST(TrafficGenerator, RateZeroGeneratesNothing) {
  SimConfig cfg;
  cfg.injection_rate = 0.0;
  TrafficGenerator gen(cfg, 8);
  std::size_t total = 0;
  for (int c = 0; c < 1000; ++c) total += gen.generate().size();
  EXPECT_EQ(total, 0u);
}

TEST(TrafficGenerator, RateOneGeneratesEveryCycleAtEveryTerminal) {
  SimConfig cfg;
  cfg.injection_rate = 1.0;
  TrafficGenerator gen(cfg, 8);
  std::size_t total = 0;
  for (int c = 0; c < 1000; ++c) {
    for (const auto& p : gen.generate()) {
      EXPECT_NE(p.src, p.dst);
      ++total;
    }
  }
  EXPECT_EQ(total, 8000u);
}

TEST(TrafficGenerator, BernoulliRateAndUniformDestinations) {
  SimConfig cfg;
  cfg.injection_rate = 0.3;
  cfg.high_priority_fraction = 0.25;
  const int terminals = 8, cycles = 100000;
  TrafficGenerator gen(cfg, terminals);
  std::map<int, int> per_dst;
  std::size_t total = 0, high = 0;
  for (int c = 0; c < cycles; ++c) {
    for (const auto& p : gen.generate()) {
      ASSERT_NE(p.src, p.dst);
      ++per_dst[p.dst];
      ++total;
      high += p.priority == Priority::High;
    }
  }
  const double expected_total = 0.3 * terminals * cycles;
  EXPECT_NEAR(static_cast<double>(total), expected_total, 0.01 * expected_total);
  EXPECT_NEAR(static_cast<double>(high) / static_cast<double>(total), 0.25, 0.01);
  const double per_terminal = expected_total / terminals;
  ASSERT_EQ(per_dst.size(), static_cast<std::size_t>(terminals));
  for (const auto& [dst, n] : per_dst) EXPECT_NEAR(n, per_terminal, 0.03 * per_terminal) << "destination " << dst;
}

TEST(ZeroLoadLatency, PipelinePlusLinks) {
  EXPECT_EQ(zero_load_latency(build_single_stage(8), 1, 1), 6.0);
  EXPECT_EQ(zero_load_latency(build_clos3(2, 2, 4), 1, 1), 16.0);
  EXPECT_EQ(zero_load_latency(build_clos3(2, 2, 4), 4, 1), 19.0);
  EXPECT_EQ(zero_load_latency(build_single_stage(8), 1, 2), 2.0 + 6.0);
}

TEST(LowLoad, MeasuredLatencyMatchesZeroLoad) {
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    auto single = short_config(0.01);
    single.seed = seed;
    single.topology.kind = FabricKind::SingleStage;
    auto multi = short_config(0.01);
    multi.seed = seed;
    const auto rs = run_simulation(single);
    const auto rm = run_simulation(multi);
    EXPECT_NEAR(rs.avg_latency_all, 6.0, 0.05 * 6.0);
    EXPECT_NEAR(rm.avg_latency_all, 16.0, 0.05 * 16.0);
    EXPECT_EQ(rm.zero_load_latency - rs.zero_load_latency, 10.0);
  }
}

// Two terminals on a 2-port switch, each sending to the other every cycle.
TEST(SmallOracle, SaturatedSingleFlitPacketsSeeZeroLoadLatency) {
  const int len = 1;
  Network net(build_single_stage(2), {}, 1);
  std::vector<Cycle> latency;
  net.set_eject_handler([&](const Packet& p) { latency.push_back(p.eject_cycle - p.create_cycle); });
  for (Cycle now = 0; now < 200; ++now) {
    if (now < 100) {
      net.create_packet(0, 1, Priority::Low, len, now, true);
      net.create_packet(1, 0, Priority::Low, len, now, true);
    }
    net.step(now);
  }
  ASSERT_EQ(latency.size(), 200u);
  for (Cycle l : latency) EXPECT_EQ(l, 6);
}

TEST(SmallOracle, TwoFlitPacketsQueueAtTheSource) {
  // Packet k is created in cycle k but its head can only leave in cycle 2k,
  // so it ejects at 2k + 6 + 1: latency k + 7.
  Network net(build_single_stage(2), {}, 1);
  std::map<std::uint64_t, Cycle> latency;
  net.set_eject_handler([&](const Packet& p) {
    if (p.src == 0) latency[p.create_cycle] = p.eject_cycle - p.create_cycle;
  });
  for (Cycle now = 0; now < 300; ++now) {
    if (now < 50) {
      net.create_packet(0, 1, Priority::Low, 2, now, true);
      net.create_packet(1, 0, Priority::Low, 2, now, true);
    }
    net.step(now);
  }
  ASSERT_EQ(latency.size(), 50u);
  for (const auto& [k, l] : latency) EXPECT_EQ(l, static_cast<Cycle>(k) + 7) << "packet " << k;
}

TEST(RunSimulation, SameSeedGivesIdenticalRows) {
  auto cfg = short_config(0.4);
  cfg.high_priority_fraction = 0.5;
  EXPECT_EQ(to_csv_row(run_simulation(cfg)), to_csv_row(run_simulation(cfg)));
  auto other = cfg;
  other.seed = 2;
  EXPECT_NE(to_csv_row(run_simulation(cfg)), to_csv_row(run_simulation(other)));
}

TEST(RunSimulation, AllPacketsDeliveredBelowSaturation) {
  const auto r = run_simulation(short_config(0.3));
  EXPECT_TRUE(r.drain_complete);
  EXPECT_FALSE(r.saturated);
  EXPECT_EQ(r.packets_injected, r.packets_ejected);
  EXPECT_NEAR(r.accepted_throughput, r.offered_load, 1e-12);
  EXPECT_NEAR(r.offered_load, 0.3, 0.02);
  EXPECT_TRUE(std::isnan(r.avg_latency_high));
}

TEST(RunSimulation, HighClassIsNoSlowerThanLow) {
  for (const auto mode : {PriorityMode::ByVC, PriorityMode::ByPacket}) {
    for (const double rate : {0.2, 0.4, 0.5}) {
      auto cfg = short_config(rate);
      cfg.priority_mode = mode;
      cfg.high_priority_fraction = 0.5;
      const auto r = run_simulation(cfg);
      EXPECT_LE(r.avg_latency_high, r.avg_latency_low) << to_string(mode) << " rate " << rate;
    }
  }
}

TEST(RunSimulation, OverloadIsSaturated) {
  const auto r = run_simulation(short_config(0.95));
  EXPECT_TRUE(r.saturated);
  EXPECT_LT(r.accepted_throughput, r.offered_load);
}

TEST(RunSimulation, CsvRowShape) {
  EXPECT_EQ(stats_csv_header(), "offered_load,accepted_throughput,avg_latency_all,avg_latency_high,avg_latency_low,saturated,seed");
  StatsReport r;
  r.offered_load = 0.25;
  r.accepted_throughput = 0.25;
  r.avg_latency_all = 16.5;
  r.avg_latency_high = std::nan("");
  r.avg_latency_low = 16.5;
  r.seed = 9;
  EXPECT_EQ(to_csv_row(r), "0.250000,0.250000,16.500000,nan,16.500000,0,9");
}

TEST(SimConfigValidation, ListsEveryProblem) {
  SimConfig cfg;
  cfg.injection_rate = 1.5;
  cfg.high_priority_fraction = -0.1;
  cfg.packet_length = 0;
  const auto problems = cfg.problems();
  EXPECT_EQ(problems.size(), 3u);
  try {
    run_simulation(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.problems(), problems);
    EXPECT_NE(std::string(e.what()).find("rate out of [0,1]"), std::string::npos);
  }
}

TEST(SimConfigValidation, DisconnectedFabricNeedsExplicitFaults) {
  SimConfig cfg = short_config(0.1);
  cfg.topology.faults = {"0.1.0->1.0.1", "0.1.1->1.1.1"};
  const auto r = run_simulation(cfg);  // faults were requested, so the run proceeds
  EXPECT_GT(r.packets_injected, 0u);
  EXPECT_THROW(
      {
        SimConfig bad = short_config(0.1);
        bad.topology.kind = FabricKind::Benes;
        bad.topology.ports = 6;
        run_simulation(bad);
      },
      std::exception);
}

TEST(Sweep, SingleRateMatchesDirectRun) {
  const auto cfg = short_config(0.2);
  const std::vector<double> rates{0.2};
  const auto reports = sweep_injection(cfg, rates, 1);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(to_csv_row(reports[0]), to_csv_row(run_simulation(cfg)));
  EXPECT_EQ(sweep_seed(cfg.seed, 0), cfg.seed);
  EXPECT_NE(sweep_seed(cfg.seed, 1), cfg.seed);
}

TEST(Sweep, RejectsUnorderedOrOutOfRangeRates) {
  const auto cfg = short_config(0.2);
  EXPECT_THROW(sweep_injection(cfg, std::vector<double>{0.3, 0.2}), ConfigError);
  EXPECT_THROW(sweep_injection(cfg, std::vector<double>{0.2, 0.2}), ConfigError);
  EXPECT_THROW(sweep_injection(cfg, std::vector<double>{0.0, 0.2}), ConfigError);
  EXPECT_THROW(sweep_injection(cfg, std::vector<double>{}), ConfigError);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const auto cfg = short_config(0.2);
  const std::vector<double> rates{0.1, 0.3, 0.5};
  const auto one = sweep_injection(cfg, rates, 1);
  const auto many = sweep_injection(cfg, rates, 3);
  for (std::size_t i = 0; i < rates.size(); ++i) EXPECT_EQ(to_csv_row(one[i]), to_csv_row(many[i]));
  for (std::size_t i = 1; i < rates.size(); ++i) {
    EXPECT_GE(one[i].avg_latency_all, one[i - 1].avg_latency_all);
  }
}

TEST(Saturation, UncontendedFabricReachesFullRate) {
  auto cfg = short_config(0.1);
  cfg.topology.clos = {1, 1, 1};
  cfg.topology.faults.clear();
  // One terminal sends only to itself through a private path.
  const auto r = find_saturation(cfg);
  EXPECT_FALSE(r.saturated_rate);
  EXPECT_DOUBLE_EQ(r.stable_rate, 1.0);
  EXPECT_NEAR(r.throughput, 1.0, 0.01);
}

TEST(Saturation, BracketsTheKnee) {
  auto cfg = short_config(0.1);
  cfg.topology.kind = FabricKind::SingleStage;
  const auto r = find_saturation(cfg);
  ASSERT_TRUE(r.saturated_rate);
  EXPECT_LE(*r.saturated_rate - r.stable_rate, 0.01 + 1e-9);
  EXPECT_GT(r.stable_rate, 0.5);
  EXPECT_LT(r.stable_rate, 0.75);
  for (const auto& p : r.probes) EXPECT_EQ(p.seed, cfg.seed);
}

}  // namespace
}  // namespace tsnfabric
