#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsnfabric/allocator.hpp"
#include "tsnfabric/network.hpp"
#include "tsnfabric/rng.hpp"
#include "tsnfabric/router.hpp"
#include "tsnfabric/topology.hpp"

namespace tsnfabric {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
  ConfigError(const std::string& what, std::vector<std::string> problems)
      : std::runtime_error(what), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Which fabric to build. `ports` applies to single-stage and Benes,
/// `clos` to Clos3.
struct TopologySpec {
  FabricKind kind = FabricKind::Clos3;
  int ports = 8;
  ClosParams clos{2, 2, 4};
  std::vector<std::string> faults;

  /// Builds the fault-free fabric. Throws TopologyError.
  FabricTopology build_base() const;
  /// Builds the fabric with `faults` applied.
  FaultResult build() const;
  int terminals() const;
};

struct SimConfig {
  TopologySpec topology;
  PriorityMode priority_mode = PriorityMode::ByVC;
  BufferScheme scheme = BufferScheme::Baseline36N;
  double injection_rate = 0.1;
  double high_priority_fraction = 0.0;
  int packet_length = 1;
  Cycle warmup_cycles = 10000;
  Cycle measure_cycles = 50000;
  Cycle max_drain_cycles = 50000;
  std::uint64_t seed = 1;
  int link_latency = 1;
  /// Stability bound: saturated when average latency exceeds this multiple
  /// of the zero-load latency.
  double saturation_factor = 10.0;

  /// Every range problem, empty when the config is usable.
  std::vector<std::string> problems() const;
  /// Throws ConfigError listing all problems.
  void validate() const;
};

struct StatsReport {
  double offered_load = 0.0;
  double accepted_throughput = 0.0;
  double avg_latency_all = 0.0;
  double avg_latency_high = 0.0;  // NaN when no High packet was measured
  double avg_latency_low = 0.0;   // NaN when no Low packet was measured
  bool saturated = false;
  std::uint64_t packets_injected = 0;  // generated during measurement
  std::uint64_t packets_ejected = 0;   // of those, ejected before the run ended
  std::uint64_t seed = 0;
  double injection_rate = 0.0;
  double zero_load_latency = 0.0;
  /// False when the drain stopped before every measured packet ejected; the
  /// latencies are then lower bounds.
  bool drain_complete = true;
  Cycle cycles_run = 0;
};

std::string stats_csv_header();
std::string to_csv_row(const StatsReport& r);

struct GeneratedPacket {
  int src = 0;
  int dst = 0;
  Priority priority = Priority::Low;
};

/// Bernoulli injection with one independent stream per terminal.
class TrafficGenerator {
 public:
  TrafficGenerator(const SimConfig& cfg, int terminals);
  /// Packets generated in one cycle, in terminal order.
  std::vector<GeneratedPacket> generate();

 private:
  int terminals_;
  double rate_;
  double high_fraction_;
  std::vector<RandomStream> streams_;
};

/// Latency of a lone single-flit packet through an uncontended fabric:
/// injection link, per-hop pipeline plus link, serialisation of the body.
double zero_load_latency(const FabricTopology& topo, int packet_length, int link_latency);
double zero_load_latency(const SimConfig& cfg);

struct RunHooks {
  /// Called after every simulated cycle.
  std::function<void(Cycle, const Network&)> after_cycle;
  /// Called for every ejected packet (tagged or not).
  std::function<void(const Packet&)> on_eject;
  /// Called once after the network is constructed.
  std::function<void(Network&)> on_start;
};

/// Warm-up, measurement and drain. Throws ConfigError on a bad config or a
/// disconnected pair when no faults were requested.
StatsReport run_simulation(const SimConfig& cfg, const RunHooks& hooks = {});

/// Seed used for the k-th rate of a sweep.
std::uint64_t sweep_seed(std::uint64_t base, std::size_t index);

/// One independent run per rate; reports in input order. `threads` = 0 uses
/// the hardware concurrency.
std::vector<StatsReport> sweep_injection(const SimConfig& base, std::span<const double> rates,
                                         unsigned threads = 0);

struct SaturationResult {
  double throughput = 0.0;   // accepted throughput at the highest stable rate
  double stable_rate = 0.0;  // 0 when no probed rate was stable
  std::optional<double> saturated_rate;
  std::vector<StatsReport> probes;
};

/// Grid scan at `grid_step` until the first saturated rate, then bisection
/// down to `resolution`. Every probe uses the base seed.
SaturationResult find_saturation(const SimConfig& base, double resolution = 0.01, double grid_step = 0.05);

}  // namespace tsnfabric
