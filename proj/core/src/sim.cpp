#include "tsnfabric/sim.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace tsnfabric {

FabricTopology TopologySpec::build_base() const {
  switch (kind) {
    case FabricKind::SingleStage: return build_single_stage(ports);
    case FabricKind::Clos3: return build_clos3(clos.n, clos.m, clos.r);
    case FabricKind::Benes: return build_benes(ports);
  }
  throw TopologyError("unknown fabric kind");
}

FaultResult TopologySpec::build() const { return apply_faults(build_base(), faults); }

int TopologySpec::terminals() const { return kind == FabricKind::Clos3 ? clos.n * clos.r : ports; }

std::vector<std::string> SimConfig::problems() const {
  std::vector<std::string> out;
  if (!(injection_rate >= 0.0 && injection_rate <= 1.0)) {
    out.push_back(fmt::format("injection_rate {}: rate out of [0,1]", injection_rate));
  }
  if (!(high_priority_fraction >= 0.0 && high_priority_fraction <= 1.0)) {
    out.push_back(fmt::format("high_priority_fraction {}: fraction out of [0,1]", high_priority_fraction));
  }
  if (packet_length < 1) out.push_back(fmt::format("packet_length {}: must be >= 1", packet_length));
  if (warmup_cycles <= 0) out.push_back(fmt::format("warmup_cycles {}: must be > 0", warmup_cycles));
  if (measure_cycles <= 0) out.push_back(fmt::format("measure_cycles {}: must be > 0", measure_cycles));
  if (max_drain_cycles <= 0) out.push_back(fmt::format("max_drain_cycles {}: must be > 0", max_drain_cycles));
  if (link_latency < 1) out.push_back(fmt::format("link_latency {}: must be >= 1", link_latency));
  if (!(saturation_factor > 1.0)) {
    out.push_back(fmt::format("saturation_factor {}: must be > 1", saturation_factor));
  }
  try {
    topology.build();
  } catch (const std::exception& e) {
    out.push_back(fmt::format("topology: {}", e.what()));
  }
  return out;
}

void SimConfig::validate() const {
  auto errs = problems();
  if (errs.empty()) return;
  std::string msg = "invalid simulation config:";
  for (const auto& e : errs) msg += "\n  " + e;
  throw ConfigError(msg, std::move(errs));
}

std::string stats_csv_header() {
  return "offered_load,accepted_throughput,avg_latency_all,avg_latency_high,avg_latency_low,saturated,seed";
}

std::string to_csv_row(const StatsReport& r) {
  auto num = [](double v) { return std::isnan(v) ? std::string("nan") : fmt::format("{:.6f}", v); };
  return fmt::format("{},{},{},{},{},{},{}", num(r.offered_load), num(r.accepted_throughput),
                     num(r.avg_latency_all), num(r.avg_latency_high), num(r.avg_latency_low),
                     r.saturated ? 1 : 0, r.seed);
}

TrafficGenerator::TrafficGenerator(const SimConfig& cfg, int terminals)
    : terminals_(terminals), rate_(cfg.injection_rate), high_fraction_(cfg.high_priority_fraction) {
  streams_.reserve(terminals);
  for (int t = 0; t < terminals; ++t) {
    streams_.emplace_back(cfg.seed, StreamDomain::Traffic, static_cast<std::uint64_t>(t));
  }
}

std::vector<GeneratedPacket> TrafficGenerator::generate() {
  std::vector<GeneratedPacket> out;
  for (int t = 0; t < terminals_; ++t) {
    auto& rng = streams_[t];
    if (!rng.bernoulli(rate_)) continue;
    GeneratedPacket p;
    p.src = t;
    if (terminals_ > 1) {
      p.dst = static_cast<int>(rng.below(static_cast<std::uint64_t>(terminals_ - 1)));
      if (p.dst >= t) ++p.dst;
    } else {
      p.dst = t;
    }
    p.priority = rng.bernoulli(high_fraction_) ? Priority::High : Priority::Low;
    out.push_back(p);
  }
  return out;
}

double zero_load_latency(const FabricTopology& topo, int packet_length, int link_latency) {
  return static_cast<double>(link_latency + topo.stage_count() * (kPipelineDepth + link_latency) +
                             (packet_length - 1));
}

double zero_load_latency(const SimConfig& cfg) {
  return zero_load_latency(cfg.topology.build_base(), cfg.packet_length, cfg.link_latency);
}

namespace {

struct ClassTally {
  std::int64_t generated = 0;
  std::int64_t ejected = 0;
  std::int64_t latency_sum = 0;
  std::int64_t gen_cycle_sum = 0;          // over all generated
  std::int64_t ejected_gen_cycle_sum = 0;  // over ejected only

  // Mean latency if every remaining packet ejected right now: a lower
  // bound on the final mean.
  double lower_bound(Cycle now) const {
    if (generated == 0) return std::numeric_limits<double>::quiet_NaN();
    const std::int64_t remaining = generated - ejected;
    const std::int64_t waiting = remaining * now - (gen_cycle_sum - ejected_gen_cycle_sum);
    return static_cast<double>(latency_sum + waiting) / static_cast<double>(generated);
  }
};

}  // namespace

StatsReport run_simulation(const SimConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  FaultResult built = cfg.topology.build();
  if (built.disconnected_pairs > 0 && cfg.topology.faults.empty()) {
    throw ConfigError(fmt::format("topology has {} disconnected pairs but no faults were requested",
                                  built.disconnected_pairs));
  }
  const int terminals = built.topology.terminals();
  const double zl = zero_load_latency(built.topology, cfg.packet_length, cfg.link_latency);
  const double bound = cfg.saturation_factor * zl;

  Network net(std::move(built.topology), {cfg.priority_mode, cfg.scheme, cfg.link_latency}, cfg.seed);
  TrafficGenerator traffic(cfg, terminals);

  const Cycle measure_begin = cfg.warmup_cycles;
  const Cycle measure_end = cfg.warmup_cycles + cfg.measure_cycles;
  const Cycle drain_end = measure_end + cfg.max_drain_cycles;

  ClassTally tally[2];
  std::int64_t window_ejected = 0;
  Cycle now = 0;

  net.set_eject_handler([&](const Packet& p) {
    if (now >= measure_begin && now < measure_end) ++window_ejected;
    if (p.tagged) {
      auto& t = tally[static_cast<int>(p.priority)];
      ++t.ejected;
      t.latency_sum += p.eject_cycle - p.create_cycle;
      t.ejected_gen_cycle_sum += p.create_cycle;
    }
    if (hooks.on_eject) hooks.on_eject(p);
  });
  if (hooks.on_start) hooks.on_start(net);

  auto total = [&] {
    ClassTally all;
    for (const auto& t : tally) {
      all.generated += t.generated;
      all.ejected += t.ejected;
      all.latency_sum += t.latency_sum;
      all.gen_cycle_sum += t.gen_cycle_sum;
      all.ejected_gen_cycle_sum += t.ejected_gen_cycle_sum;
    }
    return all;
  };

  bool cut_short = false;
  for (now = 0;; ++now) {
    if (now >= measure_end) {
      const ClassTally all = total();
      if (all.ejected == all.generated) break;
      if (now >= drain_end || all.lower_bound(now) > bound) {
        cut_short = true;
        break;
      }
    }
    const bool tagged = now >= measure_begin && now < measure_end;
    for (const auto& g : traffic.generate()) {
      net.create_packet(g.src, g.dst, g.priority, cfg.packet_length, now, tagged);
      if (tagged) {
        auto& t = tally[static_cast<int>(g.priority)];
        ++t.generated;
        t.gen_cycle_sum += now;
      }
    }
    net.step(now);
    if (hooks.after_cycle) hooks.after_cycle(now, net);
  }

  const ClassTally all = total();
  const double window = static_cast<double>(cfg.measure_cycles) * terminals;
  StatsReport r;
  r.seed = cfg.seed;
  r.injection_rate = cfg.injection_rate;
  r.zero_load_latency = zl;
  r.cycles_run = now;
  r.packets_injected = static_cast<std::uint64_t>(all.generated);
  r.packets_ejected = static_cast<std::uint64_t>(all.ejected);
  r.offered_load = static_cast<double>(all.generated) / window;
  r.accepted_throughput = static_cast<double>(std::min(window_ejected, all.generated)) / window;
  r.avg_latency_all = all.generated == 0 ? 0.0 : all.lower_bound(now);
  r.avg_latency_high = tally[0].lower_bound(now);
  r.avg_latency_low = tally[1].lower_bound(now);
  r.drain_complete = !cut_short;
  r.saturated = cut_short || r.avg_latency_all > bound;
  return r;
}

std::uint64_t sweep_seed(std::uint64_t base, std::size_t index) {
  return index == 0 ? base : derive_seed(base, StreamDomain::Sweep, index);
}

std::vector<StatsReport> sweep_injection(const SimConfig& base, std::span<const double> rates, unsigned threads) {
  if (rates.empty()) throw ConfigError("sweep needs at least one rate");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] > 0.0 && rates[i] <= 1.0)) {
      throw ConfigError(fmt::format("sweep rate {}: rate out of (0,1]", rates[i]));
    }
    if (i > 0 && !(rates[i] > rates[i - 1])) throw ConfigError("sweep rates must be strictly increasing");
  }
  base.validate();

  std::vector<StatsReport> out(rates.size());
  auto run_one = [&](std::size_t i) {
    SimConfig cfg = base;
    cfg.injection_rate = rates[i];
    cfg.seed = sweep_seed(base.seed, i);
    out[i] = run_simulation(cfg);
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(rates.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < rates.size(); ++i) run_one(i);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < rates.size(); i = next++) {
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

SaturationResult find_saturation(const SimConfig& base, double resolution, double grid_step) {
  if (!(resolution > 0.0) || !(grid_step > 0.0) || grid_step > 1.0) {
    throw ConfigError("saturation search needs a positive resolution and a grid step in (0,1]");
  }
  SaturationResult res;
  std::optional<StatsReport> best;
  auto probe = [&](double rate) {
    SimConfig cfg = base;
    cfg.injection_rate = rate;
    res.probes.push_back(run_simulation(cfg));
    return res.probes.back();
  };

  const int steps = static_cast<int>(std::floor(1.0 / grid_step + 1e-9));
  for (int k = 1; k <= steps; ++k) {
    const double rate = std::round(k * grid_step * 1e9) / 1e9;
    StatsReport r = probe(rate);
    if (r.saturated) {
      res.saturated_rate = rate;
      break;
    }
    res.stable_rate = rate;
    best = r;
  }

  if (res.saturated_rate) {
    double lo = res.stable_rate;
    double hi = *res.saturated_rate;
    while (hi - lo > resolution + 1e-12) {
      const double mid = 0.5 * (lo + hi);
      StatsReport r = probe(mid);
      if (r.saturated) {
        hi = mid;
      } else {
        lo = mid;
        best = r;
      }
    }
    res.stable_rate = lo;
    res.saturated_rate = hi;
  }
  res.throughput = best ? best->accepted_throughput : 0.0;
  return res;
}

}  // namespace tsnfabric
