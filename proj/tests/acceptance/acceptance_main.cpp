// Acceptance checks for the fabric simulator and its analytics. One
// PASS/FAIL line per criterion; exit status 1 when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tsnfabric/analytics.hpp"
#include "tsnfabric/harness.hpp"
#include "tsnfabric/network.hpp"
#include "tsnfabric/sim.hpp"

namespace {

using namespace tsnfabric;

// Tolerances.
constexpr double kBaselineSaturation = 0.85;
constexpr double kBaselineSaturationTol = 0.10;
constexpr double kMemeffSaturation = 0.55;
constexpr double kMemeffSaturationTol = 0.10;
constexpr double kZeroLoadAgreement = 0.05;
constexpr double kZeroLoadRate = 0.05;
constexpr double kDropSlack = 0.05;  // fraction of fault-free throughput
constexpr double kCapacityFraction = 0.85;
constexpr double kFaultDeliveryRate = 0.2;
constexpr int kFaultCount = 3;
constexpr double kReliabilityTol = 1e-6;
constexpr double kExactTol = 1e-12;
constexpr Cycle kAuditCycles = 10000;

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  fmt::print("{} criterion {}: {}\n", ok ? "PASS" : "FAIL", id, detail);
  std::fflush(stdout);
  if (!ok) ++failures;
}

void note(const std::string& text) {
  fmt::print("  info: {}\n", text);
  std::fflush(stdout);
}

SimConfig desk_config() {
  SimConfig cfg;  // Clos3(2,2,4), 2 VCs x 6 flits, ByVC, uniform traffic
  cfg.warmup_cycles = 10000;
  cfg.measure_cycles = 50000;
  cfg.max_drain_cycles = 50000;
  cfg.seed = 1;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void criterion_saturation() {
  const auto t0 = std::chrono::steady_clock::now();
  const SimConfig base = desk_config();
  const auto all_low = find_saturation(base);
  const double elapsed = seconds_since(t0);

  SimConfig mixed = base;
  mixed.high_priority_fraction = 0.5;
  const auto base_mixed = find_saturation(mixed);
  SimConfig lean = mixed;
  lean.scheme = BufferScheme::MemoryEfficient24N;
  const auto lean_mixed = find_saturation(lean);

  verdict(1, std::abs(all_low.throughput - kBaselineSaturation) <= kBaselineSaturationTol,
          fmt::format("baseline saturation {:.4f} (stable rate {:.2f}), expected {:.2f} +- {:.2f}", all_low.throughput,
                      all_low.stable_rate, kBaselineSaturation, kBaselineSaturationTol));
  note(fmt::format("baseline with a 50/50 class mix saturates at {:.4f}; search took {:.1f} s",
                   base_mixed.throughput, elapsed));

  const bool in_band = std::abs(lean_mixed.throughput - kMemeffSaturation) <= kMemeffSaturationTol;
  const bool below = lean_mixed.throughput < base_mixed.throughput;
  verdict(2, in_band && below,
          fmt::format("memory-efficient saturation {:.4f}, expected {:.2f} +- {:.2f} and below baseline {:.4f} "
                      "(50/50 class mix, seed {})",
                      lean_mixed.throughput, kMemeffSaturation, kMemeffSaturationTol, base_mixed.throughput,
                      base.seed));
}

void criterion_zero_load() {
  SimConfig cfg = desk_config();
  cfg.injection_rate = kZeroLoadRate;
  cfg.high_priority_fraction = 0.5;
  const auto base = run_simulation(cfg);
  cfg.scheme = BufferScheme::MemoryEfficient24N;
  const auto lean = run_simulation(cfg);
  const double rel = std::abs(base.avg_latency_all - lean.avg_latency_all) / base.avg_latency_all;

  SimConfig single = desk_config();
  single.topology.kind = FabricKind::SingleStage;
  single.topology.ports = 8;
  const double delta = zero_load_latency(desk_config()) - zero_load_latency(single);
  const double per_hop = kPipelineDepth + desk_config().link_latency;
  const bool ok = rel <= kZeroLoadAgreement && delta == 2 * per_hop;
  verdict(3, ok,
          fmt::format("latency at rate {:.2f}: baseline {:.3f}, memory-efficient {:.3f} ({:.2f}% apart); "
                      "multi minus single zero-load = {:.0f}, expected {:.0f}",
                      kZeroLoadRate, base.avg_latency_all, lean.avg_latency_all, 100 * rel, delta, 2 * per_hop));
}

void criterion_faults() {
  const SimConfig base = desk_config();
  const auto order = seeded_fault_order(base.topology, base.seed, kFaultCount);
  const auto grid = default_rate_grid();
  std::vector<double> tput;
  for (int k = 0; k <= kFaultCount; ++k) {
    SimConfig cfg = base;
    cfg.topology.faults.assign(order.begin(), order.begin() + k);
    double best = 0.0;
    for (const auto& r : sweep_injection(cfg, grid)) best = std::max(best, r.accepted_throughput);
    tput.push_back(best);
  }
  bool monotone = true;
  for (int k = 1; k <= kFaultCount; ++k) monotone = monotone && tput[k] <= tput[k - 1];
  const double drop01 = tput[0] - tput[1];
  const double drop23 = tput[2] - tput[3];
  const bool graceful = drop01 <= drop23 + kDropSlack * tput[0];

  SimConfig probe = base;
  probe.topology.faults = order;
  probe.injection_rate = kFaultDeliveryRate;
  const auto rep = run_simulation(probe);
  const bool delivered = rep.drain_complete && rep.packets_ejected == rep.packets_injected;
  const bool capacity = tput[0] >= kCapacityFraction;

  std::string faults;
  for (const auto& f : order) faults += (faults.empty() ? "" : " ") + f;
  note(fmt::format("nested faults: {}", faults));
  verdict(4, monotone && graceful && delivered && capacity,
          fmt::format("max accepted by fault count {:.4f} {:.4f} {:.4f} {:.4f} (monotone {}); drop 0->1 {:.4f} vs "
                      "2->3 {:.4f} (graceful {}); rate {:.1f} with {} faults delivered {}/{} ({}); fault-free "
                      "{:.4f} of capacity, expected >= {:.2f}",
                      tput[0], tput[1], tput[2], tput[3], monotone ? "yes" : "no", drop01, drop23,
                      graceful ? "yes" : "no", kFaultDeliveryRate, kFaultCount, rep.packets_ejected,
                      rep.packets_injected, delivered ? "all" : "not all", tput[0], kCapacityFraction));
}

struct AdversarialOutcome {
  Cycle high_extra = 0;
  int low_length = 0;
};

// A long Low packet takes the contended output one cycle before a High
// packet arrives for the same output.
AdversarialOutcome bypacket_adversary(int low_len) {
  Network net(build_single_stage(4), {PriorityMode::ByPacket, BufferScheme::Baseline36N, 1}, 3);
  std::map<std::uint64_t, Packet> done;
  net.set_eject_handler([&](const Packet& p) { done[p.id] = p; });
  net.create_packet(0, 3, Priority::Low, low_len, 0, true);
  net.step(0);
  const auto high = net.create_packet(1, 3, Priority::High, 1, 1, true);
  for (Cycle now = 1; net.packets_in_flight() > 0 && now < 1000; ++now) net.step(now);
  const Cycle lat = done.at(high).eject_cycle - done.at(high).create_cycle;
  return {lat - static_cast<Cycle>(zero_load_latency(net.topology(), 1, 1)), low_len};
}

void criterion_priority() {
  const auto grid = default_rate_grid();
  int violations = 0, checked = 0;
  std::string worst;
  for (const auto mode : {PriorityMode::ByVC, PriorityMode::ByPacket}) {
    SimConfig cfg = desk_config();
    cfg.priority_mode = mode;
    cfg.high_priority_fraction = 0.5;
    const auto reports = sweep_injection(cfg, grid);
    for (const auto& r : reports) {
      ++checked;
      if (!(r.avg_latency_high <= r.avg_latency_low)) {
        ++violations;
        worst = fmt::format("{} rate {:.2f}: high {:.3f} > low {:.3f}", to_string(mode), r.injection_rate,
                            r.avg_latency_high, r.avg_latency_low);
      }
    }
  }
  bool bounded = true;
  std::string extra;
  for (const int len : {2, 4, 8, 16}) {
    const auto o = bypacket_adversary(len);
    bounded = bounded && o.high_extra <= o.low_length && o.high_extra > 0;
    extra += fmt::format(" {}:{}", o.low_length, o.high_extra);
  }
  verdict(5, violations == 0 && bounded,
          fmt::format("high <= low latency at {}/{} swept points{}; ByPacket high-packet extra delay per low "
                      "length{} (bound: one low packet)",
                      checked - violations, checked, worst.empty() ? "" : " (" + worst + ")", extra));
}

void criterion_analytics() {
  std::vector<std::string> bad;
  for (const int n : {2, 4, 8, 16, 64, 256}) {
    if (std::abs(cost_per_unit(FabricKind::SingleStage, n).closed_form - 2.0) > kExactTol) {
      bad.push_back(fmt::format("single-stage cost at N={}", n));
    }
  }
  for (const int n : {4, 8, 16, 32}) {
    if (buffer_memory(BufferScheme::Baseline36N, n) != 36 * n) bad.push_back(fmt::format("36N at N={}", n));
    if (buffer_memory(BufferScheme::MemoryEfficient24N, n) != 24 * n) bad.push_back(fmt::format("24N at N={}", n));
  }
  const double reduction = buffer_reduction();
  if (std::abs(reduction - 1.0 / 3.0) > kExactTol) bad.push_back("buffer reduction");
  const int built = static_cast<int>(build_benes(8).elements().size());
  if (complexity(FabricKind::Benes, 8) != 20 || built != 20) bad.push_back("Benes complexity");
  const std::vector<PathGroupSummary> ss{default_single_stage_groups()};
  const std::vector<PathGroupSummary> ms{default_multi_stage_groups()};
  const double ple_ss = path_length_effectiveness(ss);
  const double ple_ms = path_length_effectiveness(ms);
  if (std::abs(ple_ss - 1.0) > kExactTol || std::abs(ple_ms - 0.8) > kExactTol) bad.push_back("PLE defaults");
  const double rss = reliability_single_stage(8, 0.9).value;
  const double rms = reliability_multi_stage(8, 0.9);
  if (std::abs(rss - 0.6) > kReliabilityTol) bad.push_back("single-stage reliability");
  if (std::abs(rms - 0.778212) > kReliabilityTol) bad.push_back("multi-stage reliability");
  const auto mc = terminal_reliability_monte_carlo(8, 0.9, 200000, 1);
  note(fmt::format("N=8, r=0.9: single-stage {:.6f}, multi-stage {:.6f}, Monte Carlo {:.6f} over {} trials", rss, rms,
                   mc.estimate(), mc.trials));
  std::string missing;
  for (const auto& b : bad) missing += (missing.empty() ? "" : ", ") + b;
  verdict(6, bad.empty(),
          fmt::format("cost 2 for all N, buffers 36N/24N with {:.1f}% saving, Benes(8) = {} elements, PLE {:.1f}/{:.1f}, "
                      "reliability {:.6f}/{:.6f}{}",
                      100 * reduction, built, ple_ss, ple_ms, rss, rms, missing.empty() ? "" : "; wrong: " + missing));
}

void criterion_determinism() {
  SimConfig cfg = desk_config();
  cfg.injection_rate = 0.4;
  cfg.high_priority_fraction = 0.5;
  const std::vector<double> rates{0.1, 0.3, 0.5};
  const auto a = stats_csv(sweep_injection(cfg, rates));
  const auto b = stats_csv(sweep_injection(cfg, rates, 1));
  const bool identical = a == b;

  SimConfig audit = cfg;
  audit.warmup_cycles = 2000;
  audit.measure_cycles = kAuditCycles - 2000;
  audit.max_drain_cycles = 5000;
  Cycle cycles = 0;
  std::string first_error;
  RunHooks hooks;
  hooks.after_cycle = [&](Cycle now, const Network& net) {
    ++cycles;
    if (!first_error.empty()) return;
    if (net.count_in_flight_structural() != net.packets_in_flight()) {
      first_error = fmt::format("packet count mismatch at cycle {}", now);
    } else if (auto e = net.check_credit_invariant(); !e.empty()) {
      first_error = fmt::format("cycle {}: {}", now, e);
    }
  };
  const auto rep = run_simulation(audit, hooks);
  const bool conserved = first_error.empty() && cycles >= kAuditCycles && rep.packets_ejected == rep.packets_injected;
  verdict(7, identical && conserved,
          fmt::format("sweep CSV byte-identical across runs: {}; conservation checked over {} cycles: {}",
                      identical ? "yes" : "no", cycles, first_error.empty() ? "held" : first_error));
}

// Both terminals of a 2-port switch send to each other in every one of the
// first `packets` cycles. Expected per packet k (created in cycle k):
// head leaves the source in cycle len*k, the tail ejects len-1 cycles after
// the head's 6-cycle crossing, so latency = (len-1)*k + 6 + (len-1).
bool small_oracle(int len, int packets, std::string& why) {
  Network net(build_single_stage(2), {}, 1);
  std::map<std::pair<int, Cycle>, Cycle> seen;
  net.set_eject_handler([&](const Packet& p) { seen[{p.src, p.create_cycle}] = p.eject_cycle; });
  for (Cycle now = 0; now < static_cast<Cycle>(packets) * len + 100; ++now) {
    if (now < packets) {
      net.create_packet(0, 1, Priority::Low, len, now, true);
      net.create_packet(1, 0, Priority::Low, len, now, true);
    }
    net.step(now);
  }
  if (seen.size() != static_cast<std::size_t>(2 * packets)) {
    why = fmt::format("len {}: {} of {} packets ejected", len, seen.size(), 2 * packets);
    return false;
  }
  for (const auto& [key, eject] : seen) {
    const Cycle k = key.second;
    const Cycle want = len * k + 6 + (len - 1);
    if (eject != want) {
      why = fmt::format("len {}: packet {} from terminal {} ejected at {}, schedule says {}", len, k, key.first,
                        eject, want);
      return false;
    }
  }
  return true;
}

void criterion_small_oracle() {
  std::string why;
  const bool ok = small_oracle(1, 200, why) && small_oracle(2, 60, why) && small_oracle(3, 40, why);
  verdict(8, ok, ok ? "2-terminal schedule matched per packet for lengths 1, 2 and 3" : why);
}

}  // namespace

int main() {
  try {
    criterion_saturation();
    criterion_zero_load();
    criterion_faults();
    criterion_priority();
    criterion_analytics();
    criterion_determinism();
    criterion_small_oracle();
  } catch (const std::exception& e) {
    fmt::print("FAIL acceptance aborted: {}\n", e.what());
    return 1;
  }
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
