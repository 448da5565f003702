#include "tsnfabric/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "tsnfabric/kvtext.hpp"
#include "tsnfabric/rng.hpp"

#ifndef TSNFABRIC_VERSION
#define TSNFABRIC_VERSION "0.0.0"
#endif

namespace tsnfabric {

std::string_view tool_version() { return TSNFABRIC_VERSION; }

namespace {

constexpr std::array kExperiments{
    ExperimentKind::LatencyCompare, ExperimentKind::ThroughputCompare, ExperimentKind::FaultLatency,
    ExperimentKind::FaultThroughput, ExperimentKind::MemoryCompare,    ExperimentKind::AnalyticsTable,
};

bool is_fault_experiment(ExperimentKind k) {
  return k == ExperimentKind::FaultLatency || k == ExperimentKind::FaultThroughput;
}

bool wants_saturation(ExperimentKind k) {
  return k == ExperimentKind::ThroughputCompare || k == ExperimentKind::FaultThroughput ||
         k == ExperimentKind::MemoryCompare;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  return std::nullopt;
}

std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? "," : "", v[i]);
  return out;
}

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::LatencyCompare: return "latency-compare";
    case ExperimentKind::ThroughputCompare: return "throughput-compare";
    case ExperimentKind::FaultLatency: return "fault-latency";
    case ExperimentKind::FaultThroughput: return "fault-throughput";
    case ExperimentKind::MemoryCompare: return "memory-compare";
    case ExperimentKind::AnalyticsTable: return "analytics-table";
  }
  return "?";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
  name = trim(name);
  for (const auto k : kExperiments) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::span<const ExperimentKind> all_experiments() { return kExperiments; }

std::vector<double> default_rate_grid() {
  std::vector<double> out;
  for (int k = 1; k <= 19; ++k) out.push_back(std::round(k * 0.05 * 1e9) / 1e9);
  return out;
}

ExperimentSpec default_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  s.rates = default_rate_grid();
  if (kind == ExperimentKind::MemoryCompare) s.base.high_priority_fraction = 0.5;
  if (is_fault_experiment(kind)) s.faults = 3;
  s.single_stage_ports = s.base.topology.terminals();
  return s;
}

std::string config_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::vector<std::string> seeded_fault_order(const TopologySpec& topo_spec, std::uint64_t seed, int count) {
  if (count < 0) throw ConfigError("fault count must be >= 0");
  if (count == 0) return {};
  const FabricTopology topo = topo_spec.build_base();
  std::vector<int> candidates;
  for (int l = 0; l < static_cast<int>(topo.links().size()); ++l) {
    if (topo.element(topo.links()[l].src.element).stage == 0) candidates.push_back(l);
  }
  if (candidates.empty()) throw ConfigError(fmt::format("{} fabric has no inter-stage links to fail", to_string(topo.kind())));

  RandomStream rng(seed, StreamDomain::Faults, 0);
  for (std::size_t i = candidates.size(); i > 1; --i) {
    std::swap(candidates[i - 1], candidates[rng.below(i)]);
  }

  std::vector<std::string> order;
  std::vector<char> used(candidates.size(), 0);
  std::set<int> round;  // second-stage elements already hit in this round
  FabricTopology current = topo;
  while (static_cast<int>(order.size()) < count) {
    bool placed = false;
    for (int pass = 0; pass < 2 && !placed; ++pass) {
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (used[i]) continue;
        const Link& link = topo.links()[candidates[i]];
        if (pass == 0 && round.count(link.dst.element)) continue;
        const std::string sel = topo.link_selector(candidates[i]);
        const std::array<std::string, 1> one{sel};
        FaultResult trial = apply_faults(current, one);
        used[i] = 1;
        if (trial.disconnected_pairs > 0) continue;
        current = std::move(trial.topology);
        order.push_back(sel);
        round.insert(link.dst.element);
        placed = true;
        break;
      }
      // Every second-stage element hit once: start a new round.
      if (!placed && pass == 0) round.clear();
    }
    if (!placed) {
      throw ConfigError(fmt::format("cannot place {} faults without disconnecting a terminal pair", count));
    }
  }
  return order;
}

namespace {

std::vector<std::string> resolve_faults(const ExperimentSpec& spec) {
  if (const auto* n = std::get_if<int>(&spec.faults)) {
    return seeded_fault_order(spec.base.topology, spec.base.seed, *n);
  }
  return std::get<std::vector<std::string>>(spec.faults);
}

}  // namespace

std::string to_config_text(const ExperimentSpec& s) {
  KeyValueDocument doc;
  const SimConfig& c = s.base;
  doc.add("experiment", std::string(to_string(s.kind)));
  doc.add("topology", std::string(to_string(c.topology.kind)));
  doc.add("ports", std::to_string(c.topology.ports));
  doc.add("clos_n", std::to_string(c.topology.clos.n));
  doc.add("clos_m", std::to_string(c.topology.clos.m));
  doc.add("clos_r", std::to_string(c.topology.clos.r));
  if (const auto* n = std::get_if<int>(&s.faults)) {
    doc.add("faults", std::to_string(*n));
  } else if (const auto& list = std::get<std::vector<std::string>>(s.faults); list.empty()) {
    doc.add("faults", "0");
  } else {
    doc.add("faults", join(list, ","));
  }
  doc.add("priority_mode", std::string(to_string(c.priority_mode)));
  doc.add("scheme", std::string(to_string(c.scheme)));
  doc.add("rates", join_numbers(s.rates));
  doc.add("high_priority_fraction", fmt::format("{}", c.high_priority_fraction));
  doc.add("packet_length", std::to_string(c.packet_length));
  doc.add("warmup_cycles", std::to_string(c.warmup_cycles));
  doc.add("measure_cycles", std::to_string(c.measure_cycles));
  doc.add("max_drain_cycles", std::to_string(c.max_drain_cycles));
  doc.add("seed", std::to_string(c.seed));
  doc.add("link_latency", std::to_string(c.link_latency));
  doc.add("saturation_factor", fmt::format("{}", c.saturation_factor));
  doc.add("single_stage_ports", std::to_string(s.single_stage_ports));
  doc.add("refine_saturation", s.refine_saturation ? "true" : "false");
  doc.add("threads", std::to_string(s.threads));
  doc.add("analytics_ports", std::to_string(s.analytics_ports));
  doc.add("reliability_r", fmt::format("{}", s.reliability_r));
  doc.add("mc_trials", std::to_string(s.mc_trials));
  for (const auto& g : s.path_groups) {
    doc.add("path_group", fmt::format("{}, {}, {}, {}", g.nomp, g.lomp, g.noap, g.loap));
  }
  doc.add("output_dir", s.output_dir.string());
  doc.add("format", s.format == OutputFormat::Csv ? "csv" : "table");
  return doc.to_text();
}

ValidationResult validate_config_text(std::string_view text) {
  ValidationResult res;
  KeyValueDocument doc;
  try {
    doc = KeyValueDocument::parse(text);
  } catch (const std::exception& e) {
    res.errors.push_back(e.what());
    return res;
  }

  const auto name = doc.first("experiment");
  if (!name) {
    res.errors.push_back("missing 'experiment'");
    return res;
  }
  const auto kind = parse_experiment_kind(*name);
  if (!kind) {
    res.errors.push_back(fmt::format("unknown experiment '{}'", *name));
    return res;
  }

  ExperimentSpec s = default_spec(*kind);
  SimConfig& c = s.base;
  auto& errors = res.errors;
  bool single_ports_set = false;
  bool groups_reset = false;
  std::set<std::string> seen;

  auto bad = [&](const KeyValueEntry& e, std::string_view why) {
    errors.push_back(fmt::format("line {}: {} = '{}': {}", e.line, e.key, e.value, why));
  };
  auto integer = [&](const KeyValueEntry& e, auto& out, long long lo, long long hi) {
    using T = std::remove_reference_t<decltype(out)>;
    const auto v = parse_number<long long>(e.value);
    if (!v) return bad(e, "not an integer");
    if (*v < lo || *v > hi) return bad(e, fmt::format("out of [{}, {}]", lo, hi));
    out = static_cast<T>(*v);
  };
  auto real = [&](const KeyValueEntry& e, double& out, double lo, double hi, std::string_view what) {
    const auto v = parse_number<double>(e.value);
    if (!v) return bad(e, "not a number");
    if (!(*v >= lo && *v <= hi)) return bad(e, fmt::format("{} out of [{},{}]", what, lo, hi));
    out = *v;
  };

  for (const auto& e : doc.entries()) {
    const std::string& k = e.key;
    if (k != "path_group" && !seen.insert(k).second) {
      bad(e, "repeated key");
      continue;
    }
    if (k == "experiment" || k == "tool_version") {
    } else if (k == "topology") {
      if (const auto fk = parse_fabric_kind(e.value)) c.topology.kind = *fk; else bad(e, "expected single, clos3 or benes");
    } else if (k == "ports") {
      integer(e, c.topology.ports, 1, 4096);
    } else if (k == "clos_n") {
      integer(e, c.topology.clos.n, 1, 256);
    } else if (k == "clos_m") {
      integer(e, c.topology.clos.m, 1, 256);
    } else if (k == "clos_r") {
      integer(e, c.topology.clos.r, 1, 256);
    } else if (k == "faults") {
      if (const auto n = parse_number<int>(e.value)) {
        if (*n < 0 || *n > 64) bad(e, "fault count out of [0, 64]"); else s.faults = *n;
      } else {
        s.faults = split_list(e.value);
      }
    } else if (k == "priority_mode") {
      if (const auto m = parse_priority_mode(e.value)) c.priority_mode = *m; else bad(e, "expected byvc, bypacket or none");
    } else if (k == "scheme") {
      if (const auto b = parse_buffer_scheme(e.value)) c.scheme = *b; else bad(e, "expected baseline or memeff");
    } else if (k == "rates") {
      std::vector<double> rates;
      bool ok = true;
      for (const auto& item : split_list(e.value)) {
        const auto v = parse_number<double>(item);
        if (!v) {
          bad(e, fmt::format("'{}' is not a number", item));
          ok = false;
        } else if (!(*v > 0.0 && *v <= 1.0)) {
          bad(e, fmt::format("{}: rate out of [0,1]", *v));
          ok = false;
        } else {
          rates.push_back(*v);
        }
      }
      if (ok && rates.empty()) {
        bad(e, "empty rate list");
        ok = false;
      }
      for (std::size_t i = 1; ok && i < rates.size(); ++i) {
        if (!(rates[i] > rates[i - 1])) {
          bad(e, "rates must be strictly increasing");
          ok = false;
        }
      }
      if (ok) s.rates = std::move(rates);
    } else if (k == "injection_rate") {
      double r = -1.0;
      real(e, r, 0.0, 1.0, "rate");
      if (r == 0.0) bad(e, "a swept rate must be > 0");
      if (r > 0.0) s.rates = {r};
    } else if (k == "high_priority_fraction") {
      real(e, c.high_priority_fraction, 0.0, 1.0, "fraction");
    } else if (k == "packet_length") {
      integer(e, c.packet_length, 1, 1024);
    } else if (k == "warmup_cycles") {
      integer(e, c.warmup_cycles, 1, 100000000);
    } else if (k == "measure_cycles") {
      integer(e, c.measure_cycles, 1, 100000000);
    } else if (k == "max_drain_cycles") {
      integer(e, c.max_drain_cycles, 1, 100000000);
    } else if (k == "seed") {
      if (const auto v = parse_number<std::uint64_t>(e.value)) c.seed = *v; else bad(e, "not an unsigned 64-bit integer");
    } else if (k == "link_latency") {
      integer(e, c.link_latency, 1, 64);
    } else if (k == "saturation_factor") {
      real(e, c.saturation_factor, 1.0 + 1e-9, 1e6, "factor");
    } else if (k == "single_stage_ports") {
      integer(e, s.single_stage_ports, 2, 4096);
      single_ports_set = true;
    } else if (k == "refine_saturation") {
      if (const auto b = parse_bool(e.value)) s.refine_saturation = *b; else bad(e, "expected true or false");
    } else if (k == "threads") {
      integer(e, s.threads, 0, 1024);
    } else if (k == "analytics_ports") {
      integer(e, s.analytics_ports, 2, 1 << 20);
    } else if (k == "reliability_r") {
      real(e, s.reliability_r, 0.0, 1.0, "probability");
    } else if (k == "mc_trials") {
      if (const auto v = parse_number<std::uint64_t>(e.value)) s.mc_trials = *v; else bad(e, "not an unsigned integer");
    } else if (k == "path_group") {
      if (!groups_reset) {
        s.path_groups.clear();
        groups_reset = true;
      }
      try {
        const auto g = parse_path_groups("group = " + e.value);
        s.path_groups.push_back(g.front());
      } catch (const std::exception& ex) {
        bad(e, ex.what());
      }
    } else if (k == "output_dir") {
      if (trim(e.value).empty()) bad(e, "empty path"); else s.output_dir = std::string(trim(e.value));
    } else if (k == "format") {
      const auto v = trim(e.value);
      if (v == "csv") s.format = OutputFormat::Csv;
      else if (v == "table") s.format = OutputFormat::Table;
      else bad(e, "expected csv or table");
    } else {
      bad(e, "unknown key");
    }
  }
  if (!single_ports_set) s.single_stage_ports = std::max(2, c.topology.terminals());

  if (s.single_stage_ports % 2) errors.push_back(fmt::format("single_stage_ports {}: must be even", s.single_stage_ports));

  for (const auto& p : c.problems()) errors.push_back(p);

  try {
    path_length_effectiveness(s.path_groups);
  } catch (const std::exception& ex) {
    errors.push_back(fmt::format("path_group: {}", ex.what()));
  }

  if (s.kind == ExperimentKind::AnalyticsTable) {
    const int n = s.analytics_ports;
    if (n < 4 || (n & (n - 1))) errors.push_back(fmt::format("analytics_ports {}: must be a power of two >= 4", n));
  } else if (errors.empty()) {
    if (is_fault_experiment(s.kind) && c.topology.kind == FabricKind::SingleStage) {
      errors.push_back("fault experiments need a multi-stage topology");
    }
    if (const auto* list = std::get_if<std::vector<std::string>>(&s.faults)) {
      try {
        apply_faults(c.topology.build_base(), *list);
      } catch (const std::exception& ex) {
        errors.push_back(fmt::format("faults: {}", ex.what()));
      }
    } else if (errors.empty()) {
      try {
        resolve_faults(s);
      } catch (const std::exception& ex) {
        errors.push_back(fmt::format("faults: {}", ex.what()));
      }
    }
  }

  if (errors.empty()) res.spec = std::move(s);
  return res;
}

ValidationResult validate_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ValidationResult res;
    res.errors.push_back(fmt::format("cannot read config '{}'", path.string()));
    return res;
  }
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return validate_config_text(text);
}

std::string stats_csv(std::span<const StatsReport> reports) {
  std::string out = stats_csv_header() + "\n";
  for (const auto& r : reports) out += to_csv_row(r) + "\n";
  return out;
}

std::string plot_data(std::span<const StatsReport> reports, PlotAxis axis, std::string_view series,
                      std::string_view digest) {
  if (reports.empty()) throw std::invalid_argument("plot data needs at least one report");
  const bool latency = axis == PlotAxis::Latency;
  std::string out = fmt::format("# series: {}\n# config_digest: {}\n# offered_load {} saturated\n", series, digest,
                                latency ? "avg_latency_all" : "accepted_throughput");
  for (const auto& r : reports) {
    out += fmt::format("{:.6f} {:.6f} {}\n", r.offered_load, latency ? r.avg_latency_all : r.accepted_throughput,
                       r.saturated ? 1 : 0);
  }
  return out;
}

double Series::max_accepted() const {
  double best = 0.0;
  for (const auto& r : reports) best = std::max(best, r.accepted_throughput);
  return best;
}

namespace {

void write_file(const std::filesystem::path& path, std::string_view content, std::vector<std::filesystem::path>& files) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
  files.push_back(path);
}

std::string series_summary(const std::vector<Series>& series, OutputFormat format) {
  auto opt = [](const std::optional<SaturationResult>& s, auto get) {
    return s ? fmt::format("{:.6f}", get(*s)) : std::string("-");
  };
  std::string out;
  if (format == OutputFormat::Csv) {
    out = "series,faults,max_accepted,saturation_throughput,stable_rate,saturated_rate,zero_load_latency\n";
  } else {
    out = fmt::format("{:<16} {:>6} {:>13} {:>11} {:>12} {:>15} {:>10}\n", "series", "faults", "max_accepted",
                      "saturation", "stable_rate", "saturated_rate", "zero_load");
  }
  for (const auto& s : series) {
    const double zl = s.reports.empty() ? zero_load_latency(s.config) : s.reports.front().zero_load_latency;
    const std::string sat = opt(s.saturation, [](const SaturationResult& r) { return r.throughput; });
    const std::string stable = opt(s.saturation, [](const SaturationResult& r) { return r.stable_rate; });
    const std::string satr = s.saturation && s.saturation->saturated_rate
                                 ? fmt::format("{:.6f}", *s.saturation->saturated_rate)
                                 : std::string("-");
    const auto faults = s.config.topology.faults.size();
    if (format == OutputFormat::Csv) {
      out += fmt::format("{},{},{:.6f},{},{},{},{:.1f}\n", s.name, faults, s.max_accepted(), sat, stable, satr, zl);
    } else {
      out += fmt::format("{:<16} {:>6} {:>13.6f} {:>11} {:>12} {:>15} {:>10.1f}\n", s.name, faults,
                         s.max_accepted(), sat, stable, satr, zl);
    }
  }
  return out;
}

std::string reliability_oracle_csv(const ExperimentSpec& spec) {
  std::string out = "ports,r,closed_form,mc_trials,mc_estimate\n";
  for (const int n : {4, 8}) {
    const auto mc = terminal_reliability_monte_carlo(n, spec.reliability_r, spec.mc_trials, spec.base.seed);
    out += fmt::format("{},{},{:.6f},{},{:.6f}\n", n, spec.reliability_r, reliability_multi_stage(n, spec.reliability_r),
                       mc.trials, mc.estimate());
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, bool write) {
  ExperimentResult result;
  const std::string kind_name(to_string(spec.kind));

  ExperimentSpec resolved = spec;
  std::vector<std::string> fault_order;
  if (spec.kind != ExperimentKind::AnalyticsTable) {
    fault_order = resolve_faults(spec);
    resolved.faults = fault_order;
  }
  result.manifest = to_config_text(resolved) + fmt::format("tool_version = {}\n", tool_version());
  const std::string digest = config_digest(result.manifest);

  if (write) std::filesystem::create_directories(spec.output_dir);
  auto out_path = [&](std::string_view suffix) { return spec.output_dir / fmt::format("{}_{}", kind_name, suffix); };

  if (spec.kind == ExperimentKind::AnalyticsTable) {
    const auto single = single_stage_metrics(spec.analytics_ports, spec.reliability_r);
    const auto multi = multi_stage_metrics(spec.analytics_ports, spec.reliability_r, BufferScheme::Baseline36N,
                                           spec.path_groups, spec.mc_trials, spec.base.seed);
    auto memeff = multi_stage_metrics(spec.analytics_ports, spec.reliability_r, BufferScheme::MemoryEfficient24N,
                                      spec.path_groups, 0, spec.base.seed);
    memeff.monte_carlo = multi.monte_carlo;
    result.metrics = {single, multi, memeff};
    result.summary = spec.format == OutputFormat::Csv ? metrics_csv(result.metrics) : metrics_table(result.metrics);
    if (write) {
      write_file(out_path("metrics.csv"), metrics_csv(result.metrics), result.files);
      write_file(out_path("metrics.txt"), metrics_table(result.metrics), result.files);
      write_file(out_path("reliability.csv"), reliability_oracle_csv(spec), result.files);
      write_file(out_path("manifest.txt"), result.manifest, result.files);
    }
    return result;
  }

  auto make_series = [&](std::string name, SimConfig cfg) {
    Series s;
    s.name = std::move(name);
    s.config = std::move(cfg);
    return s;
  };

  std::vector<Series>& series = result.series;
  SimConfig multi = spec.base;
  switch (spec.kind) {
    case ExperimentKind::LatencyCompare:
    case ExperimentKind::ThroughputCompare: {
      SimConfig single = spec.base;
      single.topology = TopologySpec{};
      single.topology.kind = FabricKind::SingleStage;
      single.topology.ports = spec.single_stage_ports;
      multi.topology.faults = fault_order;
      series.push_back(make_series("single-stage", single));
      series.push_back(make_series("multi-stage", multi));
      break;
    }
    case ExperimentKind::FaultLatency:
    case ExperimentKind::FaultThroughput:
      for (std::size_t k = 0; k <= fault_order.size(); ++k) {
        SimConfig cfg = spec.base;
        cfg.topology.faults.assign(fault_order.begin(), fault_order.begin() + static_cast<std::ptrdiff_t>(k));
        series.push_back(make_series(fmt::format("faults-{}", k), cfg));
      }
      break;
    case ExperimentKind::MemoryCompare: {
      multi.topology.faults = fault_order;
      SimConfig base = multi;
      base.scheme = BufferScheme::Baseline36N;
      SimConfig memeff = multi;
      memeff.scheme = BufferScheme::MemoryEfficient24N;
      series.push_back(make_series("baseline", base));
      series.push_back(make_series("memeff", memeff));
      break;
    }
    case ExperimentKind::AnalyticsTable: break;
  }

  for (auto& s : series) {
    s.reports = sweep_injection(s.config, spec.rates, spec.threads);
    if (wants_saturation(spec.kind) && spec.refine_saturation) s.saturation = find_saturation(s.config);
  }
  result.summary = series_summary(series, spec.format);

  if (write) {
    const bool latency_axis = spec.kind == ExperimentKind::LatencyCompare || spec.kind == ExperimentKind::FaultLatency ||
                              spec.kind == ExperimentKind::MemoryCompare;
    const bool throughput_axis = !latency_axis || spec.kind == ExperimentKind::MemoryCompare;
    for (const auto& s : series) {
      write_file(out_path(s.name + ".csv"), stats_csv(s.reports), result.files);
      if (latency_axis) {
        write_file(out_path(s.name + "_latency.dat"), plot_data(s.reports, PlotAxis::Latency, s.name, digest),
                   result.files);
      }
      if (throughput_axis) {
        write_file(out_path(s.name + "_throughput.dat"), plot_data(s.reports, PlotAxis::Throughput, s.name, digest),
                   result.files);
      }
    }
    write_file(out_path("summary.csv"), series_summary(series, OutputFormat::Csv), result.files);
    write_file(out_path("manifest.txt"), result.manifest, result.files);
  }
  return result;
}

}  // namespace tsnfabric
