#include "tsnfabric/analytics.hpp"

#include <bit>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "tsnfabric/kvtext.hpp"
#include "tsnfabric/rng.hpp"

namespace tsnfabric {

namespace {

bool is_power_of_two(int n) { return n > 0 && std::has_single_bit(static_cast<unsigned>(n)); }

int log2_exact(int n) { return std::countr_zero(static_cast<unsigned>(n)); }

void require_probability(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw AnalyticsError(fmt::format("probability {} out of [0,1]", r));
}

void require_benes_size(int ports) {
  if (ports < 4 || !is_power_of_two(ports)) {
    throw AnalyticsError(fmt::format("multi-stage size {} must be a power of two >= 4", ports));
  }
}

int parse_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError(fmt::format("not an integer: '{}'", s));
  return v;
}

}  // namespace

ReliabilityValue reliability_single_stage(int ports, double r) {
  if (ports < 2) throw AnalyticsError("single-stage size must be >= 2");
  require_probability(r);
  ReliabilityValue out;
  out.value = 1.0 - (ports / 2) * (1.0 - r);
  out.out_of_range = out.value < 0.0 || out.value > 1.0;
  return out;
}

double reliability_multi_stage(int ports, double r) {
  require_benes_size(ports);
  require_probability(r);
  const double pair = r * r * (1.0 - (1.0 - r) * (1.0 - r));
  return std::pow(r, log2_exact(ports) - 1) * (1.0 - (1.0 - pair) * (1.0 - pair));
}

PathGroupSummary summarize(const PathGroups& groups) {
  return {groups.nomp(), groups.lomp(), groups.noap(), groups.loap()};
}

double path_length_effectiveness(std::span<const PathGroupSummary> groups) {
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.nomp < 0 || g.noap < 0) throw AnalyticsError("negative path count");
    if (g.lomp <= 0) throw AnalyticsError("zero-length main path group");
    total += static_cast<double>(g.nomp) / g.lomp;
    if (g.noap == 0) continue;
    if (g.loap <= 0) throw AnalyticsError("zero-length auxiliary path group");
    total += static_cast<double>(g.noap) / g.loap;
  }
  return total;
}

PathGroupSummary default_single_stage_groups() { return {1, 1, 0, 0}; }

PathGroupSummary default_multi_stage_groups() { return {2, 5, 2, 5}; }

std::vector<PathGroupSummary> parse_path_groups(std::string_view text) {
  const auto doc = KeyValueDocument::parse(text);
  std::vector<PathGroupSummary> out;
  for (const auto& e : doc.entries()) {
    if (e.key != "group") throw ParseError(fmt::format("line {}: unknown key '{}'", e.line, e.key));
    const auto fields = split_list(e.value);
    if (fields.size() != 4) {
      throw ParseError(fmt::format("line {}: expected nomp, lomp, noap, loap", e.line));
    }
    out.push_back({parse_int(fields[0]), parse_int(fields[1]), parse_int(fields[2]), parse_int(fields[3])});
  }
  if (out.empty()) throw ParseError("no path groups");
  return out;
}

std::string path_groups_to_text(std::span<const PathGroupSummary> groups) {
  KeyValueDocument doc;
  for (const auto& g : groups) doc.add("group", fmt::format("{}, {}, {}, {}", g.nomp, g.lomp, g.noap, g.loap));
  return doc.to_text();
}

int crosspoint_cost(const FabricTopology& topo) {
  int total = 0;
  for (const auto& el : topo.elements()) total += el.radix_in * el.radix_out;
  return total;
}

double cost_per_path(const FabricTopology& topo) {
  long long paths = 0;
  for (int s = 0; s < topo.terminals(); ++s) {
    for (int d = 0; d < topo.terminals(); ++d) paths += enumerate_paths(topo, s, d).total();
  }
  if (paths == 0) throw AnalyticsError("fabric has no fault-free paths");
  return static_cast<double>(crosspoint_cost(topo)) / static_cast<double>(paths);
}

CostPerUnit cost_per_unit(FabricKind kind, int ports) {
  CostPerUnit out;
  switch (kind) {
    case FabricKind::SingleStage:
      if (ports < 2 || ports % 2) throw AnalyticsError("single-stage size must be even and >= 2");
      out.closed_form = (4.0 * (ports / 2)) / ports;
      return out;
    case FabricKind::Benes: {
      require_benes_size(ports);
      out.closed_form = 2.0 * ports * (2.0 * (log2_exact(ports) - 1) - 1.0);
      out.first_principles = cost_per_path(build_benes(ports));
      out.diverges = std::abs(out.closed_form - *out.first_principles) > 1e-9 * std::abs(out.closed_form);
      return out;
    }
    case FabricKind::Clos3: break;
  }
  throw AnalyticsError("cost per unit is defined for the single-stage and Benes fabrics; use cost_per_path");
}

int complexity(FabricKind kind, int ports) {
  switch (kind) {
    case FabricKind::SingleStage:
      if (ports < 2 || ports % 2) throw AnalyticsError("single-stage size must be even and >= 2");
      return ports / 2;
    case FabricKind::Benes:
      require_benes_size(ports);
      return ports / 2 * (2 * log2_exact(ports) - 1);
    case FabricKind::Clos3: break;
  }
  throw AnalyticsError("complexity counts 2x2 elements of the single-stage and Benes fabrics");
}

int buffer_memory(BufferScheme scheme, int ports) {
  if (ports < 1) throw AnalyticsError("port count must be >= 1");
  int per_port = 0;
  for (int stage = 0; stage < 3; ++stage) {
    const BufferConfig bc = buffer_config(scheme, stage);
    per_port += bc.vcs * bc.depth;
  }
  return per_port * ports;
}

double buffer_reduction() {
  const double base = buffer_memory(BufferScheme::Baseline36N, 1);
  return (base - buffer_memory(BufferScheme::MemoryEfficient24N, 1)) / base;
}

MonteCarloEstimate terminal_reliability_monte_carlo(int ports, double r, std::uint64_t trials, std::uint64_t seed,
                                                    int src, int dst) {
  require_benes_size(ports);
  require_probability(r);
  const FabricTopology topo = build_benes(ports);
  const int n_elem = static_cast<int>(topo.elements().size());
  if (n_elem > 64) throw AnalyticsError("Monte Carlo oracle supports at most 64 elements");
  if (dst < 0) dst = ports - 1;

  const PathGroups groups = enumerate_paths(topo, src, dst, PathFilter::All);
  std::vector<std::uint64_t> masks;
  for (const auto* list : {&groups.main_paths, &groups.aux_paths}) {
    for (const auto& p : *list) {
      std::uint64_t m = 0;
      for (int e : p.elements) m |= std::uint64_t{1} << e;
      masks.push_back(m);
    }
  }

  RandomStream rng(seed, StreamDomain::Oracle, 0);
  MonteCarloEstimate est;
  est.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::uint64_t up = 0;
    for (int e = 0; e < n_elem; ++e) {
      if (rng.uniform() < r) up |= std::uint64_t{1} << e;
    }
    for (const auto m : masks) {
      if ((m & up) == m) {
        ++est.connected;
        break;
      }
    }
  }
  return est;
}

MetricSet single_stage_metrics(int ports, double r) {
  MetricSet m;
  m.label = "single-stage";
  m.kind = FabricKind::SingleStage;
  m.ports = ports;
  m.r = r;
  const auto rel = reliability_single_stage(ports, r);
  m.reliability = rel.value;
  m.reliability_warning = rel.out_of_range;
  const PathGroupSummary g = default_single_stage_groups();
  m.ple = path_length_effectiveness(std::span(&g, 1));
  m.cost = cost_per_unit(FabricKind::SingleStage, ports);
  m.complexity = complexity(FabricKind::SingleStage, ports);
  const BufferConfig bc = buffer_config(BufferScheme::Baseline36N, 0);
  m.buffer_total = ports * bc.vcs * bc.depth;
  return m;
}

MetricSet multi_stage_metrics(int ports, double r, BufferScheme scheme,
                              std::span<const PathGroupSummary> groups, std::uint64_t mc_trials,
                              std::uint64_t seed) {
  MetricSet m;
  m.label = fmt::format("multi-stage ({})", to_string(scheme));
  m.kind = FabricKind::Benes;
  m.ports = ports;
  m.r = r;
  m.reliability = reliability_multi_stage(ports, r);
  m.reliability_warning = m.reliability < 0.0 || m.reliability > 1.0;
  m.ple = path_length_effectiveness(groups);
  m.cost = cost_per_unit(FabricKind::Benes, ports);
  m.complexity = complexity(FabricKind::Benes, ports);
  m.buffer_total = buffer_memory(scheme, ports);
  if (mc_trials > 0 && ports <= 16) m.monte_carlo = terminal_reliability_monte_carlo(ports, r, mc_trials, seed);
  return m;
}

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : ""; }

}  // namespace

std::string metrics_csv(std::span<const MetricSet> rows) {
  std::string out =
      "label,kind,ports,r,reliability,reliability_warning,ple,cost_per_unit,cost_first_principles,"
      "cost_diverges,complexity,buffer_total,mc_trials,mc_estimate\n";
  for (const auto& m : rows) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{},{:.6f},{:.6f},{},{},{},{},{},{}\n", m.label, to_string(m.kind),
                       m.ports, m.r, m.reliability, m.reliability_warning ? 1 : 0, m.ple, m.cost.closed_form,
                       optional_number(m.cost.first_principles), m.cost.diverges ? 1 : 0, m.complexity,
                       m.buffer_total, m.monte_carlo ? m.monte_carlo->trials : 0,
                       m.monte_carlo ? fmt::format("{:.6f}", m.monte_carlo->estimate()) : "");
  }
  return out;
}

std::string metrics_table(std::span<const MetricSet> rows) {
  std::string out = fmt::format("{:<26} {:>5} {:>5} {:>12} {:>6} {:>10} {:>12} {:>10} {:>8} {:>12}\n", "fabric",
                                "N", "r", "reliability", "PLE", "cost/unit", "cost/path", "elements", "buffer",
                                "monte-carlo");
  for (const auto& m : rows) {
    std::string rel = fmt::format("{:.6f}", m.reliability);
    if (m.reliability_warning) rel += "!";
    out += fmt::format("{:<26} {:>5} {:>5.2f} {:>12} {:>6.3f} {:>10.4f} {:>12} {:>10} {:>8} {:>12}\n", m.label,
                       m.ports, m.r, rel, m.ple, m.cost.closed_form,
                       m.cost.first_principles ? fmt::format("{:.4f}", *m.cost.first_principles) : "-",
                       m.complexity, m.buffer_total,
                       m.monte_carlo ? fmt::format("{:.6f}", m.monte_carlo->estimate()) : "-");
  }
  bool warned = false;
  for (const auto& m : rows) warned = warned || m.reliability_warning;
  if (warned) out += "! reliability outside [0,1]\n";
  return out;
}

}  // namespace tsnfabric
