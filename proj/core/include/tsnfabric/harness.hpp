#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsnfabric/analytics.hpp"
#include "tsnfabric/sim.hpp"

namespace tsnfabric {

std::string_view tool_version();

enum class ExperimentKind {
  LatencyCompare,
  ThroughputCompare,
  FaultLatency,
  FaultThroughput,
  MemoryCompare,
  AnalyticsTable,
};

std::string_view to_string(ExperimentKind k);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);
std::span<const ExperimentKind> all_experiments();

enum class OutputFormat { Csv, Table };

/// `faults` in a config is either a count (seeded placement) or an explicit
/// selector list. Fault experiments treat the list as the nested order.
using FaultRequest = std::variant<int, std::vector<std::string>>;

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::LatencyCompare;
  /// Multi-stage fabric and run parameters shared by every series.
  SimConfig base;
  int single_stage_ports = 8;
  std::vector<double> rates;
  FaultRequest faults = 0;
  /// Bisection towards the saturation point for throughput experiments.
  bool refine_saturation = true;
  /// 0: hardware concurrency.
  unsigned threads = 0;

  int analytics_ports = 8;
  double reliability_r = 0.9;
  std::uint64_t mc_trials = 1000000;
  std::vector<PathGroupSummary> path_groups{default_multi_stage_groups()};

  std::filesystem::path output_dir = "results";
  OutputFormat format = OutputFormat::Csv;
};

/// Defaults for an experiment: rate grid 0.05..0.95, Clos3(2,2,4), all-Low
/// traffic except memory-compare (half High), faults 0..3 for fault runs.
ExperimentSpec default_spec(ExperimentKind kind);
std::vector<double> default_rate_grid();

struct ValidationResult {
  std::optional<ExperimentSpec> spec;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty() && spec.has_value(); }
};

ValidationResult validate_config_text(std::string_view text);
/// Reads and checks a config file; every problem is reported, not only the first.
ValidationResult validate_config(const std::filesystem::path& path);

/// Normalized config: every key, defaults filled in, reloadable by
/// validate_config_text.
std::string to_config_text(const ExperimentSpec& spec);

/// 64-bit FNV-1a, lowercase hex.
std::string config_digest(std::string_view text);

/// Inter-stage links from the first stage, ordered so successive faults
/// land on distinct second-stage elements. Links whose failure would
/// disconnect a terminal pair are skipped. Prefixes are nested by
/// construction.
std::vector<std::string> seeded_fault_order(const TopologySpec& topo, std::uint64_t seed, int count);

enum class PlotAxis { Latency, Throughput };

/// Whitespace columns `offered_load <metric> saturated` under `#` header
/// comments. Throws std::invalid_argument on an empty report list.
std::string plot_data(std::span<const StatsReport> reports, PlotAxis axis, std::string_view series,
                      std::string_view digest);

std::string stats_csv(std::span<const StatsReport> reports);

struct Series {
  std::string name;
  SimConfig config;
  std::vector<StatsReport> reports;
  std::optional<SaturationResult> saturation;
  double max_accepted() const;
};

struct ExperimentResult {
  std::vector<Series> series;
  std::vector<MetricSet> metrics;
  std::vector<std::filesystem::path> files;
  std::string manifest;
  std::string summary;
};

/// Runs every series of the experiment. With `write` set, writes one CSV and
/// one plot file per series, a summary and the manifest to output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec, bool write = true);

}  // namespace tsnfabric
