#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tsnfabric/router.hpp"
#include "tsnfabric/topology.hpp"

namespace tsnfabric {

class AnalyticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReliabilityValue {
  double value = 0.0;
  bool out_of_range = false;  // value fell outside [0, 1]
};

/// 1 - (N/2)(1 - r): every one of the N/2 elements is in series. Negative
/// values are returned unclamped with `out_of_range` set.
ReliabilityValue reliability_single_stage(int ports, double r);

/// Terminal reliability of the Benes fabric:
/// r^(log2 N - 1) * (1 - (1 - r^2 (1 - (1 - r)^2))^2).
double reliability_multi_stage(int ports, double r);

/// Counts and lengths (in switch elements) of one path group.
struct PathGroupSummary {
  int nomp = 0;
  int lomp = 0;
  int noap = 0;
  int loap = 0;
  friend bool operator==(const PathGroupSummary&, const PathGroupSummary&) = default;
};

PathGroupSummary summarize(const PathGroups& groups);

/// Sum over groups of nomp/lomp + noap/loap; the auxiliary term is skipped
/// when noap is 0. Throws AnalyticsError on a zero-length group.
double path_length_effectiveness(std::span<const PathGroupSummary> groups);

PathGroupSummary default_single_stage_groups();
/// Two main and two auxiliary paths, all five elements long.
PathGroupSummary default_multi_stage_groups();

/// Path-group document: one `group = nomp, lomp, noap, loap` line per
/// group, `#` comments allowed.
std::vector<PathGroupSummary> parse_path_groups(std::string_view text);
std::string path_groups_to_text(std::span<const PathGroupSummary> groups);

struct CostPerUnit {
  double closed_form = 0.0;
  std::optional<double> first_principles;  // multi-stage only
  bool diverges = false;
};

/// Single stage: (4 * N/2) / N. Benes: 2N(2(log2 N - 1) - 1) alongside the
/// cross-point total divided by the enumerated path count.
CostPerUnit cost_per_unit(FabricKind kind, int ports);

/// Sum of k_in * k_out cross-points over all elements.
int crosspoint_cost(const FabricTopology& topo);
/// Cross-point cost divided by the fault-free paths summed over all
/// ordered terminal pairs.
double cost_per_path(const FabricTopology& topo);

/// Number of 2x2 elements: N/2 single stage, N/2 (2 log2 N - 1) Benes.
int complexity(FabricKind kind, int ports);

/// Flit slots of a 3-stage fabric with N ports per stage: 36N or 24N.
int buffer_memory(BufferScheme scheme, int ports);
/// Fractional saving of the memory-efficient scheme (1/3).
double buffer_reduction();

struct MonteCarloEstimate {
  std::uint64_t trials = 0;
  std::uint64_t connected = 0;
  double estimate() const { return trials ? static_cast<double>(connected) / static_cast<double>(trials) : 0.0; }
};

/// Fails each element of the Benes fabric with probability 1 - r and counts
/// trials in which some enumerated src->dst path survives.
MonteCarloEstimate terminal_reliability_monte_carlo(int ports, double r, std::uint64_t trials, std::uint64_t seed,
                                                    int src = 0, int dst = -1);

struct MetricSet {
  std::string label;
  FabricKind kind = FabricKind::SingleStage;
  int ports = 0;
  double r = 0.0;
  double reliability = 0.0;
  bool reliability_warning = false;
  double ple = 0.0;
  CostPerUnit cost;
  int complexity = 0;
  int buffer_total = 0;
  std::optional<MonteCarloEstimate> monte_carlo;
};

MetricSet single_stage_metrics(int ports, double r);
MetricSet multi_stage_metrics(int ports, double r, BufferScheme scheme,
                              std::span<const PathGroupSummary> groups, std::uint64_t mc_trials,
                              std::uint64_t seed);

std::string metrics_csv(std::span<const MetricSet> rows);
std::string metrics_table(std::span<const MetricSet> rows);

}  // namespace tsnfabric
