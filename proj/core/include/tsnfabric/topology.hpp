#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsnfabric {

enum class FabricKind { SingleStage, Clos3, Benes };

std::string_view to_string(FabricKind kind);
std::optional<FabricKind> parse_fabric_kind(std::string_view name);

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (element, port) endpoint. Output ports on the source side of a link,
/// input ports on the destination side.
struct PortRef {
  int element = -1;
  int port = -1;
  auto operator<=>(const PortRef&) const = default;
};

struct SwitchElement {
  int id = 0;
  int stage = 0;
  int index = 0;  // position within its stage
  int radix_in = 1;
  int radix_out = 1;
  bool operator==(const SwitchElement&) const = default;
};

/// Inter-stage link. Terminal injection/ejection channels are not links.
struct Link {
  PortRef src;
  PortRef dst;
  bool faulty = false;
  bool operator==(const Link&) const = default;
};

struct ClosParams {
  int n = 0;  // inputs per ingress switch
  int m = 0;  // middle switches
  int r = 0;  // ingress (and egress) switches
  bool operator==(const ClosParams&) const = default;
};

/// Immutable fabric graph. Builders produce fault-free fabrics; fault
/// application returns a new value.
class FabricTopology {
 public:
  FabricKind kind() const { return kind_; }
  int terminals() const { return terminals_; }
  int stage_count() const { return stage_count_; }
  const std::optional<ClosParams>& clos_params() const { return clos_; }

  const std::vector<SwitchElement>& elements() const { return elements_; }
  const SwitchElement& element(int id) const { return elements_.at(id); }
  const std::vector<Link>& links() const { return links_; }
  int element_at(int stage, int index) const;

  /// Element input port fed by the terminal's injection channel.
  PortRef injection_port(int terminal) const { return injection_.at(terminal); }
  /// Element output port draining into the terminal's ejection channel.
  PortRef ejection_port(int terminal) const { return ejection_.at(terminal); }

  /// Link index on an output/input port, or -1 for terminal-facing ports.
  int out_link(int element, int port) const { return out_link_.at(element).at(port); }
  int in_link(int element, int port) const { return in_link_.at(element).at(port); }
  /// Terminal driven by an output port, or -1.
  int ejection_terminal(int element, int port) const { return eject_terminal_.at(element).at(port); }
  /// Terminal feeding an input port, or -1.
  int injection_terminal(int element, int port) const { return inject_terminal_.at(element).at(port); }

  /// Element count of the 2x2 decomposition used by the closed-form analysis.
  /// Single-stage N/2; Benes N/2(2log2N-1); Clos3 counts its sub-switches.
  int analytic_element_count() const;

  std::string link_selector(int link) const;
  std::optional<int> find_link(std::string_view selector) const;
  std::vector<int> faulty_links() const;
  int fault_count() const;

  bool operator==(const FabricTopology&) const = default;

 private:
  friend class TopologyBuilder;
  friend struct FaultEditor;

  FabricKind kind_ = FabricKind::SingleStage;
  int terminals_ = 0;
  int stage_count_ = 0;
  std::optional<ClosParams> clos_;
  std::vector<SwitchElement> elements_;
  std::vector<Link> links_;
  std::vector<PortRef> injection_;
  std::vector<PortRef> ejection_;
  std::vector<std::vector<int>> out_link_;
  std::vector<std::vector<int>> in_link_;
  std::vector<std::vector<int>> eject_terminal_;
  std::vector<std::vector<int>> inject_terminal_;
};

FabricTopology build_single_stage(int ports);
FabricTopology build_clos3(int n, int m, int r);
FabricTopology build_benes(int ports);

struct FaultResult {
  FabricTopology topology;
  int disconnected_pairs = 0;
};

/// Marks the selected links faulty. A selector is either a link
/// "S.I.P->S.J.Q" (stage.element.port on each side) or an element "S.I",
/// which expands to every inter-stage link incident on that element.
/// Throws TopologyError on unknown or repeated selectors.
FaultResult apply_faults(const FabricTopology& topo, std::span<const std::string> selectors);

/// Clears the selected faults (same selector grammar).
FabricTopology remove_faults(const FabricTopology& topo, std::span<const std::string> selectors);

/// Ordered (src, dst) pairs, src == dst included, with no fault-free path.
int count_disconnected_pairs(const FabricTopology& topo);

struct Path {
  std::vector<int> elements;
  std::vector<int> links;
  int length() const { return static_cast<int>(elements.size()); }
  bool operator==(const Path&) const = default;
};

struct PathGroups {
  int src = 0;
  int dst = 0;
  std::vector<Path> main_paths;
  std::vector<Path> aux_paths;

  int nomp() const { return static_cast<int>(main_paths.size()); }
  int lomp() const { return main_paths.empty() ? 0 : main_paths.front().length(); }
  int noap() const { return static_cast<int>(aux_paths.size()); }
  int loap() const { return aux_paths.empty() ? 0 : aux_paths.front().length(); }
  int total() const { return nomp() + noap(); }
};

enum class PathFilter { All, FaultFree };

/// Exhaustive stage-monotonic simple paths from src to dst. Shortest
/// paths form the main group, longer ones the auxiliary group.
PathGroups enumerate_paths(const FabricTopology& topo, int src, int dst,
                           PathFilter filter = PathFilter::FaultFree);

/// `key = value` description: kind, size parameters, one `fault` line
/// per faulty link.
std::string to_text(const FabricTopology& topo);
FabricTopology topology_from_text(std::string_view text);

}  // namespace tsnfabric
