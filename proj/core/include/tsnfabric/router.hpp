#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsnfabric/allocator.hpp"
#include "tsnfabric/topology.hpp"

namespace tsnfabric {

class RandomStream;

using Cycle = std::int64_t;

/// Router pipeline: RC, VA, SA, ST, one cycle each. A head flit written
/// into a buffer in cycle a is routed in a+1, allocated a VC in a+2, wins
/// the switch in a+3 and traverses in a+4; with a 1-cycle link it is
/// written downstream in a+5.
inline constexpr int kPipelineDepth = 4;

struct Packet {
  std::uint64_t id = 0;
  int src = 0;
  int dst = 0;
  Priority priority = Priority::Low;
  int length = 1;
  Cycle create_cycle = 0;   // latency clock starts here (source queueing counts)
  Cycle inject_cycle = -1;  // head flit leaves the source
  Cycle eject_cycle = -1;   // tail flit reaches the sink
  bool tagged = false;
  int flits_ejected = 0;
};

struct Flit {
  int packet = -1;  // packet pool slot
  std::uint64_t packet_id = 0;
  int seq = 0;
  bool head = false;
  bool tail = false;
  Priority priority = Priority::Low;
  int dst = 0;
  Cycle arrival = 0;
  int route_port = -1;
  Cycle route_cycle = -1;
};

/// Fixed-capacity FIFO of flits.
class FlitQueue {
 public:
  explicit FlitQueue(int capacity = 0) : slots_(capacity) {}
  int capacity() const { return static_cast<int>(slots_.size()); }
  int size() const { return size_; }
  bool empty() const { return size_ == 0; }
  bool full() const { return size_ == capacity(); }
  Flit& front() { return slots_[head_]; }
  const Flit& front() const { return slots_[head_]; }
  Flit& at(int i) { return slots_[(head_ + i) % capacity()]; }
  const Flit& at(int i) const { return slots_[(head_ + i) % capacity()]; }
  void push(const Flit& f);
  Flit pop();

 private:
  std::vector<Flit> slots_;
  int head_ = 0;
  int size_ = 0;
};

enum class VcState { Idle, Routing, WaitingVC, Active };
std::string_view to_string(VcState s);

struct VirtualChannel {
  int index = 0;
  FlitQueue buffer;
  VcState state = VcState::Idle;
  std::optional<Priority> priority_class;  // set when VCs are class-pinned
  int out_port = -1;
  int out_vc = -1;
  Cycle vc_grant_cycle = -1;

  int capacity() const { return buffer.capacity(); }
  int occupancy() const { return buffer.size(); }
  void transition(VcState next);
};

enum class BufferScheme { Baseline36N, MemoryEfficient24N };
std::string_view to_string(BufferScheme s);
std::optional<BufferScheme> parse_buffer_scheme(std::string_view name);

struct BufferConfig {
  int vcs = 2;
  int depth = 6;
};

/// Input-port buffering of a switch in the given stage. Baseline: 2 VCs of
/// 6 flits everywhere. Memory-efficient: 2 x 6 in the first stage, a single
/// 6-flit VC in later stages.
BufferConfig buffer_config(BufferScheme scheme, int stage);

/// Output VC index a packet of class `cls` must use on a port with `vcs`
/// VCs when VCs are class-pinned (VC 0 High, VC 1.. Low).
int pinned_vc(Priority cls, int vcs);

/// Terminals reachable through each output port over fault-free links.
class RoutingTable {
 public:
  RoutingTable() = default;
  explicit RoutingTable(const FabricTopology& topo);

  bool reaches(int element, int port, int dst) const;
  /// Output ports of `element` with a fault-free route to `dst`, ascending.
  std::vector<int> candidates(int element, int dst) const;

 private:
  int terminals_ = 0;
  std::vector<std::vector<std::vector<bool>>> reach_;  // [element][port][terminal]
};

/// Route computation. A single candidate is returned without consuming
/// randomness; several candidates (Clos ingress middles, Benes upper
/// stages) are chosen uniformly. nullopt means NoRoute: every candidate
/// link is faulty.
std::optional<int> route_compute(int element, int dst, const RoutingTable& table, RandomStream& rng);

struct OutputVc {
  int capacity = 0;
  int credits = 0;
  bool allocated = false;
};

struct OutputPort {
  std::vector<OutputVc> vcs;  // downstream input VCs; empty when facing a terminal
  int channel = -1;
  int terminal = -1;
  int held_by = -1;  // flat input VC holding the crossbar (ByPacket)
  bool to_terminal() const { return terminal >= 0; }
};

struct InputPort {
  std::vector<VirtualChannel> vcs;
  int channel = -1;
  int terminal = -1;
  int held_by = -1;  // flat input VC holding the crossbar (ByPacket)
};

/// A flit leaving through the crossbar this cycle.
struct Departure {
  int in_port = 0;
  int in_vc = 0;
  int out_port = 0;
  int out_vc = 0;
  Flit flit;
};

enum class TraceKind { Inject, Route, VcGrant, SwitchGrant, Traverse, Eject };
std::string_view to_string(TraceKind k);

struct TraceEvent {
  Cycle cycle = 0;
  int router = -1;  // -1 for terminal events
  TraceKind kind = TraceKind::Route;
  std::uint64_t packet = 0;
  int in_port = -1;
  int in_vc = -1;
  int out_port = -1;
  int out_vc = -1;
  Priority priority = Priority::Low;
};

/// `cycle router event packet key=value...`
std::string format_trace_line(const TraceEvent& ev);

enum class AllocStage { VcAlloc, SwitchAlloc };

struct AllocationRecord {
  Cycle cycle = 0;
  int router = 0;
  AllocStage stage = AllocStage::VcAlloc;
  std::vector<AllocRequest> requests;
  std::vector<AllocGrant> grants;
};

/// Per-element pipeline state. Phases run in the order
/// switch_traverse, switch_allocate, vc_allocate, route_compute within a
/// cycle, so a VC freed by SA can be re-allocated in the same cycle.
class RouterState {
 public:
  RouterState(const FabricTopology& topo, int element, PriorityMode mode, BufferScheme scheme);

  int element() const { return element_; }
  PriorityMode mode() const { return mode_; }
  int max_vcs() const { return max_vcs_; }

  std::vector<InputPort>& inputs() { return inputs_; }
  const std::vector<InputPort>& inputs() const { return inputs_; }
  std::vector<OutputPort>& outputs() { return outputs_; }
  const std::vector<OutputPort>& outputs() const { return outputs_; }
  const std::vector<Departure>& pending_traversals() const { return pending_st_; }

  /// Buffer write. Throws std::logic_error if the VC is full.
  void receive_flit(int in_port, int vc, Flit flit, Cycle now);
  /// Credit return from the downstream VC behind an output port.
  void receive_credit(int out_port, int vc);

  /// ST: flits granted in the previous cycle leave the crossbar.
  std::vector<Departure> switch_traverse(Cycle now);
  /// SA: a granted flit is read out of its buffer, so the caller returns one
  /// credit upstream per grant (group = input port, member = VC).
  std::vector<AllocGrant> switch_allocate(Cycle now);
  std::vector<AllocGrant> vc_allocate(Cycle now);
  void route_compute(Cycle now, const RoutingTable& table, RandomStream& rng);

  int buffer_slots() const;

  void set_trace(std::vector<TraceEvent>* sink) { trace_ = sink; }
  void set_audit(std::vector<AllocationRecord>* sink) { audit_ = sink; }

 private:
  int flat(int port, int vc) const { return port * max_vcs_ + vc; }
  bool strict() const { return mode_ != PriorityMode::None; }
  Priority request_class(const Flit& f) const;
  void after_tail(VirtualChannel& vc);
  void emit(TraceKind kind, Cycle now, const Flit& f, int in_port, int in_vc, int out_port, int out_vc);

  int element_ = 0;
  PriorityMode mode_ = PriorityMode::ByVC;
  int max_vcs_ = 1;
  std::vector<InputPort> inputs_;
  std::vector<OutputPort> outputs_;
  std::vector<Departure> pending_st_;
  SeparableAllocator vc_alloc_;
  SeparableAllocator sw_alloc_;
  std::vector<AllocRequest> requests_;

  std::vector<TraceEvent>* trace_ = nullptr;
  std::vector<AllocationRecord>* audit_ = nullptr;
};

}  // namespace tsnfabric
