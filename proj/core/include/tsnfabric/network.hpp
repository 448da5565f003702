#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "tsnfabric/rng.hpp"
#include "tsnfabric/router.hpp"
#include "tsnfabric/topology.hpp"

namespace tsnfabric {

struct NetworkConfig {
  PriorityMode mode = PriorityMode::ByVC;
  BufferScheme scheme = BufferScheme::Baseline36N;
  int link_latency = 1;
};

/// Fixed-latency channel carrying flits one way and credits the other.
struct Channel {
  struct FlitInFlight {
    Cycle arrive = 0;
    int vc = 0;
    Flit flit;
  };
  struct CreditInFlight {
    Cycle arrive = 0;
    int vc = 0;
  };
  std::deque<FlitInFlight> flits;
  std::deque<CreditInFlight> credits;
};

/// Traffic source of one terminal: unbounded per-class queues feeding the
/// VCs of the ingress input port over the injection channel.
struct TerminalSource {
  struct InjectVc {
    int capacity = 0;
    int credits = 0;
    int packet = -1;  // slot of the packet being serialised, or -1
    int next_seq = 0;
  };
  std::deque<int> queue[2];  // indexed by Priority; PriorityMode::None uses Low only
  std::vector<InjectVc> vcs;
  int next_vc = 0;
  std::size_t queued() const { return queue[0].size() + queue[1].size(); }
};

/// The whole fabric: routers, channels, terminal sources and sinks,
/// advanced one cycle at a time in a single thread.
class Network {
 public:
  using EjectHandler = std::function<void(const Packet&)>;

  Network(FabricTopology topo, NetworkConfig cfg, std::uint64_t seed);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const FabricTopology& topology() const { return topo_; }
  const NetworkConfig& config() const { return cfg_; }

  /// Queues a new packet at the source terminal; returns its id.
  std::uint64_t create_packet(int src, int dst, Priority priority, int length, Cycle now, bool tagged);

  void set_eject_handler(EjectHandler h) { on_eject_ = std::move(h); }

  /// Advances the fabric through cycle `now`. Cycles must be consecutive.
  void step(Cycle now);

  std::uint64_t packets_created() const { return created_; }
  std::uint64_t packets_ejected() const { return ejected_; }
  /// Packets created and not yet ejected, from the counters.
  std::uint64_t packets_in_flight() const { return created_ - ejected_; }
  /// Packets found by walking every queue, buffer and channel.
  std::uint64_t count_in_flight_structural() const;

  /// Per VC: upstream credits + flits in transit + downstream occupancy +
  /// credits in transit == capacity. Returns an empty string when sound.
  std::string check_credit_invariant() const;

  int buffer_slots() const;
  std::size_t source_backlog() const;

  RouterState& router(int element) { return routers_.at(element); }
  const RouterState& router(int element) const { return routers_.at(element); }
  const TerminalSource& source(int terminal) const { return sources_.at(terminal); }

  void enable_trace(bool on);
  /// Drains and returns trace events gathered since the last call.
  std::vector<TraceEvent> take_trace();
  void enable_audit(bool on);
  std::vector<AllocationRecord> take_audit();

 private:
  struct ChannelEnds {
    int src_element = -1;  // -1: terminal source
    int src_port = -1;
    int dst_element = -1;  // -1: terminal sink
    int dst_port = -1;
    int terminal = -1;
  };

  int allocate_slot();
  void deliver(Cycle now);
  void inject(Cycle now);
  void eject(const Flit& f, Cycle now);

  FabricTopology topo_;
  NetworkConfig cfg_;
  RoutingTable table_;
  std::vector<RouterState> routers_;
  std::vector<RandomStream> route_rng_;
  std::vector<Channel> channels_;
  std::vector<ChannelEnds> ends_;
  std::vector<TerminalSource> sources_;

  std::vector<Packet> packets_;
  std::vector<int> free_slots_;
  std::uint64_t next_id_ = 0;
  std::uint64_t created_ = 0;
  std::uint64_t ejected_ = 0;
  EjectHandler on_eject_;

  bool tracing_ = false;
  std::vector<TraceEvent> trace_;
  bool auditing_ = false;
  std::vector<AllocationRecord> audit_;
};

}  // namespace tsnfabric
