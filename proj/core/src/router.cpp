#include "tsnfabric/router.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "tsnfabric/kvtext.hpp"
#include "tsnfabric/rng.hpp"

namespace tsnfabric {

void FlitQueue::push(const Flit& f) {
  if (full()) throw std::logic_error("flit buffer overflow");
  slots_[(head_ + size_) % capacity()] = f;
  ++size_;
}

Flit FlitQueue::pop() {
  if (empty()) throw std::logic_error("pop from empty flit buffer");
  Flit f = slots_[head_];
  head_ = (head_ + 1) % capacity();
  --size_;
  return f;
}

std::string_view to_string(VcState s) {
  switch (s) {
    case VcState::Idle: return "idle";
    case VcState::Routing: return "routing";
    case VcState::WaitingVC: return "waiting_vc";
    case VcState::Active: return "active";
  }
  return "?";
}

void VirtualChannel::transition(VcState next) {
  const bool ok = (state == VcState::Idle && next == VcState::Routing) ||
                  (state == VcState::Routing && next == VcState::WaitingVC) ||
                  (state == VcState::WaitingVC && next == VcState::Active) ||
                  (state == VcState::Active && next == VcState::Idle);
  if (!ok) {
    throw std::logic_error(fmt::format("illegal VC transition {} -> {}", to_string(state), to_string(next)));
  }
  state = next;
}

std::string_view to_string(BufferScheme s) {
  return s == BufferScheme::Baseline36N ? "baseline" : "memeff";
}

std::optional<BufferScheme> parse_buffer_scheme(std::string_view name) {
  name = trim(name);
  if (name == "baseline") return BufferScheme::Baseline36N;
  if (name == "memeff") return BufferScheme::MemoryEfficient24N;
  return std::nullopt;
}

BufferConfig buffer_config(BufferScheme scheme, int stage) {
  if (scheme == BufferScheme::MemoryEfficient24N && stage > 0) return {1, 6};
  return {2, 6};
}

int pinned_vc(Priority cls, int vcs) {
  if (vcs <= 1) return 0;
  return cls == Priority::High ? 0 : 1;
}

RoutingTable::RoutingTable(const FabricTopology& topo) : terminals_(topo.terminals()) {
  const int n_elem = static_cast<int>(topo.elements().size());
  reach_.resize(n_elem);
  for (int e = 0; e < n_elem; ++e) {
    reach_[e].assign(topo.element(e).radix_out, std::vector<bool>(terminals_, false));
  }
  std::vector<int> order(n_elem);
  for (int i = 0; i < n_elem; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return topo.element(a).stage > topo.element(b).stage; });
  for (int e : order) {
    for (int p = 0; p < topo.element(e).radix_out; ++p) {
      if (const int t = topo.ejection_terminal(e, p); t >= 0) reach_[e][p][t] = true;
      const int l = topo.out_link(e, p);
      if (l < 0 || topo.links()[l].faulty) continue;
      for (const auto& next_port : reach_[topo.links()[l].dst.element]) {
        for (int t = 0; t < terminals_; ++t) {
          if (next_port[t]) reach_[e][p][t] = true;
        }
      }
    }
  }
}

bool RoutingTable::reaches(int element, int port, int dst) const { return reach_.at(element).at(port).at(dst); }

std::vector<int> RoutingTable::candidates(int element, int dst) const {
  std::vector<int> out;
  const auto& ports = reach_.at(element);
  for (int p = 0; p < static_cast<int>(ports.size()); ++p) {
    if (ports[p][dst]) out.push_back(p);
  }
  return out;
}

std::optional<int> route_compute(int element, int dst, const RoutingTable& table, RandomStream& rng) {
  const auto cands = table.candidates(element, dst);
  if (cands.empty()) return std::nullopt;
  if (cands.size() == 1) return cands.front();
  return cands[rng.below(cands.size())];
}

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::Inject: return "inject";
    case TraceKind::Route: return "route";
    case TraceKind::VcGrant: return "vc_grant";
    case TraceKind::SwitchGrant: return "sw_grant";
    case TraceKind::Traverse: return "traverse";
    case TraceKind::Eject: return "eject";
  }
  return "?";
}

std::string format_trace_line(const TraceEvent& ev) {
  const std::string where =
      ev.router >= 0 ? fmt::format("r{}", ev.router) : fmt::format("t{}", ev.in_port);
  std::string line = fmt::format("{} {} {} p{}", ev.cycle, where, to_string(ev.kind), ev.packet);
  if (ev.router >= 0) {
    if (ev.in_port >= 0) line += fmt::format(" in={}.{}", ev.in_port, ev.in_vc);
    if (ev.out_port >= 0 && ev.out_vc >= 0) {
      line += fmt::format(" out={}.{}", ev.out_port, ev.out_vc);
    } else if (ev.out_port >= 0) {
      line += fmt::format(" out={}", ev.out_port);
    }
  }
  line += fmt::format(" class={}", to_string(ev.priority));
  return line;
}

RouterState::RouterState(const FabricTopology& topo, int element, PriorityMode mode, BufferScheme scheme)
    : element_(element), mode_(mode) {
  const auto& el = topo.element(element);
  const BufferConfig own = buffer_config(scheme, el.stage);
  const BufferConfig next = buffer_config(scheme, el.stage + 1);
  max_vcs_ = std::max(own.vcs, next.vcs);

  inputs_.resize(el.radix_in);
  for (int p = 0; p < el.radix_in; ++p) {
    inputs_[p].terminal = topo.injection_terminal(element, p);
    for (int v = 0; v < own.vcs; ++v) {
      VirtualChannel vc;
      vc.index = v;
      vc.buffer = FlitQueue(own.depth);
      if (mode_ == PriorityMode::ByVC && own.vcs > 1) vc.priority_class = v == 0 ? Priority::High : Priority::Low;
      inputs_[p].vcs.push_back(std::move(vc));
    }
  }
  outputs_.resize(el.radix_out);
  for (int p = 0; p < el.radix_out; ++p) {
    outputs_[p].terminal = topo.ejection_terminal(element, p);
    if (outputs_[p].to_terminal()) continue;
    outputs_[p].vcs.assign(next.vcs, OutputVc{next.depth, next.depth, false});
  }
  vc_alloc_ = SeparableAllocator(el.radix_in * max_vcs_, 1, el.radix_out * max_vcs_);
  sw_alloc_ = SeparableAllocator(el.radix_in, max_vcs_, el.radix_out);
}

int RouterState::buffer_slots() const {
  int total = 0;
  for (const auto& in : inputs_) {
    for (const auto& vc : in.vcs) total += vc.capacity();
  }
  return total;
}

Priority RouterState::request_class(const Flit& f) const {
  return mode_ == PriorityMode::None ? Priority::Low : f.priority;
}

void RouterState::emit(TraceKind kind, Cycle now, const Flit& f, int in_port, int in_vc, int out_port,
                       int out_vc) {
  if (!trace_) return;
  trace_->push_back({now, element_, kind, f.packet_id, in_port, in_vc, out_port, out_vc, f.priority});
}

void RouterState::receive_flit(int in_port, int vc_index, Flit flit, Cycle now) {
  auto& vc = inputs_.at(in_port).vcs.at(vc_index);
  if (vc.occupancy() >= vc.capacity()) {
    throw std::logic_error(fmt::format("router {} input {}.{}: flit arrived without credit", element_, in_port,
                                       vc_index));
  }
  flit.arrival = now;
  flit.route_port = -1;
  flit.route_cycle = -1;
  vc.buffer.push(flit);
  if (vc.state == VcState::Idle) {
    if (!flit.head) throw std::logic_error("body flit at idle VC");
    vc.transition(VcState::Routing);
  }
}

void RouterState::receive_credit(int out_port, int vc) {
  auto& ovc = outputs_.at(out_port).vcs.at(vc);
  if (++ovc.credits > ovc.capacity) throw std::logic_error("credit overflow");
}

std::vector<Departure> RouterState::switch_traverse(Cycle now) {
  std::vector<Departure> out;
  out.swap(pending_st_);
  for (const auto& d : out) {
    emit(TraceKind::Traverse, now, d.flit, d.in_port, d.in_vc, d.out_port, d.out_vc);
  }
  return out;
}

void RouterState::after_tail(VirtualChannel& vc) {
  vc.transition(VcState::Idle);
  vc.out_port = -1;
  vc.out_vc = -1;
  if (vc.buffer.empty()) return;
  if (!vc.buffer.front().head) throw std::logic_error("packet boundary lost in VC buffer");
  vc.transition(VcState::Routing);
  if (vc.buffer.front().route_port >= 0) vc.transition(VcState::WaitingVC);
}

std::vector<AllocGrant> RouterState::switch_allocate(Cycle now) {
  requests_.clear();
  const bool hold = mode_ == PriorityMode::ByPacket;
  for (int p = 0; p < static_cast<int>(inputs_.size()); ++p) {
    auto& in = inputs_[p];
    for (int v = 0; v < static_cast<int>(in.vcs.size()); ++v) {
      const auto& vc = in.vcs[v];
      if (vc.state != VcState::Active || vc.buffer.empty()) continue;
      const Flit& f = vc.buffer.front();
      if (f.arrival >= now) continue;
      if (f.head && vc.vc_grant_cycle >= now) continue;
      const auto& out = outputs_[vc.out_port];
      if (!out.to_terminal() && out.vcs[vc.out_vc].credits <= 0) continue;
      if (hold && in.held_by >= 0 && in.held_by != flat(p, v)) continue;
      if (hold && out.held_by >= 0 && out.held_by != flat(p, v)) continue;
      requests_.push_back({p, v, vc.out_port, request_class(f)});
    }
  }
  auto grants = sw_alloc_.allocate(requests_, strict());
  if (audit_) audit_->push_back({now, element_, AllocStage::SwitchAlloc, requests_, grants});

  for (const auto& g : grants) {
    auto& in = inputs_[g.group];
    auto& vc = in.vcs[g.member];
    auto& out = outputs_[g.resource];
    Flit f = vc.buffer.pop();
    if (!out.to_terminal()) --out.vcs[vc.out_vc].credits;
    pending_st_.push_back({g.group, g.member, g.resource, vc.out_vc, f});
    emit(TraceKind::SwitchGrant, now, f, g.group, g.member, g.resource, vc.out_vc);
    if (hold && f.head && !f.tail) {
      in.held_by = flat(g.group, g.member);
      out.held_by = flat(g.group, g.member);
    }
    if (f.tail) {
      if (hold && in.held_by == flat(g.group, g.member)) {
        in.held_by = -1;
        out.held_by = -1;
      }
      if (!out.to_terminal()) out.vcs[vc.out_vc].allocated = false;
      after_tail(vc);
    }
  }
  return grants;
}

std::vector<AllocGrant> RouterState::vc_allocate(Cycle now) {
  requests_.clear();
  for (int p = 0; p < static_cast<int>(inputs_.size()); ++p) {
    for (int v = 0; v < static_cast<int>(inputs_[p].vcs.size()); ++v) {
      auto& vc = inputs_[p].vcs[v];
      if (vc.state != VcState::WaitingVC) continue;
      const Flit& f = vc.buffer.front();
      if (f.route_cycle >= now) continue;
      auto& out = outputs_[f.route_port];
      if (out.to_terminal()) {
        // Sinks accept every packet; the VA stage still costs its cycle.
        vc.out_port = f.route_port;
        vc.out_vc = 0;
        vc.vc_grant_cycle = now;
        vc.transition(VcState::Active);
        emit(TraceKind::VcGrant, now, f, p, v, vc.out_port, 0);
        continue;
      }
      const int n_out = static_cast<int>(out.vcs.size());
      const Priority cls = request_class(f);
      if (mode_ == PriorityMode::ByVC) {
        const int w = pinned_vc(f.priority, n_out);
        if (!out.vcs[w].allocated) requests_.push_back({flat(p, v), 0, flat(f.route_port, w), cls});
      } else {
        for (int w = 0; w < n_out; ++w) {
          if (!out.vcs[w].allocated) requests_.push_back({flat(p, v), 0, flat(f.route_port, w), cls});
        }
      }
    }
  }
  auto grants = vc_alloc_.allocate(requests_, strict());
  if (audit_) audit_->push_back({now, element_, AllocStage::VcAlloc, requests_, grants});

  for (const auto& g : grants) {
    const int p = g.group / max_vcs_;
    const int v = g.group % max_vcs_;
    const int o = g.resource / max_vcs_;
    const int w = g.resource % max_vcs_;
    auto& vc = inputs_[p].vcs[v];
    outputs_[o].vcs[w].allocated = true;
    vc.out_port = o;
    vc.out_vc = w;
    vc.vc_grant_cycle = now;
    vc.transition(VcState::Active);
    emit(TraceKind::VcGrant, now, vc.buffer.front(), p, v, o, w);
  }
  return grants;
}

void RouterState::route_compute(Cycle now, const RoutingTable& table, RandomStream& rng) {
  for (int p = 0; p < static_cast<int>(inputs_.size()); ++p) {
    for (int v = 0; v < static_cast<int>(inputs_[p].vcs.size()); ++v) {
      auto& vc = inputs_[p].vcs[v];
      for (int i = 0; i < vc.buffer.size(); ++i) {
        Flit& f = vc.buffer.at(i);
        if (!f.head || f.route_port >= 0 || f.arrival >= now) continue;
        if (const auto port = tsnfabric::route_compute(element_, f.dst, table, rng)) {
          f.route_port = *port;
          f.route_cycle = now;
          emit(TraceKind::Route, now, f, p, v, *port, -1);
        }
      }
      if (vc.state == VcState::Routing && vc.buffer.front().route_port >= 0) vc.transition(VcState::WaitingVC);
    }
  }
}

}  // namespace tsnfabric
