#include "tsnfabric/network.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace tsnfabric {

Network::Network(FabricTopology topo, NetworkConfig cfg, std::uint64_t seed)
    : topo_(std::move(topo)), cfg_(cfg), table_(topo_) {
  if (cfg_.link_latency < 1) throw std::invalid_argument("link latency must be >= 1");
  const int n_elem = static_cast<int>(topo_.elements().size());
  const int n_links = static_cast<int>(topo_.links().size());
  const int n_term = topo_.terminals();

  routers_.reserve(n_elem);
  for (int e = 0; e < n_elem; ++e) {
    routers_.emplace_back(topo_, e, cfg_.mode, cfg_.scheme);
    route_rng_.emplace_back(seed, StreamDomain::Routing, static_cast<std::uint64_t>(e));
  }

  channels_.resize(n_links + 2 * n_term);
  ends_.resize(channels_.size());
  for (int l = 0; l < n_links; ++l) {
    const Link& link = topo_.links()[l];
    ends_[l] = {link.src.element, link.src.port, link.dst.element, link.dst.port, -1};
    routers_[link.src.element].outputs()[link.src.port].channel = l;
    routers_[link.dst.element].inputs()[link.dst.port].channel = l;
  }
  sources_.resize(n_term);
  for (int t = 0; t < n_term; ++t) {
    const PortRef in = topo_.injection_port(t);
    const PortRef out = topo_.ejection_port(t);
    const int inj = n_links + t;
    const int ej = n_links + n_term + t;
    ends_[inj] = {-1, -1, in.element, in.port, t};
    ends_[ej] = {out.element, out.port, -1, -1, t};
    routers_[in.element].inputs()[in.port].channel = inj;
    routers_[out.element].outputs()[out.port].channel = ej;

    const BufferConfig bc = buffer_config(cfg_.scheme, topo_.element(in.element).stage);
    sources_[t].vcs.assign(bc.vcs, TerminalSource::InjectVc{bc.depth, bc.depth, -1, 0});
  }
}

int Network::allocate_slot() {
  if (!free_slots_.empty()) {
    const int s = free_slots_.back();
    free_slots_.pop_back();
    return s;
  }
  packets_.emplace_back();
  return static_cast<int>(packets_.size()) - 1;
}

std::uint64_t Network::create_packet(int src, int dst, Priority priority, int length, Cycle now, bool tagged) {
  if (src < 0 || src >= topo_.terminals() || dst < 0 || dst >= topo_.terminals()) {
    throw std::out_of_range("packet terminal out of range");
  }
  if (length < 1) throw std::invalid_argument("packet length must be >= 1");
  const int slot = allocate_slot();
  Packet& p = packets_[slot];
  p = Packet{};
  p.id = next_id_++;
  p.src = src;
  p.dst = dst;
  p.priority = priority;
  p.length = length;
  p.create_cycle = now;
  p.tagged = tagged;
  const int q = cfg_.mode == PriorityMode::None ? static_cast<int>(Priority::Low) : static_cast<int>(priority);
  sources_[src].queue[q].push_back(slot);
  ++created_;
  return p.id;
}

void Network::eject(const Flit& f, Cycle now) {
  Packet& p = packets_[f.packet];
  ++p.flits_ejected;
  if (tracing_) trace_.push_back({now, -1, TraceKind::Eject, p.id, p.dst, -1, -1, -1, p.priority});
  if (!f.tail) return;
  if (p.flits_ejected != p.length) throw std::logic_error("tail ejected before body flits");
  p.eject_cycle = now;
  ++ejected_;
  if (on_eject_) on_eject_(p);
  free_slots_.push_back(f.packet);
}

void Network::deliver(Cycle now) {
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    auto& ch = channels_[c];
    const auto& ends = ends_[c];
    while (!ch.flits.empty() && ch.flits.front().arrive <= now) {
      const auto in_flight = ch.flits.front();
      ch.flits.pop_front();
      if (ends.dst_element >= 0) {
        routers_[ends.dst_element].receive_flit(ends.dst_port, in_flight.vc, in_flight.flit, now);
      } else {
        eject(in_flight.flit, now);
      }
    }
    while (!ch.credits.empty() && ch.credits.front().arrive <= now) {
      const int vc = ch.credits.front().vc;
      ch.credits.pop_front();
      if (ends.src_element >= 0) {
        routers_[ends.src_element].receive_credit(ends.src_port, vc);
      } else {
        auto& iv = sources_[ends.terminal].vcs.at(vc);
        if (++iv.credits > iv.capacity) throw std::logic_error("injection credit overflow");
      }
    }
  }
}

void Network::inject(Cycle now) {
  const Cycle arrive = now + cfg_.link_latency;
  const int n_links = static_cast<int>(topo_.links().size());
  for (int t = 0; t < topo_.terminals(); ++t) {
    auto& src = sources_[t];
    const int n_vc = static_cast<int>(src.vcs.size());
    int vc = -1;

    if (cfg_.mode == PriorityMode::ByVC) {
      for (const Priority cls : {Priority::High, Priority::Low}) {
        const int v = pinned_vc(cls, n_vc);
        auto& iv = src.vcs[v];
        if (iv.credits <= 0) continue;
        if (iv.packet < 0) {
          auto& q = src.queue[static_cast<int>(cls)];
          if (q.empty()) continue;
          iv.packet = q.front();
          iv.next_seq = 0;
          q.pop_front();
        }
        vc = v;
        break;
      }
    } else {
      int active = -1;
      for (int v = 0; v < n_vc; ++v) {
        if (src.vcs[v].packet >= 0) active = v;
      }
      if (active >= 0) {
        if (src.vcs[active].credits > 0) vc = active;
      } else {
        auto* q = &src.queue[static_cast<int>(Priority::Low)];
        if (cfg_.mode == PriorityMode::ByPacket && !src.queue[static_cast<int>(Priority::High)].empty()) {
          q = &src.queue[static_cast<int>(Priority::High)];
        }
        if (!q->empty()) {
          for (int k = 0; k < n_vc; ++k) {
            const int v = (src.next_vc + k) % n_vc;
            if (src.vcs[v].credits > 0) {
              vc = v;
              break;
            }
          }
          if (vc >= 0) {
            src.vcs[vc].packet = q->front();
            src.vcs[vc].next_seq = 0;
            q->pop_front();
            src.next_vc = (vc + 1) % n_vc;
          }
        }
      }
    }
    if (vc < 0) continue;

    auto& iv = src.vcs[vc];
    Packet& p = packets_[iv.packet];
    Flit f;
    f.packet = iv.packet;
    f.packet_id = p.id;
    f.seq = iv.next_seq;
    f.head = f.seq == 0;
    f.tail = f.seq == p.length - 1;
    f.priority = p.priority;
    f.dst = p.dst;
    if (f.head) {
      p.inject_cycle = now;
      if (tracing_) trace_.push_back({now, -1, TraceKind::Inject, p.id, t, vc, -1, -1, p.priority});
    }
    --iv.credits;
    channels_[n_links + t].flits.push_back({arrive, vc, f});
    if (f.tail) {
      iv.packet = -1;
      iv.next_seq = 0;
    } else {
      ++iv.next_seq;
    }
  }
}

void Network::step(Cycle now) {
  deliver(now);
  const Cycle arrive = now + cfg_.link_latency;
  for (std::size_t e = 0; e < routers_.size(); ++e) {
    auto& r = routers_[e];
    for (const auto& d : r.switch_traverse(now)) {
      channels_[r.outputs()[d.out_port].channel].flits.push_back({arrive, d.out_vc, d.flit});
    }
    for (const auto& g : r.switch_allocate(now)) {
      channels_[r.inputs()[g.group].channel].credits.push_back({arrive, g.member});
    }
    r.vc_allocate(now);
    r.route_compute(now, table_, route_rng_[e]);
  }
  inject(now);
}

std::uint64_t Network::count_in_flight_structural() const {
  std::vector<char> seen(packets_.size(), 0);
  std::uint64_t count = 0;
  auto mark = [&](int slot) {
    if (slot >= 0 && !seen[slot]) {
      seen[slot] = 1;
      ++count;
    }
  };
  for (const auto& s : sources_) {
    for (const auto& q : s.queue) {
      for (int slot : q) mark(slot);
    }
    for (const auto& iv : s.vcs) mark(iv.packet);
  }
  for (const auto& r : routers_) {
    for (const auto& in : r.inputs()) {
      for (const auto& vc : in.vcs) {
        for (int i = 0; i < vc.buffer.size(); ++i) mark(vc.buffer.at(i).packet);
      }
    }
    for (const auto& d : r.pending_traversals()) mark(d.flit.packet);
  }
  for (const auto& ch : channels_) {
    for (const auto& f : ch.flits) mark(f.flit.packet);
  }
  return count;
}

std::string Network::check_credit_invariant() const {
  const int n_links = static_cast<int>(topo_.links().size());
  auto in_channel = [](const Channel& ch, int vc, int& flits, int& credits) {
    flits = credits = 0;
    for (const auto& f : ch.flits) flits += f.vc == vc;
    for (const auto& c : ch.credits) credits += c.vc == vc;
  };
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    const auto& ends = ends_[c];
    if (ends.dst_element < 0) continue;  // sinks are not credit-controlled
    const auto& down = routers_[ends.dst_element].inputs()[ends.dst_port];
    for (int w = 0; w < static_cast<int>(down.vcs.size()); ++w) {
      int held = 0;
      int pending = 0;
      if (ends.src_element >= 0) {
        const auto& up = routers_[ends.src_element];
        held = up.outputs()[ends.src_port].vcs[w].credits;
        for (const auto& d : up.pending_traversals()) pending += d.out_port == ends.src_port && d.out_vc == w;
      } else {
        held = sources_[ends.terminal].vcs[w].credits;
      }
      int flits = 0;
      int credits = 0;
      in_channel(channels_[c], w, flits, credits);
      const int total = held + pending + flits + down.vcs[w].occupancy() + credits;
      if (total != down.vcs[w].capacity()) {
        return fmt::format("channel {} ({}) vc {}: {} held + {} pending + {} flits + {} buffered + {} credits != {}", c,
                           static_cast<int>(c) < n_links ? "link" : "injection", w, held, pending, flits,
                           down.vcs[w].occupancy(), credits, down.vcs[w].capacity());
      }
    }
  }
  return {};
}

int Network::buffer_slots() const {
  int total = 0;
  for (const auto& r : routers_) total += r.buffer_slots();
  return total;
}

std::size_t Network::source_backlog() const {
  std::size_t total = 0;
  for (const auto& s : sources_) total += s.queued();
  return total;
}

void Network::enable_trace(bool on) {
  tracing_ = on;
  for (auto& r : routers_) r.set_trace(on ? &trace_ : nullptr);
}

std::vector<TraceEvent> Network::take_trace() {
  std::vector<TraceEvent> out;
  out.swap(trace_);
  return out;
}

void Network::enable_audit(bool on) {
  auditing_ = on;
  for (auto& r : routers_) r.set_audit(on ? &audit_ : nullptr);
}

std::vector<AllocationRecord> Network::take_audit() {
  std::vector<AllocationRecord> out;
  out.swap(audit_);
  return out;
}

}  // namespace tsnfabric
