#include "tsnfabric/topology.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <set>

#include "tsnfabric/kvtext.hpp"

namespace tsnfabric {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_exact(int v) {
  int k = 0;
  while ((1 << k) < v) ++k;
  return k;
}

std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// "S.I.P" -> {stage, index, port}; "S.I" -> {stage, index, -1}
std::optional<std::array<int, 3>> parse_endpoint(std::string_view s, bool with_port) {
  auto parts = split_list(s, '.');
  if (parts.size() != (with_port ? 3u : 2u)) return std::nullopt;
  std::array<int, 3> out{-1, -1, -1};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto v = parse_int(parts[i]);
    if (!v || *v < 0) return std::nullopt;
    out[i] = *v;
  }
  return out;
}

}  // namespace

std::string_view to_string(FabricKind kind) {
  switch (kind) {
    case FabricKind::SingleStage: return "single";
    case FabricKind::Clos3: return "clos3";
    case FabricKind::Benes: return "benes";
  }
  return "?";
}

std::optional<FabricKind> parse_fabric_kind(std::string_view name) {
  name = trim(name);
  if (name == "single" || name == "single-stage") return FabricKind::SingleStage;
  if (name == "clos3" || name == "clos" || name == "multi-stage") return FabricKind::Clos3;
  if (name == "benes") return FabricKind::Benes;
  return std::nullopt;
}

class TopologyBuilder {
 public:
  TopologyBuilder(FabricKind kind, int terminals, int stages) {
    t_.kind_ = kind;
    t_.terminals_ = terminals;
    t_.stage_count_ = stages;
    t_.injection_.assign(terminals, {});
    t_.ejection_.assign(terminals, {});
  }

  int add_element(int stage, int index, int radix_in, int radix_out) {
    const int id = static_cast<int>(t_.elements_.size());
    t_.elements_.push_back({id, stage, index, radix_in, radix_out});
    t_.out_link_.emplace_back(radix_out, -1);
    t_.in_link_.emplace_back(radix_in, -1);
    t_.eject_terminal_.emplace_back(radix_out, -1);
    t_.inject_terminal_.emplace_back(radix_in, -1);
    return id;
  }

  void connect(PortRef src, PortRef dst) {
    auto& out = t_.out_link_.at(src.element).at(src.port);
    auto& in = t_.in_link_.at(dst.element).at(dst.port);
    if (out != -1 || in != -1) throw TopologyError("port already wired");
    if (t_.elements_[dst.element].stage != t_.elements_[src.element].stage + 1) {
      throw TopologyError("link must join consecutive stages");
    }
    const int id = static_cast<int>(t_.links_.size());
    t_.links_.push_back({src, dst, false});
    out = id;
    in = id;
  }

  void attach_terminal(int terminal, PortRef inject, PortRef eject) {
    t_.injection_.at(terminal) = inject;
    t_.ejection_.at(terminal) = eject;
    t_.inject_terminal_.at(inject.element).at(inject.port) = terminal;
    t_.eject_terminal_.at(eject.element).at(eject.port) = terminal;
  }

  void set_clos(ClosParams p) { t_.clos_ = p; }

  FabricTopology finish() && { return std::move(t_); }

 private:
  FabricTopology t_;
};

int FabricTopology::element_at(int stage, int index) const {
  for (const auto& e : elements_) {
    if (e.stage == stage && e.index == index) return e.id;
  }
  return -1;
}

int FabricTopology::analytic_element_count() const {
  switch (kind_) {
    case FabricKind::SingleStage: return terminals_ / 2;
    case FabricKind::Benes:
    case FabricKind::Clos3: return static_cast<int>(elements_.size());
  }
  return 0;
}

std::string FabricTopology::link_selector(int link) const {
  const Link& l = links_.at(link);
  const auto& s = elements_[l.src.element];
  const auto& d = elements_[l.dst.element];
  return std::to_string(s.stage) + "." + std::to_string(s.index) + "." + std::to_string(l.src.port) +
         "->" + std::to_string(d.stage) + "." + std::to_string(d.index) + "." +
         std::to_string(l.dst.port);
}

std::optional<int> FabricTopology::find_link(std::string_view selector) const {
  const auto arrow = selector.find("->");
  if (arrow == std::string_view::npos) return std::nullopt;
  const auto a = parse_endpoint(selector.substr(0, arrow), true);
  const auto b = parse_endpoint(selector.substr(arrow + 2), true);
  if (!a || !b) return std::nullopt;
  const int src = element_at((*a)[0], (*a)[1]);
  const int dst = element_at((*b)[0], (*b)[1]);
  if (src < 0 || dst < 0) return std::nullopt;
  if ((*a)[2] >= elements_[src].radix_out || (*b)[2] >= elements_[dst].radix_in) return std::nullopt;
  const int link = out_link_[src][(*a)[2]];
  if (link < 0) return std::nullopt;
  if (links_[link].dst != PortRef{dst, (*b)[2]}) return std::nullopt;
  return link;
}

std::vector<int> FabricTopology::faulty_links() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(links_.size()); ++i) {
    if (links_[i].faulty) out.push_back(i);
  }
  return out;
}

int FabricTopology::fault_count() const {
  return static_cast<int>(std::count_if(links_.begin(), links_.end(), [](const Link& l) { return l.faulty; }));
}

FabricTopology build_single_stage(int ports) {
  if (ports < 2 || ports % 2 != 0) {
    throw TopologyError("single-stage fabric needs an even port count >= 2, got " + std::to_string(ports));
  }
  TopologyBuilder b(FabricKind::SingleStage, ports, 1);
  const int node = b.add_element(0, 0, ports, ports);
  for (int t = 0; t < ports; ++t) b.attach_terminal(t, {node, t}, {node, t});
  return std::move(b).finish();
}

FabricTopology build_clos3(int n, int m, int r) {
  if (n < 1 || m < 1 || r < 1) {
    throw TopologyError("clos3 parameters must be >= 1");
  }
  TopologyBuilder b(FabricKind::Clos3, n * r, 3);
  b.set_clos({n, m, r});
  std::vector<int> ingress(r), middle(m), egress(r);
  for (int i = 0; i < r; ++i) ingress[i] = b.add_element(0, i, n, m);
  for (int j = 0; j < m; ++j) middle[j] = b.add_element(1, j, r, r);
  for (int k = 0; k < r; ++k) egress[k] = b.add_element(2, k, m, n);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < m; ++j) b.connect({ingress[i], j}, {middle[j], i});
  }
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < r; ++k) b.connect({middle[j], k}, {egress[k], j});
  }
  for (int t = 0; t < n * r; ++t) {
    b.attach_terminal(t, {ingress[t / n], t % n}, {egress[t / n], t % n});
  }
  return std::move(b).finish();
}

FabricTopology build_benes(int ports) {
  if (ports < 4 || !is_power_of_two(ports)) {
    throw TopologyError("benes fabric needs a power-of-two port count >= 4, got " + std::to_string(ports));
  }
  const int k = log2_exact(ports);
  const int stages = 2 * k - 1;
  const int per_stage = ports / 2;
  TopologyBuilder b(FabricKind::Benes, ports, stages);
  for (int s = 0; s < stages; ++s) {
    for (int i = 0; i < per_stage; ++i) b.add_element(s, i, 2, 2);
  }
  auto id = [&](int stage, int line) { return stage * per_stage + line / 2; };

  // Baseline half: line 2i+b of a size-M block feeds input i of sub-block b.
  // Reverse-baseline half mirrors it. The centre stage is shared.
  for (int s = 0; s + 1 < stages; ++s) {
    const int depth = s < k - 1 ? s : stages - 2 - s;
    const int block = ports >> depth;
    const int half = block / 2;
    for (int base = 0; base < ports; base += block) {
      for (int x = 0; x < block; ++x) {
        int in_line = 0;
        if (s < k - 1) {
          in_line = (x % 2) * half + x / 2;
        } else {
          in_line = 2 * (x % half) + x / half;
        }
        const int out = base + x;
        const int in = base + in_line;
        b.connect({id(s, out), out % 2}, {id(s + 1, in), in % 2});
      }
    }
  }
  for (int t = 0; t < ports; ++t) {
    b.attach_terminal(t, {id(0, t), t % 2}, {id(stages - 1, t), t % 2});
  }
  return std::move(b).finish();
}

struct FaultEditor {
  static std::vector<int> resolve(const FabricTopology& topo, std::span<const std::string> selectors) {
    std::set<std::string> seen;
    std::vector<int> out;
    for (const auto& raw : selectors) {
      const std::string sel(trim(raw));
      if (!seen.insert(sel).second) throw TopologyError("duplicate fault selector '" + sel + "'");
      if (sel.find("->") != std::string::npos) {
        const auto link = topo.find_link(sel);
        if (!link) throw TopologyError("unknown link selector '" + sel + "'");
        out.push_back(*link);
        continue;
      }
      const auto ep = parse_endpoint(sel, false);
      const int elem = ep ? topo.element_at((*ep)[0], (*ep)[1]) : -1;
      if (elem < 0) throw TopologyError("unknown fault selector '" + sel + "'");
      bool any = false;
      for (int p = 0; p < topo.elements_[elem].radix_in; ++p) {
        if (const int l = topo.in_link_[elem][p]; l >= 0) out.push_back(l), any = true;
      }
      for (int p = 0; p < topo.elements_[elem].radix_out; ++p) {
        if (const int l = topo.out_link_[elem][p]; l >= 0) out.push_back(l), any = true;
      }
      if (!any) throw TopologyError("element '" + sel + "' has no inter-stage links");
    }
    return out;
  }

  static void set(FabricTopology& topo, const std::vector<int>& links, bool faulty) {
    for (int l : links) topo.links_[l].faulty = faulty;
  }
};

FaultResult apply_faults(const FabricTopology& topo, std::span<const std::string> selectors) {
  FabricTopology out = topo;
  FaultEditor::set(out, FaultEditor::resolve(topo, selectors), true);
  const int disconnected = count_disconnected_pairs(out);
  return {std::move(out), disconnected};
}

FabricTopology remove_faults(const FabricTopology& topo, std::span<const std::string> selectors) {
  FabricTopology out = topo;
  FaultEditor::set(out, FaultEditor::resolve(topo, selectors), false);
  return out;
}

int count_disconnected_pairs(const FabricTopology& topo) {
  // Reachable terminal sets per element, computed from the last stage back.
  const int n_elem = static_cast<int>(topo.elements().size());
  std::vector<std::vector<bool>> reach(n_elem, std::vector<bool>(topo.terminals(), false));
  std::vector<int> order(n_elem);
  for (int i = 0; i < n_elem; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return topo.element(a).stage > topo.element(b).stage; });
  for (int e : order) {
    for (int p = 0; p < topo.element(e).radix_out; ++p) {
      if (const int t = topo.ejection_terminal(e, p); t >= 0) reach[e][t] = true;
      const int l = topo.out_link(e, p);
      if (l < 0 || topo.links()[l].faulty) continue;
      const auto& next = reach[topo.links()[l].dst.element];
      for (int t = 0; t < topo.terminals(); ++t) {
        if (next[t]) reach[e][t] = true;
      }
    }
  }
  int disconnected = 0;
  for (int s = 0; s < topo.terminals(); ++s) {
    const auto& r = reach[topo.injection_port(s).element];
    disconnected += static_cast<int>(std::count(r.begin(), r.end(), false));
  }
  return disconnected;
}

PathGroups enumerate_paths(const FabricTopology& topo, int src, int dst, PathFilter filter) {
  if (src < 0 || src >= topo.terminals() || dst < 0 || dst >= topo.terminals()) {
    throw TopologyError("terminal out of range");
  }
  std::vector<Path> found;
  Path current;
  std::vector<bool> on_path(topo.elements().size(), false);

  auto dfs = [&](auto&& self, int elem) -> void {
    current.elements.push_back(elem);
    on_path[elem] = true;
    for (int p = 0; p < topo.element(elem).radix_out; ++p) {
      if (topo.ejection_terminal(elem, p) == dst) found.push_back(current);
      const int l = topo.out_link(elem, p);
      if (l < 0) continue;
      const Link& link = topo.links()[l];
      if (filter == PathFilter::FaultFree && link.faulty) continue;
      if (on_path[link.dst.element]) continue;
      current.links.push_back(l);
      self(self, link.dst.element);
      current.links.pop_back();
    }
    on_path[elem] = false;
    current.elements.pop_back();
  };
  dfs(dfs, topo.injection_port(src).element);

  PathGroups groups;
  groups.src = src;
  groups.dst = dst;
  if (found.empty()) return groups;
  const int shortest = std::min_element(found.begin(), found.end(), [](const Path& a, const Path& b) {
                         return a.length() < b.length();
                       })->length();
  for (auto& p : found) {
    (p.length() == shortest ? groups.main_paths : groups.aux_paths).push_back(std::move(p));
  }
  for (const auto& p : groups.aux_paths) {
    if (p.length() != groups.aux_paths.front().length()) {
      throw TopologyError("auxiliary paths of unequal length between terminals " + std::to_string(src) +
                          " and " + std::to_string(dst));
    }
  }
  return groups;
}

std::string to_text(const FabricTopology& topo) {
  KeyValueDocument doc;
  doc.add("kind", std::string(to_string(topo.kind())));
  if (topo.kind() == FabricKind::Clos3) {
    doc.add("n", std::to_string(topo.clos_params()->n));
    doc.add("m", std::to_string(topo.clos_params()->m));
    doc.add("r", std::to_string(topo.clos_params()->r));
  } else {
    doc.add("ports", std::to_string(topo.terminals()));
  }
  for (int l : topo.faulty_links()) doc.add("fault", topo.link_selector(l));
  return doc.to_text();
}

FabricTopology topology_from_text(std::string_view text) {
  const auto doc = KeyValueDocument::parse(text);
  auto required_int = [&](std::string_view key) {
    const auto v = doc.first(key);
    if (!v) throw TopologyError("topology document missing '" + std::string(key) + "'");
    const auto i = parse_int(*v);
    if (!i) throw TopologyError("'" + std::string(key) + "' is not an integer");
    return *i;
  };
  const auto kind_name = doc.first("kind");
  if (!kind_name) throw TopologyError("topology document missing 'kind'");
  const auto kind = parse_fabric_kind(*kind_name);
  if (!kind) throw TopologyError("unknown fabric kind '" + *kind_name + "'");

  FabricTopology topo;
  switch (*kind) {
    case FabricKind::SingleStage: topo = build_single_stage(required_int("ports")); break;
    case FabricKind::Benes: topo = build_benes(required_int("ports")); break;
    case FabricKind::Clos3: topo = build_clos3(required_int("n"), required_int("m"), required_int("r")); break;
  }
  const auto faults = doc.all("fault");
  if (faults.empty()) return topo;
  return apply_faults(topo, faults).topology;
}

}  // namespace tsnfabric
