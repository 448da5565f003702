#include "tsnfabric/allocator.hpp"

#include <stdexcept>

#include "tsnfabric/kvtext.hpp"

namespace tsnfabric {

std::string_view to_string(Priority p) { return p == Priority::High ? "high" : "low"; }

std::string_view to_string(PriorityMode m) {
  switch (m) {
    case PriorityMode::None: return "none";
    case PriorityMode::ByPacket: return "bypacket";
    case PriorityMode::ByVC: return "byvc";
  }
  return "?";
}

std::optional<PriorityMode> parse_priority_mode(std::string_view name) {
  name = trim(name);
  if (name == "none") return PriorityMode::None;
  if (name == "bypacket") return PriorityMode::ByPacket;
  if (name == "byvc") return PriorityMode::ByVC;
  return std::nullopt;
}

SeparableAllocator::SeparableAllocator(int groups, int members, int resources)
    : members_(members),
      group_ptr_(groups, 0),
      resource_ptr_(resources, 0),
      group_done_(groups, 0),
      resource_done_(resources, 0),
      proposal_(groups, -1),
      best_request_(resources, -1) {
  if (groups < 0 || members < 1 || resources < 0) throw std::invalid_argument("bad allocator shape");
}

std::vector<AllocGrant> SeparableAllocator::allocate(std::span<const AllocRequest> requests,
                                                     bool strict_priority) {
  std::fill(group_done_.begin(), group_done_.end(), 0);
  std::fill(resource_done_.begin(), resource_done_.end(), 0);
  std::vector<AllocGrant> grants;
  if (requests.empty()) return grants;
  if (strict_priority) {
    run_phase(requests, Priority::High, grants);
    // A resource still wanted by an unmatched High group stays closed to Low.
    for (const auto& req : requests) {
      if (req.cls == Priority::High && !group_done_[req.group]) resource_done_[req.resource] = 1;
    }
    run_phase(requests, Priority::Low, grants);
  } else {
    run_phase(requests, std::nullopt, grants);
  }
  return grants;
}

void SeparableAllocator::run_phase(std::span<const AllocRequest> requests, std::optional<Priority> cls,
                                   std::vector<AllocGrant>& grants) {
  const int n_groups = groups();
  const int n_resources = resources();
  std::fill(proposal_.begin(), proposal_.end(), -1);
  std::fill(best_request_.begin(), best_request_.end(), -1);

  // Input stage: each free group proposes its round-robin-first member's
  // most preferred free resource.
  std::vector<int> best_distance(n_groups, members_);
  for (int i = 0; i < static_cast<int>(requests.size()); ++i) {
    const auto& req = requests[i];
    if (cls && req.cls != *cls) continue;
    if (group_done_[req.group] || resource_done_[req.resource]) continue;
    const int dist = (req.member - group_ptr_[req.group] + members_) % members_;
    if (dist < best_distance[req.group]) {
      best_distance[req.group] = dist;
      proposal_[req.group] = i;
    }
  }

  // Output stage: each resource grants the round-robin-first proposing group.
  for (int g = 0; g < n_groups; ++g) {
    const int i = proposal_[g];
    if (i < 0) continue;
    const int res = requests[i].resource;
    const int cur = best_request_[res];
    if (cur < 0) {
      best_request_[res] = i;
      continue;
    }
    const int d_new = (g - resource_ptr_[res] + n_groups) % n_groups;
    const int d_cur = (requests[cur].group - resource_ptr_[res] + n_groups) % n_groups;
    if (d_new < d_cur) best_request_[res] = i;
  }

  for (int res = 0; res < n_resources; ++res) {
    const int i = best_request_[res];
    if (i < 0) continue;
    const auto& req = requests[i];
    grants.push_back({req.group, req.member, req.resource, req.cls});
    group_done_[req.group] = 1;
    resource_done_[res] = 1;
    group_ptr_[req.group] = (req.member + 1) % members_;
    resource_ptr_[res] = (req.group + 1) % n_groups;
  }
}

}  // namespace tsnfabric
