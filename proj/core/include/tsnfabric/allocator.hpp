#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <optional>
#include <vector>

namespace tsnfabric {

enum class Priority : std::uint8_t { High = 0, Low = 1 };

enum class PriorityMode { None, ByPacket, ByVC };

std::string_view to_string(Priority p);
std::string_view to_string(PriorityMode m);
std::optional<PriorityMode> parse_priority_mode(std::string_view name);

/// One request of an input-side requester for one resource.
///
/// `group` carries the input constraint (at most one grant per group per
/// call); `member` is the requester inside the group. A requester with
/// several acceptable resources submits one request per resource, in its
/// order of preference.
struct AllocRequest {
  int group = 0;
  int member = 0;
  int resource = 0;
  Priority cls = Priority::Low;
};

struct AllocGrant {
  int group = 0;
  int member = 0;
  int resource = 0;
  Priority cls = Priority::Low;
  bool operator==(const AllocGrant&) const = default;
};

/// Separable input-first allocator with round-robin arbiters on both sides.
///
/// With strict priority the High requests are matched first over all
/// groups and resources, then the Low requests over whatever is left. A
/// resource requested by a High group that went unmatched is not offered to
/// Low requests in the same call.
/// Pointers advance only on a grant: a group's pointer moves one past the
/// granted member, a resource's pointer one past the granted group.
class SeparableAllocator {
 public:
  SeparableAllocator() = default;
  SeparableAllocator(int groups, int members, int resources);

  std::vector<AllocGrant> allocate(std::span<const AllocRequest> requests, bool strict_priority);

  int groups() const { return static_cast<int>(group_ptr_.size()); }
  int resources() const { return static_cast<int>(resource_ptr_.size()); }

  int group_pointer(int group) const { return group_ptr_.at(group); }
  int resource_pointer(int resource) const { return resource_ptr_.at(resource); }
  void set_group_pointer(int group, int member) { group_ptr_.at(group) = member; }
  void set_resource_pointer(int resource, int group) { resource_ptr_.at(resource) = group; }

 private:
  void run_phase(std::span<const AllocRequest> requests, std::optional<Priority> cls,
                 std::vector<AllocGrant>& grants);

  int members_ = 1;
  std::vector<int> group_ptr_;
  std::vector<int> resource_ptr_;
  // scratch, sized once
  std::vector<char> group_done_;
  std::vector<char> resource_done_;
  std::vector<int> proposal_;      // per group: index into requests, or -1
  std::vector<int> best_request_;  // per resource: winning proposal
};

}  // namespace tsnfabric
