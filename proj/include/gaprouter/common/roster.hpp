#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gaprouter {

/// Ordered list of expert ids. Position in the roster is the expert index
/// used by every score vector, one-hot block and tie-break downstream.
class Roster {
 public:
  Roster() = default;
  explicit Roster(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(std::string_view id) const;
  /// Throws Error for unknown ids.
  std::size_t index_of(std::string_view id) const;

  /// SHA-256 over the ordered ids; equal iff same ids in the same order.
  std::string hash() const;

  bool operator==(const Roster&) const = default;

 private:
  std::vector<std::string> ids_;
};

}  // namespace gaprouter
