#include "gaprouter/common/roster.hpp"

#include <algorithm>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"

namespace gaprouter {

Roster::Roster(std::vector<std::string> ids) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) throw ConfigError("roster contains an empty expert id");
    for (std::size_t j = 0; j < i; ++j) {
      if (ids_[i] == ids_[j]) throw ConfigError("duplicate expert id '" + ids_[i] + "' in roster");
    }
  }
}

bool Roster::contains(std::string_view id) const {
  return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

std::size_t Roster::index_of(std::string_view id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw Error("expert '" + std::string(id) + "' is not in the roster");
  return static_cast<std::size_t>(it - ids_.begin());
}

std::string Roster::hash() const {
  std::string joined;
  for (const auto& id : ids_) {
    joined += id;
    joined.push_back('\n');
  }
  return sha256_hex(joined);
}

}  // namespace gaprouter
