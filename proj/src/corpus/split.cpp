#include "gaprouter/corpus/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string_view>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/log.hpp"
#include "gaprouter/common/random.hpp"

namespace gaprouter::corpus {

SplitIndices stratified_split(const std::vector<std::string>& strata, double train_fraction,
                              std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("train_fraction must be in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  std::vector<char> in_train(strata.size(), 0);
  for (auto& [key, members] : groups) {
    if (members.size() == 1) {
      log::info("singleton stratum assigned to train", {{"stratum", key}});
      in_train[members.front()] = 1;
      continue;
    }
    const std::string_view parts[] = {key};
    Rng rng(mix_seed(seed, parts));
    rng.shuffle(members);
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(members.size()) + 0.5));
    for (std::size_t k = 0; k < n_train && k < members.size(); ++k) in_train[members[k]] = 1;
  }

  SplitIndices out;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    (in_train[i] ? out.train : out.validation).push_back(i);
  }
  return out;
}

}  // namespace gaprouter::corpus
