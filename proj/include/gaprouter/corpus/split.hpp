#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gaprouter::corpus {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;

  bool operator==(const SplitIndices&) const = default;
};

/// Stratified train/validation partition. `strata` holds one key per example.
/// Each stratum contributes round(train_fraction * size) examples to train
/// (singletons always go to train); both outputs keep input order.
SplitIndices stratified_split(const std::vector<std::string>& strata, double train_fraction,
                              std::uint64_t seed);

}  // namespace gaprouter::corpus
