#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gaprouter/learners/models.hpp"

namespace gaprouter::learners {

inline constexpr int kBundleFormatVersion = 1;

enum class RoutingMode { global, per_category };

std::string to_string(RoutingMode mode);
RoutingMode routing_mode_from_string(const std::string& name);

/// Everything the router needs, trained together and serialized as one
/// directory: manifest.json plus one little-endian f64 payload per model.
struct ModelBundle {
  RoutingMode mode = RoutingMode::global;
  Roster roster;
  std::size_t embedding_dim = 0;
  TrainingConfig config;

  /// Set in global mode.
  std::shared_ptr<const RegressorModel> regressor;
  std::shared_ptr<const PairClassifierModel> pair_classifier;
  /// Required in per-category mode, together with one regressor per label;
  /// optional (diagnostic only) in global mode.
  std::shared_ptr<const CategoryClassifierModel> category_classifier;
  std::map<std::string, std::shared_ptr<const RegressorModel>> category_regressors;

  /// Throws BundleError if the parts do not fit together (missing models,
  /// roster or dim disagreement, a category label without a regressor).
  void validate() const;
};

/// Writes the bundle deterministically: identical bundles produce
/// byte-identical directories.
void save_bundle(const ModelBundle& bundle, const std::string& dir);

/// Loads and verifies a bundle. Fails with BundleError on a missing or
/// corrupt file, a content-hash mismatch, a format-version mismatch, or when
/// `expected_roster_hash` is given and differs.
ModelBundle load_bundle(const std::string& dir,
                        const std::optional<std::string>& expected_roster_hash = std::nullopt);

/// SHA-256 of manifest.json; identifies a bundle in health checks.
std::string bundle_hash(const std::string& dir);

}  // namespace gaprouter::learners
