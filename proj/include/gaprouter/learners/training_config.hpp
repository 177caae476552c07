#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace gaprouter::learners {

enum class ModelKind { ridge, random_forest, mlp };

std::string to_string(ModelKind kind);
ModelKind kind_from_string(const std::string& name);

struct RidgeConfig {
  double lambda = 1.0;
};

struct ForestConfig {
  std::size_t n_trees = 100;
  /// 0 means unlimited depth.
  std::size_t max_depth = 16;
  std::size_t min_leaf = 2;
  /// Features tried per split; 0 means floor(sqrt(d)).
  std::size_t feature_subsample = 0;
  bool bootstrap = true;
  std::uint64_t seed = 7;
};

struct MlpConfig {
  std::vector<std::size_t> hidden_sizes{128};
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 11;
};

struct TrainingConfig {
  RidgeConfig ridge;
  ForestConfig rf;
  MlpConfig mlp;
  ModelKind regressor = ModelKind::random_forest;
  ModelKind pair_classifier = ModelKind::mlp;
  ModelKind category_classifier = ModelKind::random_forest;

  /// Throws ConfigError on non-positive or inconsistent values.
  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& config);
/// Missing keys keep their defaults.
TrainingConfig training_config_from_json(const nlohmann::json& j);

}  // namespace gaprouter::learners
