#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gaprouter/corpus/minhash.hpp"
#include "gaprouter/corpus/prompt_record.hpp"
#include "gaprouter/jury/judging.hpp"
#include "gaprouter/learners/training_config.hpp"
#include "gaprouter/router/router.hpp"
#include "gaprouter/upstream/collector.hpp"
#include "gaprouter/upstream/embedder.hpp"

namespace gaprouter::pipeline {

struct SplitSettings {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
};

struct EvalSettings {
  std::string tau_grid = "0.01:0.20:0.01";
  /// Empty means every expert.
  std::vector<std::string> references;
  std::size_t histogram_bins = 40;
  double cost_regressor = 1.0;
  double cost_classifier = 1.0;
};

struct GatewaySettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  bool metrics = true;
  /// Allows POST /admin/reload.
  bool admin = true;
};

/// The whole configuration file. Each subcommand reads the blocks it needs.
struct AppConfig {
  upstream::UpstreamSettings upstream;
  upstream::EmbeddingSettings embedding;
  std::vector<upstream::ModelDescriptor> models;
  std::vector<std::string> categories;
  corpus::DedupParams dedup;
  /// Seeded reshuffle before dedup so input order carries no signal.
  bool shuffle = true;
  std::uint64_t shuffle_seed = 1234;
  SplitSettings split;
  upstream::CollectOptions collect;
  jury::JudgeSettings judge;
  learners::TrainingConfig training;
  router::RouterPolicy policy;
  std::string bundle_path = "bundle";
  GatewaySettings gateway;
  EvalSettings eval;

  corpus::CategorySet category_set() const;
  Roster roster() const;
  /// Models flagged as judges, or every expert when none is flagged.
  std::vector<upstream::ModelDescriptor> judges() const;
  std::vector<upstream::ModelDescriptor> experts() const;
};

nlohmann::json to_json(const AppConfig& config);
/// Missing keys keep their defaults; unknown keys are ignored. Throws
/// ConfigError on bad values.
AppConfig app_config_from_json(const nlohmann::json& j);

/// "policy.tau" -> "GAPROUTER_POLICY_TAU".
std::string env_var_for(std::string_view dotted_key);

/// Sets `dotted_key` in `target`, creating objects on the way. The value is
/// parsed as JSON when it can be (numbers, booleans, arrays) and taken as a
/// string otherwise.
void set_dotted(nlohmann::json& target, std::string_view dotted_key, const std::string& value);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// file < env < flags. Every scalar key of the default config can be set
/// through its GAPROUTER_* variable; flags are "key=value" pairs.
AppConfig load_app_config(const std::optional<std::string>& path,
                          const std::vector<std::string>& flag_overrides,
                          const EnvLookup& env = process_env());

}  // namespace gaprouter::pipeline
