#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "gaprouter/common/roster.hpp"

namespace gaprouter::upstream {

struct ModelDescriptor {
  std::string id;
  /// Provider model path sent as the "model" field, e.g. "openai/gpt-4o".
  std::string route;
  bool expert = true;
  bool judge = false;
  std::string display_name;
  /// Optional per-model endpoint; empty means the shared base_url.
  std::string base_url;
};

ModelDescriptor descriptor_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelDescriptor& m);

/// Parses a "models" array; ids must be unique.
std::vector<ModelDescriptor> models_from_json(const nlohmann::json& array);

/// Experts in configuration order.
Roster expert_roster(const std::vector<ModelDescriptor>& models);

const ModelDescriptor& find_model(const std::vector<ModelDescriptor>& models, const std::string& id);

}  // namespace gaprouter::upstream
