#include "gaprouter/upstream/model_descriptor.hpp"

#include <algorithm>

#include "gaprouter/common/error.hpp"

namespace gaprouter::upstream {

ModelDescriptor descriptor_from_json(const nlohmann::json& j) {
  ModelDescriptor m;
  m.id = j.at("id").get<std::string>();
  m.route = j.value("route", m.id);
  m.display_name = j.value("display_name", m.id);
  m.base_url = j.value("base_url", "");
  if (j.contains("roles")) {
    m.expert = false;
    m.judge = false;
    for (const auto& role : j.at("roles")) {
      const auto r = role.get<std::string>();
      if (r == "expert") {
        m.expert = true;
      } else if (r == "judge") {
        m.judge = true;
      } else {
        throw ConfigError("model '" + m.id + "' has unknown role '" + r + "'");
      }
    }
  }
  if (m.id.empty()) throw ConfigError("model descriptor with empty id");
  return m;
}

nlohmann::json to_json(const ModelDescriptor& m) {
  nlohmann::json roles = nlohmann::json::array();
  if (m.expert) roles.push_back("expert");
  if (m.judge) roles.push_back("judge");
  nlohmann::json j = {{"id", m.id}, {"route", m.route}, {"roles", roles},
                      {"display_name", m.display_name}};
  if (!m.base_url.empty()) j["base_url"] = m.base_url;
  return j;
}

std::vector<ModelDescriptor> models_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw ConfigError("'models' must be an array");
  std::vector<ModelDescriptor> models;
  for (const auto& item : array) {
    auto m = descriptor_from_json(item);
    for (const auto& existing : models) {
      if (existing.id == m.id) throw ConfigError("duplicate model id '" + m.id + "'");
    }
    models.push_back(std::move(m));
  }
  return models;
}

Roster expert_roster(const std::vector<ModelDescriptor>& models) {
  std::vector<std::string> ids;
  for (const auto& m : models) {
    if (m.expert) ids.push_back(m.id);
  }
  return Roster(std::move(ids));
}

const ModelDescriptor& find_model(const std::vector<ModelDescriptor>& models, const std::string& id) {
  const auto it = std::find_if(models.begin(), models.end(), [&](const auto& m) { return m.id == id; });
  if (it == models.end()) throw ConfigError("unknown model id '" + id + "'");
  return *it;
}

}  // namespace gaprouter::upstream
