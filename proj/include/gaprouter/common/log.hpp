#pragma once

#include <nlohmann/json.hpp>
#include <string_view>

namespace gaprouter::log {

enum class Level { debug, info, warn, error };

void set_min_level(Level level);

/// Emits one JSON object per line on stderr: {"ts","level","msg",...fields}.
void write(Level level, std::string_view msg, const nlohmann::json& fields = nlohmann::json::object());

inline void info(std::string_view msg, const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::info, msg, fields);
}
inline void warn(std::string_view msg, const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::warn, msg, fields);
}
inline void error(std::string_view msg, const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::error, msg, fields);
}

}  // namespace gaprouter::log
