#include "gaprouter/common/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <string>

namespace gaprouter::log {
namespace {

std::atomic<Level> g_min_level{Level::info};
std::mutex g_write_mutex;

const char* level_name(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
  }
  return "info";
}

}  // namespace

void set_min_level(Level level) { g_min_level = level; }

void write(Level level, std::string_view msg, const nlohmann::json& fields) {
  if (level < g_min_level.load()) return;
  nlohmann::json line = fields.is_object() ? fields : nlohmann::json::object();
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  line["ts_ms"] = now;
  line["level"] = level_name(level);
  line["msg"] = std::string(msg);
  const std::string text = line.dump() + "\n";
  std::lock_guard lock(g_write_mutex);
  std::fputs(text.c_str(), stderr);
}

}  // namespace gaprouter::log
