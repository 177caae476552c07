#include "gaprouter/upstream/client.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <thread>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/log.hpp"

namespace gaprouter::upstream {
namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::optional<double> parse_retry_after(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return std::nullopt;
  const auto value = res->get_header_value("Retry-After");
  char* end = nullptr;
  const double seconds = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || !std::isfinite(seconds) || seconds < 0) return std::nullopt;
  return seconds;
}

}  // namespace

std::chrono::milliseconds RetryPolicy::delay(int attempt, std::optional<double> retry_after_s,
                                             std::uint64_t jitter_seed) const {
  if (retry_after_s) {
    const auto ms = std::chrono::milliseconds(static_cast<std::int64_t>(*retry_after_s * 1000.0));
    return std::min(ms, max_delay);
  }
  double ms = static_cast<double>(base_delay.count()) * std::ldexp(1.0, std::min(attempt, 30));
  ms = std::min(ms, static_cast<double>(max_delay.count()));
  if (jitter) {
    const double u = static_cast<double>(splitmix64(jitter_seed) >> 11) * 0x1.0p-53;
    ms *= 0.75 + 0.5 * u;
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

nlohmann::json to_json(const ResponseRecord& r) {
  return {{"prompt_id", r.prompt_id},     {"model_id", r.model_id},
          {"text", r.text},               {"latency_ms", r.latency_ms},
          {"created_at", r.created_at},   {"temperature", r.temperature},
          {"attempt_count", r.attempt_count}};
}

ResponseRecord response_from_json(const nlohmann::json& j) {
  ResponseRecord r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  r.created_at = j.value("created_at", "");
  r.temperature = j.value("temperature", kDefaultTemperature);
  r.attempt_count = j.value("attempt_count", 1);
  return r;
}

std::pair<std::string, std::string> split_base_url(std::string_view base_url) {
  const auto scheme_end = base_url.find("://");
  const auto host_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  const auto path_start = base_url.find('/', host_start);
  if (path_start == std::string_view::npos) return {std::string(base_url), ""};
  std::string path(base_url.substr(path_start));
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {std::string(base_url.substr(0, path_start)), path};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

UpstreamClient::UpstreamClient(UpstreamSettings settings) : settings_(std::move(settings)) {
  if (!settings_.api_key_env.empty()) {
    const char* key = std::getenv(settings_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("API key environment variable '" + settings_.api_key_env + "' is not set");
    }
    api_key_ = key;
  }
  if (settings_.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
}

std::string_view UpstreamClient::base_url_for(const ModelDescriptor& model) const {
  return model.base_url.empty() ? std::string_view(settings_.base_url) : std::string_view(model.base_url);
}

HttpReply UpstreamClient::post_json(std::string_view base_url, std::string_view path,
                                    const nlohmann::json& body) const {
  if (base_url.empty()) throw ConfigError("upstream base_url is not configured");
  const auto [host, prefix] = split_base_url(base_url);
  const std::string full_path = prefix + std::string(path);
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(settings_.timeout).count();
  const auto jitter_base = fnv1a64(payload);
  HttpReply reply;
  std::string last_error;
  for (int attempt = 0; attempt < settings_.retry.max_attempts; ++attempt) {
    httplib::Client cli(host);
    cli.set_connection_timeout(std::max<long>(1, timeout_s), 0);
    cli.set_read_timeout(std::max<long>(1, timeout_s), 0);
    cli.set_write_timeout(std::max<long>(1, timeout_s), 0);
    auto res = cli.Post(full_path, headers, payload, "application/json");
    reply.attempts = attempt + 1;
    if (res && !retryable_status(res->status)) {
      reply.status = res->status;
      reply.body = res->body;
      for (const auto& [k, v] : res->headers) reply.headers.emplace(k, v);
      return reply;
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt + 1 < settings_.retry.max_attempts) {
      const auto wait = settings_.retry.delay(attempt, parse_retry_after(res), jitter_base + attempt);
      log::warn("upstream retry", {{"path", full_path}, {"attempt", attempt + 1},
                                   {"error", last_error}, {"delay_ms", wait.count()}});
      std::this_thread::sleep_for(wait);
    }
  }
  throw CollectionError("upstream " + full_path + " failed after " +
                        std::to_string(settings_.retry.max_attempts) + " attempts: " + last_error);
}

ResponseRecord UpstreamClient::complete(const ModelDescriptor& model, std::string_view prompt,
                                        std::optional<double> temperature) const {
  ResponseRecord record;
  record.model_id = model.id;
  record.temperature = temperature.value_or(kDefaultTemperature);

  nlohmann::json messages = nlohmann::json::array();
  if (!settings_.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", settings_.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", std::string(prompt)}});
  nlohmann::json body = {{"model", model.route.empty() ? model.id : model.route},
                         {"messages", messages},
                         {"temperature", record.temperature}};
  if (settings_.max_tokens) body["max_tokens"] = *settings_.max_tokens;

  const auto start = std::chrono::steady_clock::now();
  const auto reply = post_json(base_url_for(model), "/chat/completions", body);
  record.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  record.attempt_count = reply.attempts;
  record.created_at = utc_timestamp();
  if (reply.status < 200 || reply.status >= 300) {
    throw CollectionError("model '" + model.id + "' returned HTTP " + std::to_string(reply.status));
  }
  const auto doc = nlohmann::json::parse(reply.body, nullptr, false);
  if (doc.is_discarded()) throw CollectionError("model '" + model.id + "' returned invalid JSON");
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) record.text = content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  if (record.text.empty()) throw CollectionError("model '" + model.id + "' returned an empty completion");
  return record;
}

}  // namespace gaprouter::upstream
