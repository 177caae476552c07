#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>

#include "gaprouter/upstream/model_descriptor.hpp"

namespace gaprouter::upstream {

inline constexpr double kDefaultTemperature = 0.7;

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};
  bool jitter = true;

  /// Delay before attempt `attempt + 1` (attempt counts from 0). A server
  /// supplied Retry-After wins, capped at max_delay.
  std::chrono::milliseconds delay(int attempt, std::optional<double> retry_after_s,
                                  std::uint64_t jitter_seed) const;
};

struct UpstreamSettings {
  /// OpenAI-compatible API root, e.g. "https://openrouter.ai/api/v1".
  std::string base_url;
  /// Name of the environment variable holding the bearer token; empty means
  /// no Authorization header.
  std::string api_key_env;
  RetryPolicy retry;
  std::chrono::milliseconds timeout{120000};
  std::optional<int> max_tokens;
  std::string system_prompt;
};

struct HttpReply {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
  int attempts = 0;
};

struct ResponseRecord {
  std::string prompt_id;
  std::string model_id;
  std::string text;
  std::int64_t latency_ms = 0;
  std::string created_at;
  double temperature = kDefaultTemperature;
  int attempt_count = 1;
};

nlohmann::json to_json(const ResponseRecord& r);
ResponseRecord response_from_json(const nlohmann::json& j);

/// Splits "http://host:port/v1" into ("http://host:port", "/v1").
std::pair<std::string, std::string> split_base_url(std::string_view base_url);

/// Thin client for OpenAI-compatible chat-completions and embeddings
/// endpoints. Stateless apart from configuration; safe to share across
/// threads (each call opens its own connection).
class UpstreamClient {
 public:
  explicit UpstreamClient(UpstreamSettings settings);

  /// One chat completion with a single user message. Retries transport
  /// failures, 429 and 5xx; throws CollectionError when attempts run out or
  /// the reply has no content.
  ResponseRecord complete(const ModelDescriptor& model, std::string_view prompt,
                          std::optional<double> temperature = std::nullopt) const;

  /// POSTs a JSON body to `path` under the model's (or the shared) base URL,
  /// retrying as complete() does. Returns the final reply, which may carry a
  /// non-2xx status when the error is not retryable.
  HttpReply post_json(std::string_view base_url, std::string_view path,
                      const nlohmann::json& body) const;

  const UpstreamSettings& settings() const { return settings_; }
  std::string_view base_url_for(const ModelDescriptor& model) const;

 private:
  UpstreamSettings settings_;
  std::string api_key_;
};

std::string utc_timestamp();

}  // namespace gaprouter::upstream
