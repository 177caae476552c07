#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "gaprouter/learners/bundle.hpp"
#include "gaprouter/router/router.hpp"
#include "gaprouter/upstream/client.hpp"
#include "gaprouter/upstream/embedder.hpp"

namespace httplib {
class Server;
}

namespace gaprouter::gateway {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  /// 0 binds an ephemeral port.
  int port = 8080;
  std::vector<upstream::ModelDescriptor> models;
  router::RouterPolicy policy;
  std::string bundle_path;
  upstream::EmbeddingSettings embedding;
  upstream::UpstreamSettings upstream;
  bool metrics = true;
  bool admin = true;
  router::CostModel cost;

  Roster roster() const { return upstream::expert_roster(models); }
  /// Needs at least two experts and a valid policy.
  void validate() const;
};

/// Rolling latency window (most recent samples only).
class LatencyWindow {
 public:
  explicit LatencyWindow(std::size_t capacity = 4096) : capacity_(capacity) {}
  void add(double ms);
  /// {count, mean, p50, p95, max}; count is the lifetime total.
  nlohmann::json summary() const;

 private:
  mutable std::mutex mutex_;
  std::deque<double> samples_;
  std::size_t capacity_;
  std::uint64_t total_ = 0;
};

class Metrics {
 public:
  explicit Metrics(std::size_t experts);

  void record_decision(std::size_t chosen, bool fallback);
  void record_failover() { ++failovers_; }
  void record_error() { ++errors_; }

  std::uint64_t requests() const { return requests_.load(); }
  std::uint64_t fallback_count() const { return fallback_count_.load(); }
  std::uint64_t chosen(std::size_t expert) const { return chosen_.at(expert).load(); }

  LatencyWindow embed_ms;
  LatencyWindow inference_ms;
  LatencyWindow upstream_ms;
  LatencyWindow total_ms;

  /// Counters plus fallback fraction and the matching expected cost
  /// C_R + fraction * C_B.
  nlohmann::json to_json(const Roster& roster, const router::CostModel& cost) const;

 private:
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> fallback_count_{0};
  std::atomic<std::uint64_t> failovers_{0};
  std::atomic<std::uint64_t> errors_{0};
  std::vector<std::atomic<std::uint64_t>> chosen_;
};

/// A loaded bundle with its router. Immutable once published.
struct Snapshot {
  std::shared_ptr<const learners::ModelBundle> bundle;
  std::shared_ptr<const router::BundleRouter> router;
  std::string bundle_hash;
};

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

/// The routing service. Handlers are plain functions of the request body so
/// they can be exercised without sockets; serve() wires them to HTTP.
class Gateway {
 public:
  /// Loads and checks the bundle named in the config; throws BundleError or
  /// ConfigError on any inconsistency so no port is ever bound.
  Gateway(GatewayConfig config, std::shared_ptr<upstream::Embedder> embedder,
          std::shared_ptr<const upstream::UpstreamClient> client);
  /// Same, with an already loaded bundle (null leaves the service cold).
  Gateway(GatewayConfig config, std::shared_ptr<upstream::Embedder> embedder,
          std::shared_ptr<const upstream::UpstreamClient> client,
          std::shared_ptr<const learners::ModelBundle> bundle, std::string bundle_hash = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  Reply handle_route(const std::string& body);
  Reply handle_chat(const std::string& body);
  Reply handle_metrics() const;
  Reply handle_health() const;
  Reply handle_reload();

  /// Reloads the bundle from config.bundle_path and swaps it in. Requests
  /// already running keep the old snapshot. On failure the old bundle stays
  /// and the error propagates.
  void reload();

  std::shared_ptr<const Snapshot> snapshot() const;
  const Metrics& metrics() const { return metrics_; }
  const GatewayConfig& config() const { return config_; }

  /// Binds the listen address; returns the bound port.
  int bind();
  /// Serves until stop(). Requires bind().
  void listen();
  void stop();

 private:
  void publish(std::shared_ptr<const learners::ModelBundle> bundle, std::string hash);
  std::shared_ptr<const learners::ModelBundle> load_checked() const;

  GatewayConfig config_;
  std::shared_ptr<upstream::Embedder> embedder_;
  std::shared_ptr<const upstream::UpstreamClient> client_;
  Metrics metrics_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::mutex reload_mutex_;

  std::unique_ptr<httplib::Server> server_;
};

/// Forwarding client for the gateway: the configured upstream with one retry
/// per model.
upstream::UpstreamSettings forwarding_settings(upstream::UpstreamSettings settings);

/// Text of the last user message of an OpenAI chat body (string content or
/// an array of text parts); empty when there is none.
std::string last_user_text(const nlohmann::json& body);

}  // namespace gaprouter::gateway
