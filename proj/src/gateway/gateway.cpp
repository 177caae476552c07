#include "gaprouter/gateway/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <future>
#include <optional>
#include <thread>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/log.hpp"

namespace gaprouter::gateway {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Reply error_reply(int status, const std::string& message) {
  Reply r;
  r.status = status;
  r.body = json{{"error", {{"message", message}, {"code", status}}}}.dump();
  return r;
}

struct Forwarded {
  upstream::HttpReply reply;
  double ms = 0.0;
};

/// One model, one retry (the client's policy). Any transport failure or
/// non-2xx status counts as a failed forward.
std::optional<Forwarded> forward(const upstream::UpstreamClient& client, const upstream::ModelDescriptor& model,
                                 json body) {
  body["model"] = model.route.empty() ? model.id : model.route;
  const auto start = Clock::now();
  try {
    auto reply = client.post_json(client.base_url_for(model), "/chat/completions", body);
    if (reply.status >= 200 && reply.status < 300) return Forwarded{std::move(reply), ms_since(start)};
    log::warn("forward failed", {{"model", model.id}, {"status", reply.status}});
  } catch (const std::exception& e) {
    log::warn("forward failed", {{"model", model.id}, {"error", e.what()}});
  }
  return std::nullopt;
}

/// Runs a forward on a detached thread so an unneeded hedge never delays the
/// response.
std::shared_future<std::optional<Forwarded>> forward_async(std::shared_ptr<const upstream::UpstreamClient> client,
                                                           upstream::ModelDescriptor model, json body) {
  auto promise = std::make_shared<std::promise<std::optional<Forwarded>>>();
  auto future = promise->get_future().share();
  std::thread([client = std::move(client), model = std::move(model), body = std::move(body), promise] {
    promise->set_value(forward(*client, model, body));
  }).detach();
  return future;
}

const upstream::ModelDescriptor& model_for(const std::vector<upstream::ModelDescriptor>& models,
                                           const std::string& id) {
  return upstream::find_model(models, id);
}

}  // namespace

void GatewayConfig::validate() const {
  if (roster().size() < 2) throw ConfigError("gateway needs at least two experts in models");
  policy.validate();
  if (port < 0 || port > 65535) throw ConfigError("gateway port out of range");
}

upstream::UpstreamSettings forwarding_settings(upstream::UpstreamSettings settings) {
  settings.retry.max_attempts = 2;
  return settings;
}

std::string last_user_text(const json& body) {
  if (!body.is_object() || !body.contains("messages") || !body["messages"].is_array()) return {};
  const auto& messages = body["messages"];
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (!it->is_object() || it->value("role", "") != "user" || !it->contains("content")) continue;
    const auto& content = (*it)["content"];
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string text;
      for (const auto& part : content) {
        if (part.is_object() && part.value("type", "") == "text" && part.contains("text") && part["text"].is_string()) {
          if (!text.empty()) text += "\n";
          text += part["text"].get<std::string>();
        }
      }
      return text;
    }
    return {};
  }
  return {};
}

void LatencyWindow::add(double ms) {
  std::lock_guard lock(mutex_);
  samples_.push_back(ms);
  if (samples_.size() > capacity_) samples_.pop_front();
  ++total_;
}

json LatencyWindow::summary() const {
  std::vector<double> sorted;
  std::uint64_t total = 0;
  {
    std::lock_guard lock(mutex_);
    sorted.assign(samples_.begin(), samples_.end());
    total = total_;
  }
  if (sorted.empty()) return {{"count", 0}, {"mean", 0.0}, {"p50", 0.0}, {"p95", 0.0}, {"max", 0.0}};
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  auto pct = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()))) ;
    return sorted[std::min(sorted.size() - 1, k == 0 ? 0 : k - 1)];
  };
  return {{"count", total},
          {"mean", sum / static_cast<double>(sorted.size())},
          {"p50", pct(0.50)},
          {"p95", pct(0.95)},
          {"max", sorted.back()}};
}

Metrics::Metrics(std::size_t experts) : chosen_(experts) {}

void Metrics::record_decision(std::size_t chosen, bool fallback) {
  chosen_.at(chosen).fetch_add(1);
  if (fallback) fallback_count_.fetch_add(1);
  requests_.fetch_add(1);
}

json Metrics::to_json(const Roster& roster, const router::CostModel& cost) const {
  json chosen = json::object();
  std::uint64_t chosen_total = 0;
  for (std::size_t e = 0; e < chosen_.size(); ++e) {
    const auto n = chosen_[e].load();
    chosen[roster.id(e)] = n;
    chosen_total += n;
  }
  // Derive the fraction from the per-expert sum so that it is consistent
  // with the counters in the same payload even while requests race.
  const auto requests = std::max<std::uint64_t>(requests_.load(), chosen_total);
  const auto fallbacks = std::min<std::uint64_t>(fallback_count_.load(), requests);
  const double fraction = requests == 0 ? 0.0 : static_cast<double>(fallbacks) / static_cast<double>(requests);
  return {{"requests", requests},
          {"fallback_count", fallbacks},
          {"fallback_fraction", fraction},
          {"expected_cost", cost.regressor + fraction * cost.classifier},
          {"chosen", chosen},
          {"failovers", failovers_.load()},
          {"errors", errors_.load()},
          {"latency_ms",
           {{"embed", embed_ms.summary()},
            {"inference", inference_ms.summary()},
            {"upstream", upstream_ms.summary()},
            {"total", total_ms.summary()}}}};
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<upstream::Embedder> embedder,
                 std::shared_ptr<const upstream::UpstreamClient> client)
    : config_(std::move(config)),
      embedder_(std::move(embedder)),
      client_(std::move(client)),
      metrics_(config_.roster().size()) {
  config_.validate();
  if (config_.bundle_path.empty()) throw ConfigError("policy.bundle_path is not set");
  auto bundle = load_checked();
  publish(std::move(bundle), learners::bundle_hash(config_.bundle_path));
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<upstream::Embedder> embedder,
                 std::shared_ptr<const upstream::UpstreamClient> client,
                 std::shared_ptr<const learners::ModelBundle> bundle, std::string bundle_hash)
    : config_(std::move(config)),
      embedder_(std::move(embedder)),
      client_(std::move(client)),
      metrics_(config_.roster().size()) {
  config_.validate();
  if (bundle) {
    if (bundle->roster.hash() != config_.roster().hash()) {
      throw BundleError("bundle roster differs from the configured roster");
    }
    publish(std::move(bundle), std::move(bundle_hash));
  }
}

Gateway::~Gateway() { stop(); }

std::shared_ptr<const learners::ModelBundle> Gateway::load_checked() const {
  auto bundle = std::make_shared<learners::ModelBundle>(
      learners::load_bundle(config_.bundle_path, config_.roster().hash()));
  return bundle;
}

void Gateway::publish(std::shared_ptr<const learners::ModelBundle> bundle, std::string hash) {
  if (embedder_ && embedder_->dim() != bundle->embedding_dim) {
    throw ConfigError("embedding dim " + std::to_string(embedder_->dim()) + " differs from bundle dim " +
                      std::to_string(bundle->embedding_dim));
  }
  auto snap = std::make_shared<Snapshot>();
  snap->router = std::make_shared<router::BundleRouter>(bundle, config_.policy);
  snap->bundle = std::move(bundle);
  snap->bundle_hash = std::move(hash);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(snap);
}

std::shared_ptr<const Snapshot> Gateway::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void Gateway::reload() {
  std::lock_guard lock(reload_mutex_);
  auto bundle = load_checked();
  publish(std::move(bundle), learners::bundle_hash(config_.bundle_path));
  log::info("bundle reloaded", {{"bundle_hash", snapshot()->bundle_hash}});
}

Reply Gateway::handle_route(const std::string& body) {
  const auto start = Clock::now();
  const json req = json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return error_reply(400, "body must be a JSON object");
  const auto prompt = req.contains("prompt") && req["prompt"].is_string() ? req["prompt"].get<std::string>() : "";
  if (prompt.empty()) return error_reply(400, "prompt must be a non-empty string");
  const auto snap = snapshot();
  if (!snap) return error_reply(503, "no bundle loaded");

  const auto t_embed = Clock::now();
  upstream::EmbeddingVector emb;
  try {
    emb = embedder_->embed(prompt);
  } catch (const std::exception& e) {
    metrics_.record_error();
    return error_reply(502, std::string("embedding failed: ") + e.what());
  }
  const double embed_ms = ms_since(t_embed);
  const auto t_infer = Clock::now();
  router::RoutingDecision decision;
  try {
    decision = snap->router->route(emb.values);
  } catch (const std::exception& e) {
    metrics_.record_error();
    return error_reply(500, std::string("routing failed: ") + e.what());
  }
  const double inference_ms = ms_since(t_infer);
  metrics_.record_decision(decision.chosen, decision.fallback_used);
  metrics_.embed_ms.add(embed_ms);
  metrics_.inference_ms.add(inference_ms);
  metrics_.total_ms.add(ms_since(start));

  Reply r;
  r.body = json{{"decision", router::to_json(decision, snap->bundle->roster)},
                {"timing", {{"embed_ms", embed_ms}, {"inference_ms", inference_ms}, {"upstream_ms", 0.0}}}}
               .dump();
  return r;
}

Reply Gateway::handle_chat(const std::string& body) {
  const auto start = Clock::now();
  const json req = json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return error_reply(400, "body must be a JSON object");
  if (req.value("stream", false)) return error_reply(400, "streaming is not supported");
  const auto prompt = last_user_text(req);
  if (prompt.empty()) return error_reply(400, "no user message with text content");
  const auto snap = snapshot();
  if (!snap) return error_reply(503, "no bundle loaded");

  const auto t_embed = Clock::now();
  upstream::EmbeddingVector emb;
  try {
    emb = embedder_->embed(prompt);
  } catch (const std::exception& e) {
    metrics_.record_error();
    return error_reply(502, std::string("embedding failed: ") + e.what());
  }
  metrics_.embed_ms.add(ms_since(t_embed));
  const auto t_infer = Clock::now();
  router::RoutingDecision decision;
  try {
    decision = snap->router->route(emb.values);
  } catch (const std::exception& e) {
    metrics_.record_error();
    return error_reply(500, std::string("routing failed: ") + e.what());
  }
  metrics_.inference_ms.add(ms_since(t_infer));
  metrics_.record_decision(decision.chosen, decision.fallback_used);

  const auto& roster = snap->bundle->roster;
  const std::size_t primary = decision.chosen;
  const std::size_t secondary = primary == decision.top1 ? decision.top2 : decision.top1;
  const auto& primary_model = model_for(config_.models, roster.id(primary));
  const auto& secondary_model = model_for(config_.models, roster.id(secondary));

  std::optional<Forwarded> answer;
  std::size_t answered_by = primary;
  const bool hedged = decision.fallback_used && config_.policy.fallback == router::Fallback::hedged_query_both;
  if (hedged) {
    auto first = forward_async(client_, primary_model, req);
    auto second = forward_async(client_, secondary_model, req);
    answer = first.get();
    if (!answer) {
      answer = second.get();
      answered_by = secondary;
    }
  } else {
    answer = forward(*client_, primary_model, req);
    if (!answer) {
      answer = forward(*client_, secondary_model, req);
      answered_by = secondary;
    }
  }
  const bool failover = answered_by != primary;
  if (failover) metrics_.record_failover();

  std::string fallback_header = decision.fallback_used ? "classifier" : "none";
  if (failover) fallback_header = decision.fallback_used ? "classifier,failover" : "failover";
  if (!answer) {
    metrics_.record_error();
    auto r = error_reply(502, "both candidate upstreams failed");
    r.headers["X-Router-Gap"] = shortest(decision.gap);
    r.headers["X-Router-Fallback"] = fallback_header;
    return r;
  }
  metrics_.upstream_ms.add(answer->ms);
  metrics_.total_ms.add(ms_since(start));

  Reply r;
  r.status = answer->reply.status;
  r.body = std::move(answer->reply.body);
  for (const auto& [k, v] : answer->reply.headers) {
    if (k == "Content-Type" || k == "content-type") r.content_type = v;
  }
  r.headers["X-Router-Model"] = roster.id(answered_by);
  r.headers["X-Router-Gap"] = shortest(decision.gap);
  r.headers["X-Router-Fallback"] = fallback_header;
  return r;
}

Reply Gateway::handle_metrics() const {
  if (!config_.metrics) return error_reply(404, "metrics disabled");
  Reply r;
  r.body = metrics_.to_json(config_.roster(), config_.cost).dump();
  return r;
}

Reply Gateway::handle_health() const {
  const auto snap = snapshot();
  if (!snap) {
    Reply r = error_reply(503, "no bundle loaded");
    return r;
  }
  Reply r;
  r.body = json{{"status", "ok"},
                {"bundle_hash", snap->bundle_hash},
                {"roster_hash", snap->bundle->roster.hash()},
                {"mode", learners::to_string(snap->bundle->mode)},
                {"tau", config_.policy.tau}}
               .dump();
  return r;
}

Reply Gateway::handle_reload() {
  if (!config_.admin) return error_reply(404, "admin endpoints disabled");
  try {
    reload();
  } catch (const std::exception& e) {
    log::error("bundle reload failed", {{"error", e.what()}});
    return error_reply(500, std::string("reload failed, previous bundle kept: ") + e.what());
  }
  Reply r;
  r.body = json{{"status", "reloaded"}, {"bundle_hash", snapshot()->bundle_hash}}.dump();
  return r;
}

int Gateway::bind() {
  server_ = std::make_unique<httplib::Server>();
  auto wrap = [](Reply reply, httplib::Response& res) {
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(std::move(reply.body), reply.content_type);
  };
  server_->Post("/v1/route", [this, wrap](const httplib::Request& req, httplib::Response& res) {
    wrap(handle_route(req.body), res);
  });
  server_->Post("/v1/chat/completions", [this, wrap](const httplib::Request& req, httplib::Response& res) {
    wrap(handle_chat(req.body), res);
  });
  server_->Get("/metrics", [this, wrap](const httplib::Request&, httplib::Response& res) {
    wrap(handle_metrics(), res);
  });
  server_->Get("/healthz", [this, wrap](const httplib::Request&, httplib::Response& res) {
    wrap(handle_health(), res);
  });
  server_->Post("/admin/reload", [this, wrap](const httplib::Request&, httplib::Response& res) {
    wrap(handle_reload(), res);
  });

  int port = config_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(config_.host);
    if (port < 0) throw Error("cannot bind " + config_.host);
  } else if (!server_->bind_to_port(config_.host, port)) {
    throw Error("cannot bind " + config_.host + ":" + std::to_string(port));
  }
  log::info("gateway bound", {{"host", config_.host}, {"port", port}});
  return port;
}

void Gateway::listen() {
  if (!server_) throw Error("listen() before bind()");
  server_->listen_after_bind();
}

void Gateway::stop() {
  if (server_) server_->stop();
}

}  // namespace gaprouter::gateway
