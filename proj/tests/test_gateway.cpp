#include <doctest.h>


#include <thread>

#include "fixtures.hpp"
#include "gaprouter/common/error.hpp"
#include "gaprouter/gateway/gateway.hpp"
#include "mock_upstream.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace gaprouter;
using namespace gaprouter::gateway;
using nlohmann::json;

namespace {

const Roster kRoster({"a", "b", "c", "d"});

GatewayConfig config_for(const std::string& base_url, double tau = 0.1) {
  GatewayConfig c;
  c.port = 0;
  for (const auto& id : kRoster.ids()) {
    upstream::ModelDescriptor m;
    m.id = id;
    m.route = "vendor/" + id;
    c.models.push_back(m);
  }
  c.policy.tau = tau;
  c.upstream = testing::fast_settings(base_url);
  return c;
}

struct Harness {
  explicit Harness(double tau = 0.1, std::optional<std::size_t> preferred = {},
                   router::Fallback fallback = router::Fallback::classify_then_query_one)
      : embedder(std::make_shared<testing::TableEmbedder>(4)) {
    mock.chat_fn = [](const std::string& model, const std::string&) {
      return testing::ChatReply{200, "answer from " + model};
    };
    auto cfg = config_for(mock.base_url(), tau);
    cfg.policy.fallback = fallback;
    bundle = testing::identity_bundle(kRoster, preferred);
    client = std::make_shared<const upstream::UpstreamClient>(forwarding_settings(cfg.upstream));
    gateway = std::make_unique<Gateway>(cfg, embedder, client, bundle, "fixture-hash");
  }

  Reply chat(const std::string& prompt) {
    return gateway->handle_chat(json{{"model", "auto"}, {"messages", {{{"role", "user"}, {"content", prompt}}}}}.dump());
  }

  testing::MockUpstream mock;
  std::shared_ptr<testing::TableEmbedder> embedder;
  std::shared_ptr<learners::ModelBundle> bundle;
  std::shared_ptr<const upstream::UpstreamClient> client;
  std::unique_ptr<Gateway> gateway;
};

std::string content_of(const Reply& r) { return json::parse(r.body)["choices"][0]["message"]["content"]; }

}  // namespace

TEST_CASE("route endpoint matches the offline router") {
  Harness h(0.1, 2u);
  const std::vector<std::vector<double>> fixtures = {
      {0.5, 0.2, 0.2, 0.1}, {0.3, 0.28, 0.22, 0.2}, {0.1, 0.1, 0.4, 0.4}, {0.25, 0.25, 0.25, 0.25}, {0.2, 0.35, 0.3, 0.15}};
  const router::BundleRouter offline(h.bundle, router::RouterPolicy{0.1});
  for (std::size_t k = 0; k < fixtures.size(); ++k) {
    const auto prompt = "prompt " + std::to_string(k);
    h.embedder->table[prompt] = fixtures[k];
    const auto reply = h.gateway->handle_route(json{{"prompt", prompt}}.dump());
    REQUIRE(reply.status == 200);
    const auto body = json::parse(reply.body);
    CHECK(body["decision"] == router::to_json(offline.route(fixtures[k]), kRoster));
    CHECK(body["timing"]["embed_ms"].get<double>() >= 0.0);
    CHECK(body["timing"]["inference_ms"].get<double>() >= 0.0);
  }
  CHECK(h.mock.chat_calls.load() == 0);
}

TEST_CASE("route endpoint errors") {
  Harness h;
  CHECK(h.gateway->handle_route(R"({"prompt":""})").status == 400);
  CHECK(h.gateway->handle_route(R"({"text":"x"})").status == 400);
  CHECK(h.gateway->handle_route("not json").status == 400);
  h.embedder->fail = true;
  CHECK(h.gateway->handle_route(R"({"prompt":"x"})").status == 502);
  CHECK(h.gateway->handle_chat(R"({"messages":[{"role":"user","content":"x"}],"stream":true})").status == 400);

  testing::MockUpstream mock;
  Gateway cold(config_for(mock.base_url()), std::make_shared<testing::TableEmbedder>(4), nullptr, nullptr);
  CHECK(cold.handle_route(R"({"prompt":"x"})").status == 503);
  CHECK(cold.handle_health().status == 503);
}

TEST_CASE("startup refusals") {
  testing::MockUpstream mock;
  auto cfg = config_for(mock.base_url());
  const auto other = testing::identity_bundle(Roster({"a", "b", "c", "x"}));
  CHECK_THROWS_AS(Gateway(cfg, std::make_shared<testing::TableEmbedder>(4), nullptr, other), BundleError);
  CHECK_THROWS_AS(Gateway(cfg, std::make_shared<testing::TableEmbedder>(8), nullptr, testing::identity_bundle(kRoster)),
                  ConfigError);
  testing::TempDir dir;
  cfg.bundle_path = dir.file("nope");
  CHECK_THROWS_AS(Gateway(cfg, std::make_shared<testing::TableEmbedder>(4), nullptr), BundleError);
  learners::save_bundle(*other, dir.file("other"));
  cfg.bundle_path = dir.file("other");
  CHECK_THROWS_AS(Gateway(cfg, std::make_shared<testing::TableEmbedder>(4), nullptr), BundleError);
}

TEST_CASE("chat forwards to the chosen model") {
  Harness h;
  h.embedder->table["confident"] = {0.1, 0.75, 0.25, 0.1};
  const auto r = h.chat("confident");
  REQUIRE(r.status == 200);
  CHECK(content_of(r) == "answer from vendor/b");
  CHECK(r.headers.at("X-Router-Model") == "b");
  CHECK(r.headers.at("X-Router-Fallback") == "none");
  CHECK(r.headers.at("X-Router-Gap") == "0.5");
  CHECK(h.mock.calls_for("vendor/b") == 1);
  CHECK(h.mock.chat_calls.load() == 1);
}

TEST_CASE("hedged mode returns the classifier's pick") {
  // top1 = c, top2 = a; the classifier prefers a.
  Harness h(0.1, 0u, router::Fallback::hedged_query_both);
  h.embedder->table["close"] = {0.30, 0.1, 0.32, 0.1};
  const auto r = h.chat("close");
  REQUIRE(r.status == 200);
  CHECK(content_of(r) == "answer from vendor/a");
  CHECK(r.headers.at("X-Router-Model") == "a");
  CHECK(r.headers.at("X-Router-Fallback") == "classifier");
  // The losing hedge runs detached; give it a moment to land.
  for (int k = 0; k < 200 && h.mock.chat_calls.load() < 2; ++k) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  CHECK(h.mock.calls_for("vendor/c") == 1);
  CHECK(h.mock.calls_for("vendor/a") == 1);
}

TEST_CASE("failover to the other candidate") {
  Harness h;
  h.embedder->table["p"] = {0.6, 0.2, 0.1, 0.1};
  h.mock.down_models = {"vendor/a"};
  auto r = h.chat("p");
  REQUIRE(r.status == 200);
  CHECK(content_of(r) == "answer from vendor/b");
  CHECK(r.headers.at("X-Router-Model") == "b");
  CHECK(r.headers.at("X-Router-Fallback") == "failover");
  CHECK(h.mock.calls_for("vendor/a") == 2);  // one retry
  CHECK(json::parse(h.gateway->handle_metrics().body)["failovers"] == 1);

  h.mock.down_models = {"vendor/a", "vendor/b"};
  r = h.chat("p");
  CHECK(r.status == 502);
}

TEST_CASE("metrics reproduce the fallback fraction") {
  Harness h(0.1);
  auto m = json::parse(h.gateway->handle_metrics().body);
  CHECK(m["requests"] == 0);
  CHECK(m["fallback_count"] == 0);
  CHECK(m["fallback_fraction"] == 0.0);
  for (const auto& id : kRoster.ids()) CHECK(m["chosen"][id] == 0);
  CHECK(h.gateway->handle_health().status == 200);
  CHECK(json::parse(h.gateway->handle_health().body)["bundle_hash"] == "fixture-hash");

  // Gaps 0.5 x 6 (confident) and 0.0625 x 4 (below 0.1).
  for (int k = 0; k < 10; ++k) {
    const auto prompt = "m" + std::to_string(k);
    h.embedder->table[prompt] = k < 4 ? std::vector<double>{0.25, 0.1875, 0, 0} : std::vector<double>{0.75, 0.25, 0, 0};
    REQUIRE(h.gateway->handle_route(json{{"prompt", prompt}}.dump()).status == 200);
  }
  m = json::parse(h.gateway->handle_metrics().body);
  CHECK(m["requests"] == 10);
  CHECK(m["fallback_count"] == 4);
  CHECK(m["fallback_fraction"] == 0.4);
  const std::vector<double> gaps = {0.0625, 0.0625, 0.0625, 0.0625, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  CHECK(m["expected_cost"] == router::expected_cost(gaps, 0.1));
  CHECK(m["expected_cost"].get<double>() == doctest::Approx(1.4));
  std::uint64_t total = 0;
  for (const auto& id : kRoster.ids()) total += m["chosen"][id].get<std::uint64_t>();
  CHECK(total == 10);
}

TEST_CASE("reload swaps bundles and keeps the old one on failure") {
  testing::MockUpstream mock;
  testing::TempDir dir;
  auto cfg = config_for(mock.base_url());
  cfg.bundle_path = dir.file("bundle");
  learners::save_bundle(*testing::identity_bundle(kRoster), cfg.bundle_path);
  Gateway g(cfg, std::make_shared<testing::TableEmbedder>(4), nullptr);
  const auto before = g.snapshot();
  learners::save_bundle(*testing::identity_bundle(kRoster, 3u), cfg.bundle_path);
  CHECK(g.handle_reload().status == 200);
  CHECK(g.snapshot() != before);
  CHECK(g.snapshot()->bundle_hash == learners::bundle_hash(cfg.bundle_path));
  const auto good = g.snapshot();
  std::filesystem::remove(std::filesystem::path(cfg.bundle_path) / "manifest.json");
  CHECK(g.handle_reload().status == 500);
  CHECK(g.snapshot() == good);
}

TEST_CASE("HTTP server end to end") {
  Harness h;
  h.embedder->table["hello"] = {0.1, 0.1, 0.7, 0.1};
  const int port = h.gateway->bind();
  REQUIRE(port > 0);
  std::thread server([&] { h.gateway->listen(); });
  httplib::Client cli("127.0.0.1", port);
  auto health = cli.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto routed = cli.Post("/v1/route", R"({"prompt":"hello"})", "application/json");
  REQUIRE(routed);
  CHECK(json::parse(routed->body)["decision"]["chosen"] == "c");
  auto chat = cli.Post("/v1/chat/completions", R"({"messages":[{"role":"user","content":"hello"}]})",
                       "application/json");
  REQUIRE(chat);
  CHECK(chat->status == 200);
  CHECK(chat->get_header_value("X-Router-Model") == "c");
  auto metrics = cli.Get("/metrics");
  REQUIRE(metrics);
  CHECK(json::parse(metrics->body)["requests"] == 2);
  h.gateway->stop();
  server.join();
}

TEST_CASE("last_user_text") {
  CHECK(last_user_text(json::parse(R"({"messages":[{"role":"user","content":"one"},{"role":"assistant","content":"x"},{"role":"user","content":"two"}]})")) == "two");
  CHECK(last_user_text(json::parse(R"({"messages":[{"role":"user","content":[{"type":"text","text":"a"},{"type":"image_url"},{"type":"text","text":"b"}]}]})")) == "a\nb");
  CHECK(last_user_text(json::parse(R"({"messages":[]})")).empty());
}
