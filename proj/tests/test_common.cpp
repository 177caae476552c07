#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "fixtures.hpp"
#include "gaprouter/common/binary.hpp"
#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/jsonl.hpp"
#include "gaprouter/common/roster.hpp"
#include "gaprouter/pipeline/config.hpp"

using namespace gaprouter;

TEST_CASE("sha256 matches the published test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("mix_seed is order sensitive and deterministic") {
  const std::string_view ab[] = {"a", "b"};
  const std::string_view ba[] = {"b", "a"};
  CHECK(mix_seed(1, ab) == mix_seed(1, ab));
  CHECK(mix_seed(1, ab) != mix_seed(1, ba));
  CHECK(mix_seed(1, ab) != mix_seed(2, ab));
}

TEST_CASE("Rng is reproducible and below() stays in range") {
  Rng a(3), b(3);
  for (int k = 0; k < 100; ++k) CHECK(a.next_u64() == b.next_u64());
  Rng r(9);
  for (int k = 0; k < 1000; ++k) {
    const auto v = r.below(7);
    CHECK(v < 7);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("jsonl skips malformed lines and round-trips rows") {
  testing::TempDir dir;
  const auto path = dir.file("rows.jsonl");
  {
    std::ofstream out(path);
    out << R"({"x":1})" << "\n\n" << "not json\n" << R"([1,2])" << "\n" << R"({"x":2})" << "\n";
  }
  std::vector<int> xs;
  const auto stats = read_jsonl(path, [&](const json& row) { xs.push_back(row["x"].get<int>()); });
  CHECK(xs == std::vector<int>{1, 2});
  CHECK(stats.malformed == 2);

  write_jsonl(path, {json{{"y", "a"}}, json{{"y", "b"}}});
  const auto rows = read_jsonl(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1]["y"] == "b");
  CHECK_THROWS_AS(read_jsonl(dir.file("missing.jsonl")), IngestError);
}

TEST_CASE("concurrent atomic writes never leave a torn file") {
  testing::TempDir dir;
  const auto path = dir.file("shared.txt");
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 20; ++k) write_file_atomic(path, std::string(1000, static_cast<char>('a' + t)));
    });
  }
  for (auto& th : threads) th.join();
  const auto text = read_file(path);
  REQUIRE(text.size() == 1000);
  CHECK(std::count(text.begin(), text.end(), text[0]) == 1000);
}

TEST_CASE("roster hash depends on ids and order") {
  const Roster a({"x", "y"}), b({"y", "x"}), c({"x", "y"});
  CHECK(a.hash() == c.hash());
  CHECK(a.hash() != b.hash());
  CHECK(a.index_of("y") == 1);
  CHECK_THROWS_AS(a.index_of("z"), Error);
}

TEST_CASE("f64 payload round-trip and truncation") {
  std::string buf;
  append_f64le(buf, 1.5);
  append_f64le(buf, -0.0);
  append_f64le(buf, 3.0);
  F64Reader in(buf);
  CHECK(in.next() == 1.5);
  CHECK(std::signbit(in.next()));
  CHECK(in.next_count() == 3);
  CHECK(in.done());
  CHECK_THROWS_AS(in.next(), BundleError);
  CHECK_THROWS_AS(F64Reader(std::string_view(buf).substr(0, 12)), BundleError);
  std::string frac;
  append_f64le(frac, 2.5);
  F64Reader bad(frac);
  CHECK_THROWS_AS(bad.next_count(), BundleError);
}

TEST_CASE("config layering: file < env < flags") {
  testing::TempDir dir;
  const auto path = dir.file("config.json");
  write_file_atomic(path, R"({"policy":{"tau":0.05,"fallback":"hedged_query_both"},"embedding":{"dim":16}})");
  std::map<std::string, std::string> env = {{"GAPROUTER_POLICY_TAU", "0.07"}, {"GAPROUTER_EMBEDDING_DIM", "32"}};
  auto lookup = [&](const std::string& name) -> std::optional<std::string> {
    auto it = env.find(name);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  const auto from_file = pipeline::load_app_config(path, {}, [](const std::string&) { return std::nullopt; });
  CHECK(from_file.policy.tau == 0.05);
  CHECK(from_file.embedding.dim == 16);
  CHECK(from_file.policy.fallback == router::Fallback::hedged_query_both);

  const auto with_env = pipeline::load_app_config(path, {}, lookup);
  CHECK(with_env.policy.tau == 0.07);
  CHECK(with_env.embedding.dim == 32);

  const auto with_flags = pipeline::load_app_config(path, {"policy.tau=0.09"}, lookup);
  CHECK(with_flags.policy.tau == 0.09);
  CHECK(with_flags.embedding.dim == 32);
}

TEST_CASE("config rejects bad values with a ConfigError") {
  auto none = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  CHECK_THROWS_AS(pipeline::load_app_config(std::nullopt, {"policy.tau=-1"}, none), ConfigError);
  CHECK_THROWS_AS(pipeline::load_app_config(std::nullopt, {"policy.mode=sideways"}, none), ConfigError);
  CHECK_THROWS_AS(pipeline::load_app_config(std::nullopt, {"embedding.dim=0"}, none), ConfigError);
  CHECK_THROWS_AS(pipeline::load_app_config(std::nullopt, {"noequals"}, none), ConfigError);
  CHECK_THROWS_AS(pipeline::load_app_config(std::nullopt, {"judge.template=no slots"}, none), ConfigError);
  // String keys accept values that happen to parse as numbers.
  const auto c = pipeline::load_app_config(std::nullopt, {"upstream.api_key_env=123"}, none);
  CHECK(c.upstream.api_key_env == "123");
}

TEST_CASE("default jury is the expert roster") {
  pipeline::AppConfig c;
  c.models = upstream::models_from_json(nlohmann::json::parse(
      R"([{"id":"a","route":"x/a"},{"id":"b","route":"x/b"},{"id":"j","route":"x/j","roles":["judge"]}])"));
  CHECK(c.judges().size() == 1);
  CHECK(c.roster().ids() == std::vector<std::string>{"a", "b"});
  c.models.pop_back();
  CHECK(c.judges().size() == 2);
}
