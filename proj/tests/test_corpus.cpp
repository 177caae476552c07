#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "gaprouter/common/error.hpp"
#include "gaprouter/corpus/minhash.hpp"
#include "gaprouter/corpus/prompt_record.hpp"
#include "gaprouter/corpus/split.hpp"

using namespace gaprouter;
using namespace gaprouter::corpus;

namespace {

PromptRecord rec(const std::string& id, const std::string& text, const std::string& cat = "coding") {
  return PromptRecord{id, text, cat, "test", Split::unassigned};
}

double exact_jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::set<std::uint64_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (auto v : sa) inter += sb.count(v);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::string words(std::size_t from, std::size_t count, const std::string& prefix = "w") {
  std::string out;
  for (std::size_t k = 0; k < count; ++k) out += prefix + std::to_string(from + k) + " ";
  return out;
}

}  // namespace

TEST_CASE("ingest: well-formed lines, skips and fresh ids") {
  IdAllocator ids;
  std::istringstream three(R"({"text":"a"})" "\n" R"({"text":"b"})" "\n" R"({"text":"c"})" "\n");
  const auto r3 = ingest_stream(three, "src", "coding", ids);
  CHECK(r3.records.size() == 3);
  CHECK(std::all_of(r3.records.begin(), r3.records.end(), [](const auto& r) { return r.category == "coding"; }));

  std::istringstream with_bad(R"({"text":"a"})" "\n" R"({"prompt":"x"})" "\n" R"({"text":"c"})" "\n");
  const auto r2 = ingest_stream(with_bad, "src", "coding", ids);
  CHECK(r2.records.size() == 2);
  CHECK(r2.skipped == 1);

  testing::TempDir dir;
  const auto path = dir.file("in.jsonl");
  { std::ofstream(path) << R"({"text":"one"})" "\n" R"({"text":"two"})" "\n"; }
  IdAllocator fresh;
  const auto twice = ingest({path, path}, "Coding", CategorySet::defaults(), fresh);
  REQUIRE(twice.records.size() == 4);
  std::set<std::string> id_set;
  for (const auto& r : twice.records) id_set.insert(r.id);
  CHECK(id_set.size() == 4);
  CHECK(twice.records[0].category == "coding");

  CHECK_THROWS_AS(ingest({dir.file("nope.jsonl")}, "coding", CategorySet::defaults(), fresh), IngestError);
  CHECK_THROWS_AS(ingest({path}, "translation", CategorySet::defaults(), fresh), ConfigError);
}

TEST_CASE("category set is extensible and case-normalized") {
  CategorySet set({"Mathematics", "translation"});
  CHECK(set.contains("MATHEMATICS"));
  CHECK(set.canonical("Translation") == "translation");
  CHECK(CategorySet::defaults().size() == 5);
  CHECK_THROWS(CategorySet({"a", "A"}));
  CHECK_THROWS(CategorySet(std::vector<std::string>{}));
}

TEST_CASE("corpus round-trip keeps every field") {
  testing::TempDir dir;
  std::vector<PromptRecord> rs = {rec("p1", "hello"), rec("p2", "world", "mathematics")};
  rs[1].split = Split::validation;
  save_corpus(dir.file("c.jsonl"), rs);
  CHECK(load_corpus(dir.file("c.jsonl")) == rs);
}

TEST_CASE("minhash: determinism, disjoint texts, fallback and bounds") {
  const auto a = minhash_signature("the quick brown fox jumps over the lazy dog");
  const auto a2 = minhash_signature("the quick brown fox jumps over the lazy dog");
  CHECK(a.values == a2.values);
  CHECK(a.values.size() == 128);
  CHECK_FALSE(a.char_shingles);

  const auto b = minhash_signature(words(0, 50));
  const auto c = minhash_signature(words(1000, 50));
  CHECK(estimate_jaccard(b, c) == 0.0);

  const auto short_text = minhash_signature("hi there");
  CHECK(short_text.char_shingles);

  CHECK_THROWS(minhash_signature("x y z", MinHashParams{8, 3, 1}));
}

TEST_CASE("normalization strips punctuation and case") {
  CHECK(normalized_words("Hello, World! It's") == std::vector<std::string>{"hello", "world", "its"});
  CHECK(minhash_signature("Hello, world. How are you?").values ==
        minhash_signature("hello world how are you").values);
}

TEST_CASE("minhash estimate tracks exact shingle Jaccard 0.5 on 200-word texts") {
  // 200 shared-prefix words then distinct tails tuned so the exact shingle
  // Jaccard is close to 0.5; the oracle computes it over explicit sets.
  const std::string base = words(0, 200);
  const std::string other = words(0, 134) + words(5000, 66, "z");
  const auto sa = shingle_hashes(base, 3);
  const auto sb = shingle_hashes(other, 3);
  const double exact = exact_jaccard(sa, sb);
  CHECK(exact == doctest::Approx(0.5).epsilon(0.05));
  const double est = estimate_jaccard(minhash_signature(base), minhash_signature(other));
  CHECK(std::abs(est - exact) <= 0.10);
}

TEST_CASE("dedup: exact duplicates, distinct prompts, paraphrase block") {
  {
    const auto r = dedup({rec("a", "same words in this prompt here"), rec("b", "same words in this prompt here")});
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].id == "a");
    REQUIRE(r.removed.size() == 1);
    CHECK(r.removed[0] == std::pair<std::string, std::string>{"b", "a"});
  }
  {
    std::vector<PromptRecord> distinct;
    for (int k = 0; k < 10; ++k) distinct.push_back(rec("d" + std::to_string(k), words(k * 100, 30)));
    const auto r = dedup(distinct);
    CHECK(r.kept.size() == 10);
    CHECK(r.removed.empty());
  }
  {
    // Records 0-2: one long text and two single-word edits at the end.
    std::vector<PromptRecord> records;
    const std::string body = words(0, 120);
    records.push_back(rec("r0", body));
    records.push_back(rec("r1", body + "extra"));
    records.push_back(rec("r2", body + "tail"));
    for (int k = 3; k < 10; ++k) records.push_back(rec("r" + std::to_string(k), words(1000 * k, 40)));
    // Oracle: all-pairs exact Jaccard without LSH.
    std::size_t oracle_removed = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      bool dup = false;
      for (std::size_t j = 0; j < i && !dup; ++j) {
        dup = exact_jaccard(shingle_hashes(records[i].text, 3), shingle_hashes(records[j].text, 3)) >= 0.8;
      }
      oracle_removed += dup;
    }
    CHECK(oracle_removed == 2);
    const auto r = dedup(records);
    CHECK(r.kept.size() == 8);
    // Idempotence.
    CHECK(dedup(r.kept).removed.empty());
  }
  CHECK(dedup({}).kept.empty());
}

TEST_CASE("shuffle: deterministic permutation") {
  std::vector<PromptRecord> rs;
  for (int k = 0; k < 100; ++k) rs.push_back(rec("p" + std::to_string(k), "t" + std::to_string(k)));
  auto a = rs, b = rs, c = rs;
  shuffle(a, 1);
  shuffle(b, 1);
  shuffle(c, 2);
  CHECK(a == b);
  CHECK(a != c);
  auto key = [](const PromptRecord& r) { return r.id; };
  std::vector<std::string> ia, ic;
  std::transform(a.begin(), a.end(), std::back_inserter(ia), key);
  std::transform(c.begin(), c.end(), std::back_inserter(ic), key);
  std::sort(ia.begin(), ia.end());
  std::sort(ic.begin(), ic.end());
  CHECK(ia == ic);
  std::vector<PromptRecord> empty;
  shuffle(empty, 3);
  CHECK(empty.empty());
}

TEST_CASE("stratified split sizes") {
  {
    const std::vector<std::string> one(100, "s");
    const auto s = stratified_split(one, 0.8, 1);
    CHECK(s.train.size() == 80);
    CHECK(s.validation.size() == 20);
  }
  {
    std::vector<std::string> five;
    for (int k = 0; k < 50; ++k) five.push_back("s" + std::to_string(k % 5));
    const auto s = stratified_split(five, 0.8, 1);
    std::map<std::string, int> per;
    for (auto i : s.train) ++per[five[i]];
    for (const auto& [k, v] : per) CHECK(v == 8);
  }
  {
    const std::vector<std::string> seven(7, "s");
    const auto s = stratified_split(seven, 0.8, 1);
    CHECK((s.train.size() == 5 || s.train.size() == 6));
  }
  {
    const auto s = stratified_split({"a", "b", "b"}, 0.5, 1);
    CHECK(std::find(s.train.begin(), s.train.end(), 0) != s.train.end());
  }
  CHECK_THROWS(stratified_split({"a"}, 1.0, 1));
}

TEST_CASE("stratified split invariants on fuzzed strata") {
  Rng rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> strata;
    const auto n = 1 + rng.below(80);
    for (std::uint64_t k = 0; k < n; ++k) strata.push_back("s" + std::to_string(rng.below(6)));
    const double f = rng.uniform(0.1, 0.9);
    const auto s = stratified_split(strata, f, trial);
    CHECK(s == stratified_split(strata, f, trial));
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    std::sort(all.begin(), all.end());
    CHECK(all.size() == n);
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    std::map<std::string, std::pair<double, double>> counts;
    for (auto i : s.train) counts[strata[i]].first += 1;
    for (const auto& st : strata) counts[st].second += 1;
    for (const auto& [key, tv] : counts) {
      if (tv.second == 1) continue;
      CHECK(tv.first / tv.second >= f - 1.0 / tv.second - 1e-12);
      CHECK(tv.first / tv.second <= f + 1.0 / tv.second + 1e-12);
    }
  }
}
