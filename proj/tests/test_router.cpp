#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "fixtures.hpp"
#include "gaprouter/common/error.hpp"
#include "gaprouter/common/random.hpp"
#include "gaprouter/learners/training.hpp"
#include "gaprouter/router/router.hpp"

using namespace gaprouter;
using namespace gaprouter::router;

namespace {

const Roster kRoster({"a", "b", "c", "d"});

std::vector<double> fixed(std::initializer_list<double> v) { return std::vector<double>(v); }

}  // namespace

TEST_CASE("gap") {
  const auto tie = gap(fixed({0.4, 0.4, 0.1, 0.1}));
  CHECK(tie.top1 == 0);
  CHECK(tie.top2 == 1);
  CHECK(tie.gap == 0.0);
  CHECK(gap(fixed({0.39, 0.30, 0.18, 0.13})).gap == doctest::Approx(0.09).epsilon(1e-12));
  CHECK_THROWS_AS(gap(fixed({1.0})), Error);

  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(2 + rng.below(5));
    for (auto& v : s) v = static_cast<double>(rng.below(5)) / 4.0;
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return s[x] > s[y]; });
    const auto g = gap(s);
    CHECK(g.top1 == idx[0]);
    CHECK(g.top2 == idx[1]);
    CHECK(g.gap == s[idx[0]] - s[idx[1]]);
  }
}

TEST_CASE("route: hand trace and boundaries") {
  const testing::StubRegressor reg(kRoster, 2, [](auto) { return fixed({0.35, 0.30, 0.20, 0.15}); });
  const testing::StubPair prefers_b(kRoster, 2, [](auto, std::size_t a, std::size_t) { return a == 1 ? 0.9 : 0.1; });
  const double e[2] = {0, 0};
  RouterPolicy p;
  p.tau = 0.07;
  auto d = route(e, reg, &prefers_b, p);
  CHECK(d.gap == doctest::Approx(0.05));
  CHECK(d.fallback_used);
  CHECK(d.chosen == 1);
  CHECK(d.upstream_calls_planned == 1);
  CHECK(d.classifier_probability.has_value());
  CHECK(*d.classifier_probability == doctest::Approx(0.9));

  p.fallback = Fallback::hedged_query_both;
  CHECK(route(e, reg, &prefers_b, p).upstream_calls_planned == 2);

  p.tau = 0.0;
  d = route(e, reg, &prefers_b, p);
  CHECK_FALSE(d.fallback_used);
  CHECK(d.chosen == 0);
  CHECK(d.upstream_calls_planned == 1);
  CHECK(prefers_b.calls == 4);  // two orientations, one fallback

  p.tau = 0.07;
  CHECK_THROWS_AS(route(e, reg, nullptr, p), RoutingError);

  // g == tau is confident; use a gap that is exactly representable.
  const testing::StubRegressor exact(kRoster, 2, [](auto) { return fixed({0.5, 0.25, 0.125, 0.125}); });
  p.tau = 0.25;
  CHECK_FALSE(route(e, exact, &prefers_b, p).fallback_used);
  p.tau = std::nextafter(0.25, 1.0);
  CHECK(route(e, exact, &prefers_b, p).fallback_used);

  p.tau = -0.1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.tau = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("route: tau=0 is top-1, tau=1 always consults the classifier") {
  Rng rng(5);
  std::vector<std::vector<double>> scores(500);
  for (auto& s : scores) {
    s.resize(4);
    for (auto& v : s) v = rng.uniform(0, 1);
  }
  std::size_t current = 0;
  const testing::StubRegressor reg(kRoster, 1, [&](auto) { return scores[current]; });
  const testing::StubPair clf(kRoster, 1, [](auto, std::size_t a, std::size_t b) { return a > b ? 0.8 : 0.3; });
  const double e[1] = {0};
  RouterPolicy zero, one;
  zero.tau = 0.0;
  one.tau = 1.0;
  for (current = 0; current < scores.size(); ++current) {
    const auto d0 = route(e, reg, &clf, zero);
    CHECK(d0.chosen == baseline_top1(e, reg));
    CHECK_FALSE(d0.fallback_used);
    const auto d1 = route(e, reg, &clf, one);
    CHECK(d1.fallback_used);
    CHECK((d1.chosen == d1.top1 || d1.chosen == d1.top2));
  }
}

TEST_CASE("route_category_aware") {
  const testing::StubCategory by_sign({"mathematics", "coding"}, 1,
                                      [](std::span<const double> e) { return e[0] > 0 ? 0u : 1u; });
  CategoryRegressors regs;
  regs["mathematics"] = std::make_shared<testing::StubRegressor>(kRoster, 1, [](auto) { return fixed({0.6, 0.2, 0.1, 0.1}); });
  regs["coding"] = std::make_shared<testing::StubRegressor>(kRoster, 1, [](auto) { return fixed({0.2, 0.6, 0.1, 0.1}); });
  const testing::StubPair clf(kRoster, 1, [](auto, auto, auto) { return 0.5; });
  RouterPolicy p;
  const double pos[1] = {1.0}, neg[1] = {-1.0};
  const auto dm = route_category_aware(pos, by_sign, regs, &clf, p);
  const auto dc = route_category_aware(neg, by_sign, regs, &clf, p);
  CHECK(dm.chosen == 0);
  CHECK(*dm.category == "mathematics");
  CHECK(dc.chosen == 1);
  CHECK(*dc.category == "coding");

  const testing::StubCategory constant({"mathematics", "coding"}, 1, [](auto) { return 1u; });
  const auto reduced = route_category_aware(pos, constant, regs, &clf, p);
  const auto global = route(pos, *regs["coding"], &clf, p);
  CHECK(reduced.chosen == global.chosen);
  CHECK(reduced.scores == global.scores);

  const testing::StubCategory unknown({"translation"}, 1, [](auto) { return 0u; });
  CHECK_THROWS_AS(route_category_aware(pos, unknown, regs, &clf, p), RoutingError);
}

TEST_CASE("BundleRouter refuses a label without a regressor at construction") {
  const auto data = testing::synthetic_dataset({.n = 60});
  auto bundle = std::make_shared<learners::ModelBundle>();
  bundle->roster = testing::synthetic_roster();
  bundle->embedding_dim = 8;
  bundle->mode = RoutingMode::per_category;
  learners::TrainingConfig cfg;
  cfg.rf.n_trees = 3;
  cfg.mlp.epochs = 1;
  cfg.mlp.hidden_sizes = {4};
  bundle->pair_classifier = std::make_shared<const learners::PairClassifierModel>(
      learners::train_pair_classifier(data, bundle->roster, cfg));
  std::vector<std::string> labels = {"mathematics", "coding", "summarization", "translation"};
  auto with_translation = data;
  with_translation[0].category = "translation";
  bundle->category_classifier = std::make_shared<const learners::CategoryClassifierModel>(
      learners::train_category_classifier(with_translation, labels, cfg));
  for (const auto& l : testing::synthetic_categories()) {
    bundle->category_regressors[l] =
        std::make_shared<const learners::RegressorModel>(learners::train_regressor(data, bundle->roster, cfg));
  }
  CHECK_THROWS(BundleRouter(bundle, RouterPolicy{0.1, RoutingMode::per_category, Fallback::classify_then_query_one}));
}

TEST_CASE("expected_cost") {
  const std::vector<double> gaps = {0.02, 0.05, 0.09, 0.15};
  CHECK(expected_cost(gaps, 0.10) == 1.75);
  CHECK(expected_cost(gaps, 0.0) == 1.0);
  CHECK(expected_cost(gaps, 1.0) == 2.0);
  CHECK(expected_cost(gaps, 0.10, CostModel{2.0, 4.0}) == 5.0);
}

TEST_CASE("baseline_all_pairs") {
  const testing::StubPair order(kRoster, 1, [](auto, std::size_t a, std::size_t b) {
    const int rank[4] = {2, 0, 3, 1};  // c > a > d > b
    return rank[a] > rank[b] ? 0.9 : 0.1;
  });
  const double e[1] = {0};
  const auto r = baseline_all_pairs(e, order, 4);
  CHECK(r.classifier_calls == 6);
  CHECK(r.winner == 2);
  CHECK(r.wins == std::vector<std::size_t>{2, 0, 3, 1});

  const Roster three({"r", "p", "s"});
  const testing::StubPair cyclic(three, 1, [](auto, std::size_t a, std::size_t b) {
    return (a + 1) % 3 == b ? 0.9 : 0.1;  // r beats p, p beats s, s beats r
  });
  const auto c = baseline_all_pairs(e, cyclic, 3);
  CHECK(c.wins == std::vector<std::size_t>{1, 1, 1});
  CHECK(c.winner == 0);
  CHECK(c.classifier_calls == 3);
}

TEST_CASE("decision json") {
  const testing::StubRegressor reg(kRoster, 1, [](auto) { return fixed({0.4, 0.3, 0.2, 0.1}); });
  const double e[1] = {0};
  const auto j = to_json(route(e, reg, nullptr, RouterPolicy{0.05}), kRoster);
  CHECK(j["chosen"] == "a");
  CHECK(j["top2"] == "b");
  CHECK(j["fallback_used"] == false);
  CHECK(j["upstream_calls_planned"] == 1);
}
