#include "gaprouter/router/router.hpp"

#include <cmath>

#include "gaprouter/common/error.hpp"
#include "gaprouter/jury/judgment.hpp"
#include "gaprouter/jury/scoring.hpp"

namespace gaprouter::router {

std::string to_string(Fallback fallback) {
  return fallback == Fallback::classify_then_query_one ? "classify_then_query_one" : "hedged_query_both";
}

Fallback fallback_from_string(const std::string& name) {
  if (name == "classify_then_query_one") return Fallback::classify_then_query_one;
  if (name == "hedged_query_both") return Fallback::hedged_query_both;
  throw ConfigError("unknown fallback mode '" + name + "'");
}

void RouterPolicy::validate() const {
  if (!std::isfinite(tau) || tau < 0.0) throw ConfigError("tau must be finite and >= 0");
}

GapResult gap(std::span<const double> scores) {
  if (scores.size() < 2) throw Error("confidence gap needs at least two experts");
  std::size_t top1 = 0;
  for (std::size_t e = 1; e < scores.size(); ++e) {
    if (scores[e] > scores[top1]) top1 = e;
  }
  std::size_t top2 = top1 == 0 ? 1 : 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (e != top1 && scores[e] > scores[top2]) top2 = e;
  }
  return {top1, top2, scores[top1] - scores[top2]};
}

nlohmann::json to_json(const RoutingDecision& d, const Roster& roster) {
  nlohmann::json scores = nlohmann::json::object();
  for (std::size_t e = 0; e < d.scores.size() && e < roster.size(); ++e) scores[roster.id(e)] = d.scores[e];
  nlohmann::json j = {{"chosen", roster.id(d.chosen)},
                      {"scores", scores},
                      {"top1", roster.id(d.top1)},
                      {"top2", roster.id(d.top2)},
                      {"gap", d.gap},
                      {"fallback_used", d.fallback_used},
                      {"upstream_calls_planned", d.upstream_calls_planned}};
  j["category"] = d.category ? nlohmann::json(*d.category) : nlohmann::json(nullptr);
  j["classifier_probability"] =
      d.classifier_probability ? nlohmann::json(*d.classifier_probability) : nlohmann::json(nullptr);
  return j;
}

RoutingDecision decide(std::span<const double> embedding, std::vector<double> scores,
                       const PairPredictor* classifier, const RouterPolicy& policy) {
  const auto g = gap(scores);
  RoutingDecision d;
  d.scores = std::move(scores);
  d.top1 = g.top1;
  d.top2 = g.top2;
  d.gap = g.gap;
  if (d.gap >= policy.tau) {
    d.chosen = d.top1;
    d.fallback_used = false;
    d.upstream_calls_planned = 1;
    return d;
  }
  if (classifier == nullptr) {
    throw RoutingError("gap below tau but no pair classifier is available");
  }
  const auto choice = learners::predict_better(*classifier, embedding, d.top1, d.top2);
  d.chosen = choice.winner;
  d.classifier_probability = choice.probability;
  d.fallback_used = true;
  d.upstream_calls_planned = policy.fallback == Fallback::hedged_query_both ? 2 : 1;
  return d;
}

RoutingDecision route(std::span<const double> embedding, const ScorePredictor& regressor,
                      const PairPredictor* classifier, const RouterPolicy& policy) {
  return decide(embedding, regressor.predict_scores(embedding), classifier, policy);
}

RoutingDecision route_category_aware(std::span<const double> embedding, const CategoryPredictor& category_classifier,
                                     const CategoryRegressors& regressors, const PairPredictor* classifier,
                                     const RouterPolicy& policy) {
  const auto& label = category_classifier.labels().at(category_classifier.predict_category(embedding));
  const auto it = regressors.find(label);
  if (it == regressors.end() || !it->second) {
    throw RoutingError("no regressor configured for predicted category '" + label + "'");
  }
  auto decision = route(embedding, *it->second, classifier, policy);
  decision.category = label;
  return decision;
}

double expected_cost(std::span<const double> gaps, double tau, const CostModel& cost) {
  if (gaps.empty()) throw Error("expected_cost needs at least one gap");
  std::size_t below = 0;
  for (double g : gaps) below += g < tau;
  return cost.regressor + static_cast<double>(below) / static_cast<double>(gaps.size()) * cost.classifier;
}

AllPairsResult baseline_all_pairs(std::span<const double> embedding, const PairPredictor& classifier,
                                  std::size_t roster_size) {
  const auto pairs = jury::make_pairs(roster_size);
  AllPairsResult result{0, std::vector<std::size_t>(roster_size, 0), pairs.size()};
  for (const auto& p : pairs) {
    ++result.wins[learners::predict_better(classifier, embedding, p.i, p.j).winner];
  }
  for (std::size_t e = 1; e < roster_size; ++e) {
    if (result.wins[e] > result.wins[result.winner]) result.winner = e;
  }
  return result;
}

std::size_t baseline_top1(std::span<const double> embedding, const ScorePredictor& regressor) {
  return gap(regressor.predict_scores(embedding)).top1;
}

BundleRouter::BundleRouter(std::shared_ptr<const learners::ModelBundle> bundle, RouterPolicy policy)
    : bundle_(std::move(bundle)), policy_(policy) {
  if (!bundle_) throw ConfigError("router has no bundle");
  policy_.validate();
  bundle_->validate();
  if (policy_.mode != bundle_->mode) {
    throw ConfigError("policy mode '" + learners::to_string(policy_.mode) + "' does not match bundle mode '" +
                      learners::to_string(bundle_->mode) + "'");
  }
  if (policy_.mode == RoutingMode::per_category) {
    for (const auto& label : bundle_->category_classifier->labels()) {
      const auto it = bundle_->category_regressors.find(label);
      if (it == bundle_->category_regressors.end()) {
        throw ConfigError("category '" + label + "' has no regressor");
      }
      category_regressors_[label] = it->second;
    }
  }
}

RoutingDecision BundleRouter::route(std::span<const double> embedding) const {
  return route(embedding, policy_.tau);
}

RoutingDecision BundleRouter::route(std::span<const double> embedding, double tau) const {
  RouterPolicy policy = policy_;
  policy.tau = tau;
  if (policy.mode == RoutingMode::global) {
    return router::route(embedding, *bundle_->regressor, bundle_->pair_classifier.get(), policy);
  }
  return route_category_aware(embedding, *bundle_->category_classifier, category_regressors_,
                              bundle_->pair_classifier.get(), policy);
}

}  // namespace gaprouter::router
