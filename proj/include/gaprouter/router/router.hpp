#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaprouter/learners/bundle.hpp"
#include "gaprouter/learners/models.hpp"

namespace gaprouter::router {

using learners::CategoryPredictor;
using learners::PairPredictor;
using learners::RoutingMode;
using learners::ScorePredictor;

enum class Fallback { classify_then_query_one, hedged_query_both };

std::string to_string(Fallback fallback);
Fallback fallback_from_string(const std::string& name);

inline constexpr double kDefaultTau = 0.10;

struct RouterPolicy {
  double tau = kDefaultTau;
  RoutingMode mode = RoutingMode::global;
  Fallback fallback = Fallback::classify_then_query_one;

  /// tau must be finite and non-negative.
  void validate() const;
};

struct GapResult {
  std::size_t top1;
  std::size_t top2;
  double gap;
};

/// Two highest predicted scores (roster order breaks ties) and their
/// difference. Throws Error for fewer than two scores.
GapResult gap(std::span<const double> scores);

struct RoutingDecision {
  std::size_t chosen = 0;
  std::vector<double> scores;
  std::size_t top1 = 0;
  std::size_t top2 = 0;
  double gap = 0.0;
  bool fallback_used = false;
  /// Symmetrized tie-breaker probability for `chosen`, when consulted.
  std::optional<double> classifier_probability;
  std::optional<std::string> category;
  int upstream_calls_planned = 1;

  /// Experts whose quality the decision effectively considered: {top1}, or
  /// {top1, top2} when the tie-breaker ran.
  bool candidate_set_contains(std::size_t expert) const {
    return expert == top1 || (fallback_used && expert == top2);
  }
};

nlohmann::json to_json(const RoutingDecision& decision, const Roster& roster);

/// Confident (gap >= tau): the top predicted expert. Otherwise the pair
/// classifier picks between the top two. Throws RoutingError when the
/// classifier is needed but absent.
RoutingDecision route(std::span<const double> embedding, const ScorePredictor& regressor,
                      const PairPredictor* classifier, const RouterPolicy& policy);

/// Same rule applied to a precomputed score vector.
RoutingDecision decide(std::span<const double> embedding, std::vector<double> scores,
                       const PairPredictor* classifier, const RouterPolicy& policy);

using CategoryRegressors = std::map<std::string, std::shared_ptr<const ScorePredictor>>;

/// Predicts the category, then routes with that category's regressor. The
/// decision records the category. Throws RoutingError if the predicted label
/// has no regressor.
RoutingDecision route_category_aware(std::span<const double> embedding, const CategoryPredictor& category_classifier,
                                     const CategoryRegressors& regressors, const PairPredictor* classifier,
                                     const RouterPolicy& policy);

struct CostModel {
  double regressor = 1.0;
  double classifier = 1.0;
};

/// C_R + (fraction of gaps below tau) * C_B.
double expected_cost(std::span<const double> gaps, double tau, const CostModel& cost = {});

struct AllPairsResult {
  std::size_t winner;
  std::vector<std::size_t> wins;
  std::size_t classifier_calls;
};

/// Round robin over every expert pair with the symmetrized classifier; most
/// wins takes it, roster order on ties.
AllPairsResult baseline_all_pairs(std::span<const double> embedding, const PairPredictor& classifier,
                                  std::size_t roster_size);

/// Argmax of the regressor alone.
std::size_t baseline_top1(std::span<const double> embedding, const ScorePredictor& regressor);

/// Routing over a loaded bundle. Construction checks that the bundle can
/// serve the policy (category mode needs a classifier and a regressor per
/// label) so misconfiguration fails before any request.
class BundleRouter {
 public:
  BundleRouter(std::shared_ptr<const learners::ModelBundle> bundle, RouterPolicy policy);

  RoutingDecision route(std::span<const double> embedding) const;
  /// Same decision with a different tau (used by sweeps).
  RoutingDecision route(std::span<const double> embedding, double tau) const;

  const learners::ModelBundle& bundle() const { return *bundle_; }
  const RouterPolicy& policy() const { return policy_; }
  const Roster& roster() const { return bundle_->roster; }

 private:
  std::shared_ptr<const learners::ModelBundle> bundle_;
  RouterPolicy policy_;
  CategoryRegressors category_regressors_;
};

}  // namespace gaprouter::router
