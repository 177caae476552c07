#pragma once

#include <cstddef>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaprouter/jury/dataset.hpp"
#include "gaprouter/learners/training.hpp"
#include "gaprouter/router/router.hpp"

namespace gaprouter::eval {

using ScoreRows = std::span<const std::vector<double>>;

/// (0.5 * picks of the reference + picks of a strictly better expert) / total.
/// A pick whose actual score equals the reference's earns nothing.
double win_rate(std::span<const std::size_t> chosen, ScoreRows actual, std::size_t reference);
double win_rate(std::span<const router::RoutingDecision> decisions, ScoreRows actual, std::size_t reference);

/// Fraction of prompts whose candidate set ({top1}, or {top1, top2} after a
/// fallback) contains the actual best expert.
double coverage_accuracy(std::span<const router::RoutingDecision> decisions, ScoreRows actual);

/// Fraction of prompts whose chosen expert is the actual best.
double selection_accuracy(std::span<const router::RoutingDecision> decisions, ScoreRows actual);

struct SweepRow {
  double tau = 0.0;
  double coverage_acc = 0.0;
  double selection_acc = 0.0;
  double fallback_fraction = 0.0;
  double expected_cost = 0.0;
};

/// Inclusive grid lo, lo+step, ..., hi; values rounded to 1e-9 so that
/// 0.01:0.20:0.01 yields exactly twenty thresholds.
std::vector<double> tau_grid(double lo, double hi, double step);
/// Parses "lo:hi:step".
std::vector<double> parse_tau_grid(const std::string& spec);

/// Per-prompt routing state independent of tau: the regressor scores, the
/// top two, the gap, and the tie-breaker's pick.
struct PromptTrace {
  router::RoutingDecision confident;
  std::size_t classifier_choice;
  double classifier_probability;

  router::RoutingDecision at(double tau, router::Fallback fallback) const;
};

std::vector<PromptTrace> trace_prompts(const router::BundleRouter& router,
                                       const std::vector<jury::LabeledExample>& examples);

/// One row per tau (ascending, non-empty).
std::vector<SweepRow> sweep(const std::vector<PromptTrace>& traces, ScoreRows actual, std::span<const double> taus,
                            router::Fallback fallback = router::Fallback::classify_then_query_one,
                            const router::CostModel& cost = {});

struct Histogram {
  double lo = 0.0;
  double hi = 0.4;
  std::vector<std::size_t> counts;
};

struct GapStats {
  std::size_t count = 0;
  double mean_g12 = 0.0;
  std::optional<double> mean_g13;
  Histogram g12_histogram;
  std::optional<Histogram> g13_histogram;
};

/// g12 = top1 - top2 and g13 = top1 - top3 of each predicted score vector;
/// fixed-width bins over [lo, hi], values above hi land in the last bin.
GapStats gap_stats(ScoreRows predicted, std::size_t bins = 40, double lo = 0.0, double hi = 0.4);

struct BaselineStats {
  double top1_acc = 0.0;
  double top1or2_acc = 0.0;
  double all_pairs_acc = 0.0;
  std::size_t all_pairs_calls_per_prompt = 0;
};

struct EvalReport {
  double tau = 0.0;
  std::size_t prompts = 0;
  std::vector<SweepRow> rows;
  std::map<std::string, double> win_rates;
  learners::RegressorMetrics regressor;
  GapStats gaps;
  std::optional<BaselineStats> baselines;
  /// When the bundle carries a category classifier.
  std::optional<double> category_accuracy;
};

nlohmann::json to_json(const EvalReport& report);
/// Sweep rows as CSV with a header line.
std::string rows_to_csv(const std::vector<SweepRow>& rows);

struct EvalOptions {
  double tau = router::kDefaultTau;
  std::vector<double> taus;
  /// Empty means every roster expert.
  std::vector<std::string> references;
  bool baselines = true;
  std::size_t histogram_bins = 40;
  router::CostModel cost;
};

/// Full offline evaluation of a bundle on labeled examples.
EvalReport evaluate(const router::BundleRouter& router, const std::vector<jury::LabeledExample>& examples,
                    const EvalOptions& options);

}  // namespace gaprouter::eval
