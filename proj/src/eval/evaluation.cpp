#include "gaprouter/eval/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gaprouter/common/error.hpp"
#include "gaprouter/jury/scoring.hpp"

namespace gaprouter::eval {
namespace {

void require_same_size(std::size_t decisions, std::size_t actual) {
  if (decisions == 0) throw Error("evaluation needs at least one decision");
  if (decisions != actual) throw Error("decision count differs from actual score count");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double win_rate(std::span<const std::size_t> chosen, ScoreRows actual, std::size_t reference) {
  require_same_size(chosen.size(), actual.size());
  std::size_t n_reference = 0, n_better = 0;
  for (std::size_t p = 0; p < chosen.size(); ++p) {
    const auto& s = actual[p];
    if (reference >= s.size() || chosen[p] >= s.size()) throw Error("expert index outside score vector");
    if (chosen[p] == reference) {
      ++n_reference;
    } else if (s[chosen[p]] > s[reference]) {
      ++n_better;
    }
  }
  return (0.5 * static_cast<double>(n_reference) + static_cast<double>(n_better)) / static_cast<double>(chosen.size());
}

double win_rate(std::span<const router::RoutingDecision> decisions, ScoreRows actual, std::size_t reference) {
  std::vector<std::size_t> chosen;
  chosen.reserve(decisions.size());
  for (const auto& d : decisions) chosen.push_back(d.chosen);
  return win_rate(chosen, actual, reference);
}

double coverage_accuracy(std::span<const router::RoutingDecision> decisions, ScoreRows actual) {
  require_same_size(decisions.size(), actual.size());
  std::size_t hits = 0;
  for (std::size_t p = 0; p < decisions.size(); ++p) {
    hits += decisions[p].candidate_set_contains(jury::best_expert(actual[p]));
  }
  return static_cast<double>(hits) / static_cast<double>(decisions.size());
}

double selection_accuracy(std::span<const router::RoutingDecision> decisions, ScoreRows actual) {
  require_same_size(decisions.size(), actual.size());
  std::size_t hits = 0;
  for (std::size_t p = 0; p < decisions.size(); ++p) hits += decisions[p].chosen == jury::best_expert(actual[p]);
  return static_cast<double>(hits) / static_cast<double>(decisions.size());
}

std::vector<double> tau_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConfigError("tau grid needs lo <= hi and step > 0");
  }
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9);
  }
  return out;
}

std::vector<double> parse_tau_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad tau grid '" + spec + "' (expected lo:hi:step)");
    }
  }
  if (parts.size() != 3) throw ConfigError("bad tau grid '" + spec + "' (expected lo:hi:step)");
  return tau_grid(parts[0], parts[1], parts[2]);
}

router::RoutingDecision PromptTrace::at(double tau, router::Fallback fallback) const {
  router::RoutingDecision d = confident;
  if (d.gap >= tau) return d;
  d.fallback_used = true;
  d.chosen = classifier_choice;
  d.classifier_probability = classifier_probability;
  d.upstream_calls_planned = fallback == router::Fallback::hedged_query_both ? 2 : 1;
  return d;
}

std::vector<PromptTrace> trace_prompts(const router::BundleRouter& router,
                                       const std::vector<jury::LabeledExample>& examples) {
  std::vector<PromptTrace> traces;
  traces.reserve(examples.size());
  for (const auto& ex : examples) {
    auto confident = router.route(ex.embedding, 0.0);
    const auto choice = learners::predict_better(*router.bundle().pair_classifier, ex.embedding, confident.top1,
                                                 confident.top2);
    traces.push_back({std::move(confident), choice.winner, choice.probability});
  }
  return traces;
}

std::vector<SweepRow> sweep(const std::vector<PromptTrace>& traces, ScoreRows actual, std::span<const double> taus,
                            router::Fallback fallback, const router::CostModel& cost) {
  if (taus.empty()) throw Error("sweep needs at least one tau");
  if (!std::is_sorted(taus.begin(), taus.end())) throw Error("sweep taus must be ascending");
  require_same_size(traces.size(), actual.size());
  std::vector<double> gaps;
  gaps.reserve(traces.size());
  for (const auto& t : traces) gaps.push_back(t.confident.gap);

  std::vector<SweepRow> rows;
  std::vector<router::RoutingDecision> decisions(traces.size());
  for (double tau : taus) {
    std::size_t fallbacks = 0;
    for (std::size_t p = 0; p < traces.size(); ++p) {
      decisions[p] = traces[p].at(tau, fallback);
      fallbacks += decisions[p].fallback_used;
    }
    rows.push_back({tau, coverage_accuracy(decisions, actual), selection_accuracy(decisions, actual),
                    static_cast<double>(fallbacks) / static_cast<double>(traces.size()),
                    router::expected_cost(gaps, tau, cost)});
  }
  return rows;
}

GapStats gap_stats(ScoreRows predicted, std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) throw ConfigError("histogram needs bins > 0 and hi > lo");
  GapStats stats;
  stats.count = predicted.size();
  stats.g12_histogram = {lo, hi, std::vector<std::size_t>(bins, 0)};
  const bool has_third = !predicted.empty() &&
                         std::all_of(predicted.begin(), predicted.end(), [](const auto& s) { return s.size() >= 3; });
  if (has_third) stats.g13_histogram = Histogram{lo, hi, std::vector<std::size_t>(bins, 0)};
  auto bin_of = [&](double g) {
    const double width = (hi - lo) / static_cast<double>(bins);
    const auto k = static_cast<std::ptrdiff_t>(std::floor((g - lo) / width));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(bins) - 1));
  };
  double sum12 = 0.0, sum13 = 0.0;
  for (const auto& s : predicted) {
    const auto order = jury::order_by_score(s);
    const double g12 = s[order[0]] - s[order[1]];
    sum12 += g12;
    ++stats.g12_histogram.counts[bin_of(g12)];
    if (has_third) {
      const double g13 = s[order[0]] - s[order[2]];
      sum13 += g13;
      ++stats.g13_histogram->counts[bin_of(g13)];
    }
  }
  if (!predicted.empty()) {
    stats.mean_g12 = sum12 / static_cast<double>(predicted.size());
    if (has_third) stats.mean_g13 = sum13 / static_cast<double>(predicted.size());
  }
  return stats;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"tau", r.tau},
                    {"coverage_acc", r.coverage_acc},
                    {"selection_acc", r.selection_acc},
                    {"fallback_fraction", r.fallback_fraction},
                    {"expected_cost", r.expected_cost}});
  }
  auto hist = [](const Histogram& h) { return nlohmann::json{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}}; };
  nlohmann::json gaps = {{"count", report.gaps.count},
                         {"mean_g12", report.gaps.mean_g12},
                         {"g12_histogram", hist(report.gaps.g12_histogram)}};
  if (report.gaps.mean_g13) gaps["mean_g13"] = *report.gaps.mean_g13;
  if (report.gaps.g13_histogram) gaps["g13_histogram"] = hist(*report.gaps.g13_histogram);
  nlohmann::json j = {{"tau", report.tau},
                      {"prompts", report.prompts},
                      {"rows", rows},
                      {"win_rates", report.win_rates},
                      {"regressor",
                       {{"avg_mse", report.regressor.avg_mse},
                        {"top1", report.regressor.top1},
                        {"top1or2", report.regressor.top1or2}}},
                      {"gap_stats", gaps}};
  if (report.category_accuracy) j["category_accuracy"] = *report.category_accuracy;
  if (report.baselines) {
    j["baselines"] = {{"top1_acc", report.baselines->top1_acc},
                      {"top1or2_acc", report.baselines->top1or2_acc},
                      {"all_pairs_acc", report.baselines->all_pairs_acc},
                      {"all_pairs_calls_per_prompt", report.baselines->all_pairs_calls_per_prompt}};
  }
  return j;
}

std::string rows_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "tau,coverage_acc,selection_acc,fallback_fraction,expected_cost\n";
  for (const auto& r : rows) {
    out += format_double(r.tau) + "," + format_double(r.coverage_acc) + "," + format_double(r.selection_acc) + "," +
           format_double(r.fallback_fraction) + "," + format_double(r.expected_cost) + "\n";
  }
  return out;
}

EvalReport evaluate(const router::BundleRouter& router, const std::vector<jury::LabeledExample>& examples,
                    const EvalOptions& options) {
  if (examples.empty()) throw Error("evaluation set is empty");
  const auto& roster = router.roster();
  std::vector<std::vector<double>> actual;
  actual.reserve(examples.size());
  for (const auto& ex : examples) actual.push_back(ex.scores);

  const auto traces = trace_prompts(router, examples);
  const auto fallback = router.policy().fallback;
  std::vector<router::RoutingDecision> decisions;
  std::vector<std::vector<double>> predicted;
  for (const auto& t : traces) {
    decisions.push_back(t.at(options.tau, fallback));
    predicted.push_back(t.confident.scores);
  }

  EvalReport report;
  report.tau = options.tau;
  report.prompts = examples.size();
  std::vector<double> taus = options.taus;
  if (std::find(taus.begin(), taus.end(), options.tau) == taus.end()) taus.push_back(options.tau);
  std::sort(taus.begin(), taus.end());
  report.rows = sweep(traces, actual, taus, fallback, options.cost);

  std::vector<std::string> references = options.references;
  if (references.empty()) references = roster.ids();
  for (const auto& ref : references) report.win_rates[ref] = win_rate(decisions, actual, roster.index_of(ref));

  // Regressor metrics from the scores the router actually used (the
  // per-category regressor in category mode).
  double mse = 0.0;
  std::size_t top1 = 0, top2 = 0;
  for (std::size_t p = 0; p < examples.size(); ++p) {
    const auto& s = predicted[p];
    double se = 0.0;
    for (std::size_t e = 0; e < s.size(); ++e) se += (s[e] - actual[p][e]) * (s[e] - actual[p][e]);
    mse += se / static_cast<double>(s.size());
    const auto truth = jury::best_expert(actual[p]);
    top1 += traces[p].confident.top1 == truth;
    top2 += traces[p].confident.top1 == truth || traces[p].confident.top2 == truth;
  }
  const auto n = static_cast<double>(examples.size());
  report.regressor = {mse / n, static_cast<double>(top1) / n, static_cast<double>(top2) / n, examples.size()};
  report.gaps = gap_stats(predicted, options.histogram_bins);

  if (options.baselines) {
    BaselineStats b;
    b.top1_acc = report.regressor.top1;
    b.top1or2_acc = report.regressor.top1or2;
    std::size_t hits = 0;
    for (std::size_t p = 0; p < examples.size(); ++p) {
      const auto res = router::baseline_all_pairs(examples[p].embedding, *router.bundle().pair_classifier, roster.size());
      hits += res.winner == jury::best_expert(actual[p]);
      b.all_pairs_calls_per_prompt = res.classifier_calls;
    }
    b.all_pairs_acc = static_cast<double>(hits) / n;
    report.baselines = b;
  }
  if (const auto& cc = router.bundle().category_classifier) {
    std::size_t hits = 0;
    for (const auto& ex : examples) {
      hits += cc->labels().at(cc->predict_category(ex.embedding)) == ex.category;
    }
    report.category_accuracy = static_cast<double>(hits) / n;
  }
  return report;
}

}  // namespace gaprouter::eval
