#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gaprouter/common/roster.hpp"
#include "gaprouter/jury/judgment.hpp"

namespace gaprouter::jury {

/// Summed judge credit for one prompt.
struct ScoreBoard {
  std::string prompt_id;
  /// (i, j) with i < j -> total credit earned by i against j.
  std::map<std::pair<std::size_t, std::size_t>, double> pair_scores;
  /// (i, j) -> number of non-missing judgments counted for the pair.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> judges_counted;
  /// Per-expert total in roster order.
  std::vector<double> global_scores;

  /// Credit earned by `winner` against `other`.
  double score_against(std::size_t winner, std::size_t other) const;
  std::size_t counted_total() const;
};

/// Sums verdicts per pair (the complement 1 - a goes to model_j) and per
/// expert. Every roster pair needs at least one judgment; otherwise throws
/// AggregationError naming the pair. Judgments for other prompts or unknown
/// experts are rejected.
ScoreBoard aggregate(std::span<const PairJudgment> judgments, const Roster& roster,
                     const std::string& prompt_id);

/// Rank 1 = highest total; equal totals keep roster order. ranks[e] is the
/// rank of expert e.
std::vector<std::size_t> rank(const ScoreBoard& board);
std::vector<std::size_t> rank_scores(std::span<const double> scores);

/// Expert indices ordered best first, stable on ties.
std::vector<std::size_t> order_by_score(std::span<const double> scores);

struct NormalizedScores {
  std::string prompt_id;
  std::vector<double> scores;
};

/// S_i / sum(S); uniform when every total is zero.
NormalizedScores normalize(const ScoreBoard& board);
std::vector<double> normalize_totals(std::span<const double> totals);

/// Groups a judgment log by prompt (order of first appearance).
std::vector<std::pair<std::string, std::vector<PairJudgment>>> group_by_prompt(
    std::span<const PairJudgment> judgments);

}  // namespace gaprouter::jury
