#include "gaprouter/jury/scoring.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "gaprouter/common/error.hpp"

namespace gaprouter::jury {

double ScoreBoard::score_against(std::size_t winner, std::size_t other) const {
  if (winner < other) return pair_scores.at({winner, other});
  const auto key = std::pair(other, winner);
  return static_cast<double>(judges_counted.at(key)) - pair_scores.at(key);
}

std::size_t ScoreBoard::counted_total() const {
  std::size_t total = 0;
  for (const auto& [pair, n] : judges_counted) total += n;
  return total;
}

ScoreBoard aggregate(std::span<const PairJudgment> judgments, const Roster& roster,
                     const std::string& prompt_id) {
  const auto pairs = make_pairs(roster.size());
  ScoreBoard board;
  board.prompt_id = prompt_id;
  for (const auto& p : pairs) {
    board.pair_scores[{p.i, p.j}] = 0.0;
    board.judges_counted[{p.i, p.j}] = 0;
  }
  for (const auto& judgment : judgments) {
    if (judgment.prompt_id != prompt_id) {
      throw AggregationError("judgment for prompt '" + judgment.prompt_id +
                             "' passed while aggregating '" + prompt_id + "'");
    }
    if (!valid_verdict(judgment.a)) throw AggregationError("verdict outside {0, 0.5, 1}");
    const auto i = roster.index_of(judgment.model_i);
    const auto j = roster.index_of(judgment.model_j);
    if (i == j) throw AggregationError("judgment compares a model with itself");
    // Stored judgments are canonical, but accept a swapped pair by mirroring.
    const double credit_low = i < j ? judgment.a : 1.0 - judgment.a;
    const auto key = std::pair(std::min(i, j), std::max(i, j));
    board.pair_scores[key] += credit_low;
    board.judges_counted[key] += 1;
  }
  board.global_scores.assign(roster.size(), 0.0);
  for (const auto& p : pairs) {
    const auto n = board.judges_counted[{p.i, p.j}];
    if (n == 0) {
      throw AggregationError("prompt '" + prompt_id + "': pair (" + roster.id(p.i) + ", " +
                             roster.id(p.j) + ") has no judgments");
    }
    const double s = board.pair_scores[{p.i, p.j}];
    board.global_scores[p.i] += s;
    board.global_scores[p.j] += static_cast<double>(n) - s;
  }
  return board;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::size_t> rank_scores(std::span<const double> scores) {
  const auto order = order_by_score(scores);
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r + 1;
  return ranks;
}

std::vector<std::size_t> rank(const ScoreBoard& board) { return rank_scores(board.global_scores); }

std::vector<double> normalize_totals(std::span<const double> totals) {
  for (double s : totals) {
    if (s < 0.0) throw Error("cannot normalize negative scores");
  }
  const double sum = std::accumulate(totals.begin(), totals.end(), 0.0);
  std::vector<double> out(totals.size());
  if (sum == 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(totals.size()));
    return out;
  }
  for (std::size_t i = 0; i < totals.size(); ++i) out[i] = totals[i] / sum;
  return out;
}

NormalizedScores normalize(const ScoreBoard& board) {
  return {board.prompt_id, normalize_totals(board.global_scores)};
}

std::vector<std::pair<std::string, std::vector<PairJudgment>>> group_by_prompt(
    std::span<const PairJudgment> judgments) {
  std::vector<std::pair<std::string, std::vector<PairJudgment>>> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& j : judgments) {
    auto [it, inserted] = index.emplace(j.prompt_id, groups.size());
    if (inserted) groups.emplace_back(j.prompt_id, std::vector<PairJudgment>{});
    groups[it->second].second.push_back(j);
  }
  return groups;
}

}  // namespace gaprouter::jury
