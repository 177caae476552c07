#include "gaprouter/jury/reliability.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <tuple>

#include "gaprouter/common/error.hpp"
#include "gaprouter/jury/scoring.hpp"

namespace gaprouter::jury {

VerdictLabel label_of(double a) {
  if (a == 1.0) return VerdictLabel::prefer_i;
  if (a == 0.5) return VerdictLabel::tie;
  if (a == 0.0) return VerdictLabel::prefer_j;
  throw Error("verdict outside {0, 0.5, 1}");
}

double cohen_kappa(std::span<const VerdictLabel> a, std::span<const VerdictLabel> b) {
  if (a.size() != b.size()) throw Error("kappa needs paired label sequences");
  if (a.size() < 2) throw Error("kappa needs at least two shared items");
  std::array<std::array<double, 3>, 3> table{};
  for (std::size_t k = 0; k < a.size(); ++k) {
    table[static_cast<int>(a[k])][static_cast<int>(b[k])] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double observed = 0.0;
  double chance = 0.0;
  for (int c = 0; c < 3; ++c) {
    observed += table[c][c];
    double row = 0.0, col = 0.0;
    for (int k = 0; k < 3; ++k) {
      row += table[c][k];
      col += table[k][c];
    }
    chance += (row / n) * (col / n);
  }
  observed /= n;
  if (chance == 1.0) {
    if (observed == 1.0) return 1.0;
    throw Error("kappa undefined: chance agreement is 1 but labels differ");
  }
  return (observed - chance) / (1.0 - chance);
}

KappaMatrix pairwise_kappa(std::span<const PairJudgment> judgments) {
  using Item = std::tuple<std::string, std::string, std::string>;
  std::map<std::string, std::map<Item, VerdictLabel>> by_judge;
  for (const auto& j : judgments) {
    const bool canonical = j.model_i < j.model_j;
    Item item = canonical ? Item{j.prompt_id, j.model_i, j.model_j} : Item{j.prompt_id, j.model_j, j.model_i};
    by_judge[j.judge_id][item] = label_of(canonical ? j.a : 1.0 - j.a);
  }

  KappaMatrix out;
  for (const auto& [judge, items] : by_judge) out.judges.push_back(judge);
  const auto n = out.judges.size();
  out.kappa.assign(n, std::vector<std::optional<double>>(n));
  out.shared_items.assign(n, std::vector<std::size_t>(n, 0));
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x; y < n; ++y) {
      const auto& ix = by_judge[out.judges[x]];
      const auto& iy = by_judge[out.judges[y]];
      std::vector<VerdictLabel> la, lb;
      for (const auto& [item, label] : ix) {
        const auto it = iy.find(item);
        if (it == iy.end()) continue;
        la.push_back(label);
        lb.push_back(it->second);
      }
      out.shared_items[x][y] = out.shared_items[y][x] = la.size();
      if (la.size() < 2) continue;
      const double k = cohen_kappa(la, lb);
      out.kappa[x][y] = out.kappa[y][x] = k;
      if (x != y) {
        sum += k;
        ++defined;
      }
    }
  }
  if (defined > 0) out.mean_pairwise = sum / static_cast<double>(defined);
  return out;
}

double self_win_rate(std::span<const PairJudgment> judgments, const std::string& judge_id,
                     const std::string& own_model_id, const Roster& roster) {
  const auto own = roster.index_of(own_model_id);
  const auto needed = roster.size() * (roster.size() - 1) / 2;
  std::vector<PairJudgment> mine;
  for (const auto& j : judgments) {
    if (j.judge_id == judge_id) mine.push_back(j);
  }
  std::size_t eligible = 0;
  std::size_t wins = 0;
  for (const auto& [prompt, group] : group_by_prompt(mine)) {
    if (group.size() < needed) continue;
    ScoreBoard board;
    try {
      board = aggregate(group, roster, prompt);
    } catch (const AggregationError&) {
      continue;
    }
    ++eligible;
    if (rank(board)[own] == 1) ++wins;
  }
  if (eligible == 0) {
    throw Error("judge '" + judge_id + "' has no prompt with a complete set of verdicts");
  }
  return static_cast<double>(wins) / static_cast<double>(eligible);
}

}  // namespace gaprouter::jury
