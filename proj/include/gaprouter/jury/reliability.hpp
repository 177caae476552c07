#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaprouter/common/roster.hpp"
#include "gaprouter/jury/judgment.hpp"

namespace gaprouter::jury {

enum class VerdictLabel { prefer_i = 0, tie = 1, prefer_j = 2 };

VerdictLabel label_of(double a);

/// Cohen's kappa with marginal-product chance agreement over the three
/// verdict classes. Needs at least two paired labels. When chance agreement
/// is 1 (both raters constant on the same class) the result is 1.
double cohen_kappa(std::span<const VerdictLabel> a, std::span<const VerdictLabel> b);

struct KappaMatrix {
  std::vector<std::string> judges;
  /// kappa[x][y]; nullopt where two judges share fewer than 2 items.
  std::vector<std::vector<std::optional<double>>> kappa;
  std::vector<std::vector<std::size_t>> shared_items;
  /// Mean over defined off-diagonal judge pairs (x < y).
  std::optional<double> mean_pairwise;
};

/// Pairs up verdicts of every two judges on the same (prompt, i, j) item.
KappaMatrix pairwise_kappa(std::span<const PairJudgment> judgments);

/// Fraction of prompts on which the judge's own verdicts alone rank
/// `own_model` first. Only prompts where this judge judged every roster pair
/// are eligible; throws Error if there are none.
double self_win_rate(std::span<const PairJudgment> judgments, const std::string& judge_id,
                     const std::string& own_model_id, const Roster& roster);

}  // namespace gaprouter::jury
