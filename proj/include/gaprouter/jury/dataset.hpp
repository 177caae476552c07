#pragma once

#include <cstddef>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "gaprouter/common/roster.hpp"
#include "gaprouter/corpus/prompt_record.hpp"
#include "gaprouter/jury/scoring.hpp"

namespace gaprouter::jury {

/// Regression example: prompt embedding -> normalized per-expert scores in
/// roster order.
struct LabeledExample {
  std::string prompt_id;
  std::string category;
  std::vector<double> embedding;
  std::vector<double> scores;
  corpus::Split split = corpus::Split::unassigned;
};

nlohmann::json to_json(const LabeledExample& example, const Roster& roster);
/// The "scores" object must name exactly the roster's experts.
LabeledExample labeled_from_json(const nlohmann::json& row, const Roster& roster);

std::vector<LabeledExample> load_labels(const std::string& path, const Roster& roster);
void save_labels(const std::string& path, const std::vector<LabeledExample>& examples,
                 const Roster& roster);

struct LabelBuildResult {
  std::vector<LabeledExample> examples;
  /// One line per skipped prompt naming what was missing.
  std::vector<std::string> report;
};

/// Joins corpus prompts with their normalized scores and embeddings. Prompts
/// missing either are skipped and reported; embeddings must all have `dim`
/// entries.
LabelBuildResult build_labeled_dataset(const std::vector<corpus::PromptRecord>& corpus,
                                       const std::map<std::string, NormalizedScores>& scores,
                                       const std::map<std::string, std::vector<double>>& embeddings,
                                       std::size_t dim);

/// Index of the best expert by actual score, roster order on ties.
std::size_t best_expert(const std::vector<double>& scores);

}  // namespace gaprouter::jury
