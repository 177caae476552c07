#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "gaprouter/jury/dataset.hpp"
#include "gaprouter/learners/models.hpp"

namespace gaprouter::learners {

Eigen::MatrixXd embedding_matrix(const std::vector<jury::LabeledExample>& examples);
Eigen::MatrixXd target_matrix(const std::vector<jury::LabeledExample>& examples);

RegressorModel train_regressor(const std::vector<jury::LabeledExample>& examples, const Roster& roster,
                               const TrainingConfig& config);

struct PairRow {
  std::size_t example;
  std::size_t a;
  std::size_t b;
};

struct PairDataset {
  Eigen::MatrixXd features;
  /// 1 when expert a scored strictly higher than expert b.
  std::vector<std::size_t> labels;
  std::vector<PairRow> rows;
};

/// Two mirrored rows per prompt and strictly ordered expert pair; tied pairs
/// are skipped.
PairDataset build_pair_dataset(const std::vector<jury::LabeledExample>& examples, std::size_t roster_size);

PairClassifierModel train_pair_classifier(const std::vector<jury::LabeledExample>& examples,
                                          const Roster& roster, const TrainingConfig& config);

CategoryClassifierModel train_category_classifier(const std::vector<jury::LabeledExample>& examples,
                                                  const std::vector<std::string>& labels,
                                                  const TrainingConfig& config);

struct RegressorMetrics {
  double avg_mse = 0.0;
  double top1 = 0.0;
  double top1or2 = 0.0;
  std::size_t count = 0;
};

/// Mean per-expert squared error, argmax agreement, and whether the true best
/// expert is among the two highest predictions. Roster order breaks ties.
RegressorMetrics evaluate_regressor(const ScorePredictor& model,
                                    const std::vector<jury::LabeledExample>& validation);

}  // namespace gaprouter::learners
