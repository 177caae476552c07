#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gaprouter/common/binary.hpp"
#include "gaprouter/learners/training_config.hpp"

namespace gaprouter::learners {

enum class ForestTask { regress, classify };

struct TreeNode {
  /// -1 marks a leaf.
  std::int64_t feature = -1;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  /// Offset of this leaf's output vector in DecisionTree::leaf_values.
  std::size_t value_offset = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::vector<double> leaf_values;

  /// Output vector of the leaf `x` falls into (x[feature] <= threshold goes left).
  std::span<const double> leaf_for(std::span<const double> x, std::size_t n_outputs) const;
};

/// Bagged CART ensemble. Regression leaves hold the mean target vector;
/// classification leaves hold a one-hot majority vote, so averaging over
/// trees yields per-class vote fractions.
class RandomForest {
 public:
  ForestTask task() const { return task_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_outputs() const { return n_outputs_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  /// Regression: averaged leaf means. Classification: vote fractions.
  std::vector<double> predict(std::span<const double> x) const;
  /// Majority class, lowest index on ties. Classification only.
  std::size_t predict_class(std::span<const double> x) const;

  friend RandomForest fit_forest(const Eigen::MatrixXd&, const Eigen::MatrixXd&, ForestTask,
                                 const ForestConfig&);
  friend void serialize(const RandomForest&, std::string&);
  friend RandomForest deserialize_forest(F64Reader&);

 private:
  ForestTask task_ = ForestTask::regress;
  std::size_t n_features_ = 0;
  std::size_t n_outputs_ = 0;
  std::vector<DecisionTree> trees_;
};

/// Targets are n x outputs; for classification they must be one-hot rows.
RandomForest fit_forest(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets, ForestTask task,
                        const ForestConfig& config);

RandomForest train_forest_regressor(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                    const ForestConfig& config);
RandomForest train_forest_classifier(const Eigen::MatrixXd& x, std::span<const std::size_t> labels,
                                     std::size_t num_classes, const ForestConfig& config);

void serialize(const RandomForest& forest, std::string& out);
RandomForest deserialize_forest(F64Reader& in);

}  // namespace gaprouter::learners
