#include "gaprouter/learners/training.hpp"

#include <algorithm>

#include "gaprouter/common/error.hpp"
#include "gaprouter/jury/scoring.hpp"

namespace gaprouter::learners {

Eigen::MatrixXd embedding_matrix(const std::vector<jury::LabeledExample>& examples) {
  if (examples.empty()) throw TrainingError("no training examples");
  const auto d = examples.front().embedding.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(examples.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].embedding.size() != d) throw DimensionError("inconsistent embedding dims in training set");
    for (std::size_t c = 0; c < d; ++c) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = examples[i].embedding[c];
    }
  }
  return x;
}

Eigen::MatrixXd target_matrix(const std::vector<jury::LabeledExample>& examples) {
  if (examples.empty()) throw TrainingError("no training examples");
  const auto m = examples.front().scores.size();
  Eigen::MatrixXd y(static_cast<Eigen::Index>(examples.size()), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].scores.size() != m) throw TrainingError("inconsistent score widths in training set");
    for (std::size_t c = 0; c < m; ++c) {
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = examples[i].scores[c];
    }
  }
  return y;
}

RegressorModel train_regressor(const std::vector<jury::LabeledExample>& examples, const Roster& roster,
                               const TrainingConfig& config) {
  const auto x = embedding_matrix(examples);
  const auto y = target_matrix(examples);
  if (static_cast<std::size_t>(y.cols()) != roster.size()) throw TrainingError("score width differs from roster");
  const auto dim = static_cast<std::size_t>(x.cols());
  switch (config.regressor) {
    case ModelKind::ridge:
      return RegressorModel(ModelKind::ridge, roster, dim, train_ridge(x, y, config.ridge.lambda));
    case ModelKind::random_forest:
      return RegressorModel(ModelKind::random_forest, roster, dim, train_forest_regressor(x, y, config.rf));
    case ModelKind::mlp:
      return RegressorModel(ModelKind::mlp, roster, dim, train_mlp(x, y, config.mlp, MlpHead::regression));
  }
  throw TrainingError("unknown regressor kind");
}

PairDataset build_pair_dataset(const std::vector<jury::LabeledExample>& examples, std::size_t roster_size) {
  if (roster_size < 2) throw TrainingError("pair dataset needs at least two experts");
  std::vector<PairRow> rows;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const auto& s = examples[e].scores;
    if (s.size() != roster_size) throw TrainingError("score width differs from roster");
    for (std::size_t i = 0; i + 1 < roster_size; ++i) {
      for (std::size_t j = i + 1; j < roster_size; ++j) {
        if (s[i] == s[j]) continue;
        rows.push_back({e, i, j});
        rows.push_back({e, j, i});
      }
    }
  }
  PairDataset out;
  out.rows = rows;
  if (rows.empty()) return out;
  const auto d = examples.front().embedding.size();
  out.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d + 2 * roster_size));
  out.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& ex = examples[rows[r].example];
    const auto f = pair_features(ex.embedding, rows[r].a, rows[r].b, roster_size);
    for (std::size_t c = 0; c < f.size(); ++c) {
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f[c];
    }
    out.labels[r] = ex.scores[rows[r].a] > ex.scores[rows[r].b] ? 1 : 0;
  }
  return out;
}

PairClassifierModel train_pair_classifier(const std::vector<jury::LabeledExample>& examples,
                                          const Roster& roster, const TrainingConfig& config) {
  const auto data = build_pair_dataset(examples, roster.size());
  if (data.rows.empty()) throw TrainingError("no strictly ordered expert pairs to train the pair classifier");
  const auto dim = examples.front().embedding.size();
  if (config.pair_classifier == ModelKind::random_forest) {
    return PairClassifierModel(ModelKind::random_forest, roster, dim,
                               train_forest_classifier(data.features, data.labels, 2, config.rf));
  }
  Eigen::MatrixXd y(static_cast<Eigen::Index>(data.labels.size()), 1);
  for (std::size_t r = 0; r < data.labels.size(); ++r) y(static_cast<Eigen::Index>(r), 0) = static_cast<double>(data.labels[r]);
  return PairClassifierModel(ModelKind::mlp, roster, dim, train_mlp(data.features, y, config.mlp, MlpHead::binary));
}

CategoryClassifierModel train_category_classifier(const std::vector<jury::LabeledExample>& examples,
                                                  const std::vector<std::string>& labels,
                                                  const TrainingConfig& config) {
  if (labels.size() < 2) throw TrainingError("category classifier needs at least two categories");
  const auto x = embedding_matrix(examples);
  std::vector<std::size_t> y(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto it = std::find(labels.begin(), labels.end(), examples[i].category);
    if (it == labels.end()) throw TrainingError("example '" + examples[i].prompt_id + "' has an unknown category");
    y[i] = static_cast<std::size_t>(it - labels.begin());
  }
  const auto dim = static_cast<std::size_t>(x.cols());
  if (config.category_classifier == ModelKind::mlp) {
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < y.size(); ++i) onehot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i])) = 1.0;
    return CategoryClassifierModel(ModelKind::mlp, labels, dim, train_mlp(x, onehot, config.mlp, MlpHead::multiclass));
  }
  return CategoryClassifierModel(ModelKind::random_forest, labels, dim,
                                 train_forest_classifier(x, y, labels.size(), config.rf));
}

RegressorMetrics evaluate_regressor(const ScorePredictor& model,
                                    const std::vector<jury::LabeledExample>& validation) {
  if (validation.empty()) throw Error("evaluate_regressor needs a non-empty validation set");
  RegressorMetrics metrics;
  double mse_sum = 0.0;
  std::size_t top1 = 0, top2 = 0;
  for (const auto& ex : validation) {
    const auto pred = model.predict_scores(ex.embedding);
    double se = 0.0;
    for (std::size_t e = 0; e < pred.size(); ++e) se += (pred[e] - ex.scores[e]) * (pred[e] - ex.scores[e]);
    mse_sum += se / static_cast<double>(pred.size());
    const auto truth = jury::best_expert(ex.scores);
    const auto order = jury::order_by_score(pred);
    top1 += order[0] == truth;
    top2 += order[0] == truth || (order.size() > 1 && order[1] == truth);
  }
  const auto n = static_cast<double>(validation.size());
  metrics.avg_mse = mse_sum / n;
  metrics.top1 = static_cast<double>(top1) / n;
  metrics.top1or2 = static_cast<double>(top2) / n;
  metrics.count = validation.size();
  return metrics;
}

}  // namespace gaprouter::learners
