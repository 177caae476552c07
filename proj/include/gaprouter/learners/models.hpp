#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gaprouter/common/roster.hpp"
#include "gaprouter/learners/forest.hpp"
#include "gaprouter/learners/mlp.hpp"
#include "gaprouter/learners/ridge.hpp"
#include "gaprouter/learners/training_config.hpp"

namespace gaprouter::learners {

/// Predicts one quality score per roster expert from a prompt embedding.
class ScorePredictor {
 public:
  virtual ~ScorePredictor() = default;
  virtual std::vector<double> predict_scores(std::span<const double> embedding) const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual const Roster& roster() const = 0;
};

/// Raw probability that expert `a` beats expert `b` (roster indices) on the
/// prompt; callers symmetrize via predict_better().
class PairPredictor {
 public:
  virtual ~PairPredictor() = default;
  virtual double probability_beats(std::span<const double> embedding, std::size_t a, std::size_t b) const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual const Roster& roster() const = 0;
};

class CategoryPredictor {
 public:
  virtual ~CategoryPredictor() = default;
  virtual std::size_t predict_category(std::span<const double> embedding) const = 0;
  virtual const std::vector<std::string>& labels() const = 0;
  virtual std::size_t input_dim() const = 0;
};

class RegressorModel final : public ScorePredictor {
 public:
  using Params = std::variant<RidgeModel, RandomForest, Mlp>;

  RegressorModel(ModelKind kind, Roster roster, std::size_t dim, Params params);

  /// Throws DimensionError on dim mismatch. No renormalization is applied.
  std::vector<double> predict_scores(std::span<const double> embedding) const override;
  std::size_t input_dim() const override { return dim_; }
  const Roster& roster() const override { return roster_; }
  ModelKind kind() const { return kind_; }
  const Params& params() const { return params_; }

 private:
  ModelKind kind_;
  Roster roster_;
  std::size_t dim_;
  Params params_;
};

/// Input layout: embedding, one-hot(model_a), one-hot(model_b).
class PairClassifierModel final : public PairPredictor {
 public:
  using Params = std::variant<RandomForest, Mlp>;

  PairClassifierModel(ModelKind kind, Roster roster, std::size_t dim, Params params);

  double probability_beats(std::span<const double> embedding, std::size_t a, std::size_t b) const override;
  std::size_t input_dim() const override { return dim_; }
  const Roster& roster() const override { return roster_; }
  ModelKind kind() const { return kind_; }
  const Params& params() const { return params_; }

 private:
  ModelKind kind_;
  Roster roster_;
  std::size_t dim_;
  Params params_;
};

class CategoryClassifierModel final : public CategoryPredictor {
 public:
  using Params = std::variant<RandomForest, Mlp>;

  CategoryClassifierModel(ModelKind kind, std::vector<std::string> labels, std::size_t dim, Params params);

  std::size_t predict_category(std::span<const double> embedding) const override;
  const std::vector<std::string>& labels() const override { return labels_; }
  std::size_t input_dim() const override { return dim_; }
  ModelKind kind() const { return kind_; }
  const Params& params() const { return params_; }

 private:
  ModelKind kind_;
  std::vector<std::string> labels_;
  std::size_t dim_;
  Params params_;
};

/// embedding ++ one-hot(a) ++ one-hot(b)
std::vector<double> pair_features(std::span<const double> embedding, std::size_t a, std::size_t b,
                                  std::size_t roster_size);

struct PairChoice {
  std::size_t winner;
  std::size_t loser;
  /// Symmetrized probability that `winner` beats `loser` (>= 0.5).
  double probability;
};

/// Averages both orientations, p = (p(lo, hi) + 1 - p(hi, lo)) / 2 with
/// lo < hi in roster order, so (a, b) and (b, a) always agree. At exactly
/// 0.5 the earlier roster expert wins.
PairChoice predict_better(const PairPredictor& classifier, std::span<const double> embedding,
                          std::size_t a, std::size_t b);

}  // namespace gaprouter::learners
