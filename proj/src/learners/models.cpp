#include "gaprouter/learners/models.hpp"

#include "gaprouter/common/error.hpp"

namespace gaprouter::learners {
namespace {

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + " expects embedding dim " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

}  // namespace

RegressorModel::RegressorModel(ModelKind kind, Roster roster, std::size_t dim, Params params)
    : kind_(kind), roster_(std::move(roster)), dim_(dim), params_(std::move(params)) {}

std::vector<double> RegressorModel::predict_scores(std::span<const double> embedding) const {
  check_dim(embedding.size(), dim_, "regressor");
  std::vector<double> out = std::visit(
      [&](const auto& model) -> std::vector<double> {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, RidgeModel>) {
          const Eigen::VectorXd v = model.predict(embedding);
          return std::vector<double>(v.data(), v.data() + v.size());
        } else {
          return model.predict(embedding);
        }
      },
      params_);
  if (out.size() != roster_.size()) throw Error("regressor output width does not match roster");
  return out;
}

PairClassifierModel::PairClassifierModel(ModelKind kind, Roster roster, std::size_t dim, Params params)
    : kind_(kind), roster_(std::move(roster)), dim_(dim), params_(std::move(params)) {}

double PairClassifierModel::probability_beats(std::span<const double> embedding, std::size_t a,
                                              std::size_t b) const {
  check_dim(embedding.size(), dim_, "pair classifier");
  if (a >= roster_.size() || b >= roster_.size() || a == b) throw Error("pair classifier: invalid expert pair");
  const auto features = pair_features(embedding, a, b, roster_.size());
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, RandomForest>) {
          return model.predict(features).at(1);
        } else {
          return model.predict(features).at(0);
        }
      },
      params_);
}

CategoryClassifierModel::CategoryClassifierModel(ModelKind kind, std::vector<std::string> labels,
                                                 std::size_t dim, Params params)
    : kind_(kind), labels_(std::move(labels)), dim_(dim), params_(std::move(params)) {}

std::size_t CategoryClassifierModel::predict_category(std::span<const double> embedding) const {
  check_dim(embedding.size(), dim_, "category classifier");
  const auto scores = std::visit([&](const auto& model) { return model.predict(embedding); }, params_);
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  if (best >= labels_.size()) throw Error("category classifier output exceeds label set");
  return best;
}

std::vector<double> pair_features(std::span<const double> embedding, std::size_t a, std::size_t b,
                                  std::size_t roster_size) {
  std::vector<double> f(embedding.begin(), embedding.end());
  f.resize(embedding.size() + 2 * roster_size, 0.0);
  f[embedding.size() + a] = 1.0;
  f[embedding.size() + roster_size + b] = 1.0;
  return f;
}

PairChoice predict_better(const PairPredictor& classifier, std::span<const double> embedding,
                          std::size_t a, std::size_t b) {
  if (a == b) throw Error("predict_better needs two distinct experts");
  const auto lo = std::min(a, b);
  const auto hi = std::max(a, b);
  const double p_lo =
      (classifier.probability_beats(embedding, lo, hi) + 1.0 - classifier.probability_beats(embedding, hi, lo)) / 2.0;
  if (p_lo >= 0.5) return {lo, hi, p_lo};
  return {hi, lo, 1.0 - p_lo};
}

}  // namespace gaprouter::learners
