#include "gaprouter/learners/training_config.hpp"

#include <cmath>

#include "gaprouter/common/error.hpp"

namespace gaprouter::learners {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ridge: return "ridge";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind kind_from_string(const std::string& name) {
  if (name == "ridge") return ModelKind::ridge;
  if (name == "random_forest" || name == "rf") return ModelKind::random_forest;
  if (name == "mlp") return ModelKind::mlp;
  throw ConfigError("unknown model kind '" + name + "'");
}

void TrainingConfig::validate() const {
  if (!(ridge.lambda > 0.0) || !std::isfinite(ridge.lambda)) throw ConfigError("ridge.lambda must be > 0");
  if (rf.n_trees == 0) throw ConfigError("rf.n_trees must be > 0");
  if (rf.min_leaf == 0) throw ConfigError("rf.min_leaf must be > 0");
  if (mlp.hidden_sizes.empty()) throw ConfigError("mlp.hidden_sizes must name at least one layer");
  for (auto h : mlp.hidden_sizes) {
    if (h == 0) throw ConfigError("mlp.hidden_sizes entries must be > 0");
  }
  if (!(mlp.learning_rate > 0.0)) throw ConfigError("mlp.learning_rate must be > 0");
  if (mlp.batch_size == 0) throw ConfigError("mlp.batch_size must be > 0");
  if (pair_classifier == ModelKind::ridge || category_classifier == ModelKind::ridge) {
    throw ConfigError("classifiers must be random_forest or mlp");
  }
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"ridge", {{"lambda", c.ridge.lambda}}},
          {"rf",
           {{"n_trees", c.rf.n_trees},
            {"max_depth", c.rf.max_depth},
            {"min_leaf", c.rf.min_leaf},
            {"feature_subsample", c.rf.feature_subsample},
            {"bootstrap", c.rf.bootstrap},
            {"seed", c.rf.seed}}},
          {"mlp",
           {{"hidden_sizes", c.mlp.hidden_sizes},
            {"epochs", c.mlp.epochs},
            {"learning_rate", c.mlp.learning_rate},
            {"batch_size", c.mlp.batch_size},
            {"seed", c.mlp.seed}}},
          {"regressor", to_string(c.regressor)},
          {"pair_classifier", to_string(c.pair_classifier)},
          {"category_classifier", to_string(c.category_classifier)}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  if (j.contains("ridge")) c.ridge.lambda = j["ridge"].value("lambda", c.ridge.lambda);
  if (j.contains("rf")) {
    const auto& rf = j["rf"];
    c.rf.n_trees = rf.value("n_trees", c.rf.n_trees);
    c.rf.max_depth = rf.value("max_depth", c.rf.max_depth);
    c.rf.min_leaf = rf.value("min_leaf", c.rf.min_leaf);
    c.rf.feature_subsample = rf.value("feature_subsample", c.rf.feature_subsample);
    c.rf.bootstrap = rf.value("bootstrap", c.rf.bootstrap);
    c.rf.seed = rf.value("seed", c.rf.seed);
  }
  if (j.contains("mlp")) {
    const auto& m = j["mlp"];
    c.mlp.hidden_sizes = m.value("hidden_sizes", c.mlp.hidden_sizes);
    c.mlp.epochs = m.value("epochs", c.mlp.epochs);
    c.mlp.learning_rate = m.value("learning_rate", c.mlp.learning_rate);
    c.mlp.batch_size = m.value("batch_size", c.mlp.batch_size);
    c.mlp.seed = m.value("seed", c.mlp.seed);
  }
  if (j.contains("regressor")) c.regressor = kind_from_string(j["regressor"].get<std::string>());
  if (j.contains("pair_classifier")) c.pair_classifier = kind_from_string(j["pair_classifier"].get<std::string>());
  if (j.contains("category_classifier")) {
    c.category_classifier = kind_from_string(j["category_classifier"].get<std::string>());
  }
  c.validate();
  return c;
}

}  // namespace gaprouter::learners
