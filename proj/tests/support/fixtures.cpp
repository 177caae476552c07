#include "fixtures.hpp"

#include "gaprouter/common/error.hpp"
#include "mock_upstream.hpp"

namespace testing {

gaprouter::upstream::EmbeddingVector TableEmbedder::embed(std::string_view text) {
  if (fail) throw gaprouter::CollectionError("embedding endpoint down");
  const auto it = table.find(std::string(text));
  if (it != table.end()) return {it->second, "table"};
  return {hashed_vector(std::string(text), dim_), "table"};
}

std::shared_ptr<gaprouter::learners::ModelBundle> identity_bundle(const gaprouter::Roster& roster,
                                                                  std::optional<std::size_t> preferred) {
  using namespace gaprouter::learners;
  const auto m = roster.size();
  RidgeModel ridge{Eigen::MatrixXd::Identity(m, m), Eigen::VectorXd::Zero(m)};

  // One tanh unit: +3 when `preferred` is model_a, -3 when it is model_b.
  auto mlp = Mlp::initialize(3 * m, {1}, 1, MlpHead::binary, 1);
  std::vector<double> params(mlp.flat_parameters().size(), 0.0);
  if (preferred) {
    params[m + *preferred] = 3.0;
    params[2 * m + *preferred] = -3.0;
    params[3 * m + 1] = 6.0;  // output weight, after the hidden bias
  }
  mlp.set_flat_parameters(params);

  auto bundle = std::make_shared<ModelBundle>();
  bundle->mode = RoutingMode::global;
  bundle->roster = roster;
  bundle->embedding_dim = m;
  bundle->regressor = std::make_shared<const RegressorModel>(ModelKind::ridge, roster, m, ridge);
  bundle->pair_classifier = std::make_shared<const PairClassifierModel>(ModelKind::mlp, roster, m, mlp);
  return bundle;
}

}  // namespace testing
