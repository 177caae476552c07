#include "gaprouter/learners/ridge.hpp"

#include "gaprouter/common/error.hpp"

namespace gaprouter::learners {

Eigen::VectorXd RidgeModel::predict(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != weights.rows()) {
    throw DimensionError("ridge input has dim " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(weights.rows()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  return weights.transpose() * v + intercept;
}

RidgeModel train_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
  if (x.rows() == 0 || x.cols() == 0 || y.cols() == 0) throw TrainingError("ridge: empty design or target");
  if (x.rows() != y.rows()) throw TrainingError("ridge: X and Y row counts differ");
  if (!(lambda > 0.0)) throw TrainingError("ridge: lambda must be > 0");
  if (!x.allFinite() || !y.allFinite()) throw TrainingError("ridge: non-finite training data");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw TrainingError("ridge: factorization failed");

  RidgeModel model;
  model.weights = solver.solve(xc.transpose() * yc);
  model.intercept = (y_mean - x_mean * model.weights).transpose();
  if (!model.weights.allFinite() || !model.intercept.allFinite()) {
    throw TrainingError("ridge: solution is not finite");
  }
  return model;
}

void serialize(const RidgeModel& model, std::string& out) {
  append_f64le(out, static_cast<double>(model.weights.rows()));
  append_f64le(out, static_cast<double>(model.weights.cols()));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) append_f64le(out, model.weights(r, c));
  }
  for (Eigen::Index c = 0; c < model.intercept.size(); ++c) append_f64le(out, model.intercept(c));
}

RidgeModel deserialize_ridge(F64Reader& in) {
  const auto rows = in.next_count(1 << 24);
  const auto cols = in.next_count(1 << 16);
  if (rows * cols + cols > in.remaining()) throw BundleError("ridge payload truncated");
  RidgeModel model;
  model.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) model.weights(r, c) = in.next();
  }
  model.intercept.resize(static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < model.intercept.size(); ++c) model.intercept(c) = in.next();
  return model;
}

}  // namespace gaprouter::learners
