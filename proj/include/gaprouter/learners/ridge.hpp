#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>

#include "gaprouter/common/binary.hpp"

namespace gaprouter::learners {

/// Multi-output ridge regression with an unpenalized intercept.
struct RidgeModel {
  Eigen::MatrixXd weights;    // d x M
  Eigen::VectorXd intercept;  // M

  Eigen::VectorXd predict(std::span<const double> x) const;
};

/// Solves (Xc'Xc + lambda I) W = Xc'Yc on column-centered data and sets the
/// intercept to mean(Y) - mean(X) W. Throws TrainingError on empty shapes,
/// non-positive lambda or non-finite inputs.
RidgeModel train_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda);

void serialize(const RidgeModel& model, std::string& out);
RidgeModel deserialize_ridge(F64Reader& in);

}  // namespace gaprouter::learners
