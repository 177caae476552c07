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

/// Output head: linear + squared error, sigmoid + binary cross-entropy, or
/// softmax + categorical cross-entropy.
enum class MlpHead { regression, binary, multiclass };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Feed-forward network with tanh hidden units. Inputs are standardized with
/// per-feature shift/scale captured at training time.
class Mlp {
 public:
  static Mlp initialize(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                        std::size_t output_dim, MlpHead head, std::uint64_t seed);

  MlpHead head() const { return head_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weights.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().weights.rows()); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Rows are samples. Returns head activations (raw values for regression,
  /// probabilities otherwise).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  std::vector<double> predict(std::span<const double> x) const;

  /// Mean loss over rows of (x, y); y is one-hot for multiclass and a single
  /// 0/1 column for binary.
  double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;
  /// Same loss, plus its gradient with respect to every layer parameter.
  double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                           std::vector<DenseLayer>& gradient) const;

  /// Parameters flattened layer by layer (weights row-major, then bias).
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> params);
  static std::vector<double> flatten(const std::vector<DenseLayer>& layers);

  void set_input_standardization(Eigen::VectorXd shift, Eigen::VectorXd scale);

  friend void serialize(const Mlp&, std::string&);
  friend Mlp deserialize_mlp(F64Reader&);

 private:
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd logits(const Eigen::MatrixXd& xs, std::vector<Eigen::MatrixXd>* activations) const;

  MlpHead head_ = MlpHead::regression;
  std::vector<DenseLayer> layers_;
  Eigen::VectorXd input_shift_;
  Eigen::VectorXd input_scale_;
};

/// Mini-batch training with Adam. Throws TrainingError naming the epoch if
/// the loss stops being finite.
Mlp train_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MlpConfig& config, MlpHead head);

void serialize(const Mlp& mlp, std::string& out);
Mlp deserialize_mlp(F64Reader& in);

}  // namespace gaprouter::learners
