#include "gaprouter/learners/mlp.hpp"

#include <cmath>
#include <numeric>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/random.hpp"

namespace gaprouter::learners {
namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Eigen::MatrixXd apply_head(MlpHead head, const Eigen::MatrixXd& z) {
  switch (head) {
    case MlpHead::regression:
      return z;
    case MlpHead::binary:
      return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    case MlpHead::multiclass: {
      Eigen::MatrixXd p(z.rows(), z.cols());
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        const Eigen::RowVectorXd e = (z.row(r).array() - m).exp().matrix();
        p.row(r) = e / e.sum();
      }
      return p;
    }
  }
  return z;
}

double head_loss(MlpHead head, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y) {
  const double n = static_cast<double>(z.rows());
  double total = 0.0;
  switch (head) {
    case MlpHead::regression:
      total = 0.5 * (z - y).squaredNorm();
      break;
    case MlpHead::binary:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) total += softplus(z(r, c)) - y(r, c) * z(r, c);
      }
      break;
    case MlpHead::multiclass:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        const double lse = m + std::log((z.row(r).array() - m).exp().sum());
        total += lse * y.row(r).sum() - y.row(r).dot(z.row(r));
      }
      break;
  }
  return total / n;
}

}  // namespace

Mlp Mlp::initialize(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                    std::size_t output_dim, MlpHead head, std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0) throw TrainingError("mlp: zero input or output width");
  Mlp mlp;
  mlp.head_ = head;
  Rng rng(seed);
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(output_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    mlp.layers_.push_back(std::move(layer));
  }
  mlp.input_shift_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_dim));
  mlp.input_scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(input_dim));
  return mlp;
}

void Mlp::set_input_standardization(Eigen::VectorXd shift, Eigen::VectorXd scale) {
  if (shift.size() != static_cast<Eigen::Index>(input_dim()) || scale.size() != shift.size()) {
    throw TrainingError("mlp: standardization size mismatch");
  }
  input_shift_ = std::move(shift);
  input_scale_ = std::move(scale);
}

Eigen::MatrixXd Mlp::standardize(const Eigen::MatrixXd& x) const {
  if (x.cols() != static_cast<Eigen::Index>(input_dim())) {
    throw DimensionError("mlp input has dim " + std::to_string(x.cols()) + ", model expects " +
                         std::to_string(input_dim()));
  }
  return ((x.rowwise() - input_shift_.transpose()).array().rowwise() / input_scale_.transpose().array())
      .matrix();
}

Eigen::MatrixXd Mlp::logits(const Eigen::MatrixXd& xs, std::vector<Eigen::MatrixXd>* activations) const {
  Eigen::MatrixXd a = xs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (activations) activations->push_back(a);
    Eigen::MatrixXd z = a * layers_[l].weights.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    if (l + 1 == layers_.size()) return z;
    a = z.array().tanh().matrix();
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  return apply_head(head_, logits(standardize(x), nullptr));
}

std::vector<double> Mlp::predict(std::span<const double> x) const {
  const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd out = forward(Eigen::MatrixXd(row));
  return std::vector<double>(out.data(), out.data() + out.size());
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
  return head_loss(head_, logits(standardize(x), nullptr), y);
}

double Mlp::loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              std::vector<DenseLayer>& gradient) const {
  std::vector<Eigen::MatrixXd> inputs;
  const Eigen::MatrixXd z = logits(standardize(x), &inputs);
  if (y.rows() != z.rows() || y.cols() != z.cols()) throw TrainingError("mlp: target shape mismatch");
  const double n = static_cast<double>(x.rows());

  // For all three heads d(loss)/d(logits) = (activation - target) / n.
  Eigen::MatrixXd delta = (apply_head(head_, z) - y) / n;
  gradient.resize(layers_.size());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    gradient[l].weights = delta.transpose() * inputs[l];
    gradient[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    const Eigen::MatrixXd upstream = delta * layers_[l].weights;
    delta = (upstream.array() * (1.0 - inputs[l].array().square())).matrix();
  }
  return head_loss(head_, z, y);
}

std::vector<double> Mlp::flatten(const std::vector<DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) out.push_back(layer.weights(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.push_back(layer.bias(r));
  }
  return out;
}

std::vector<double> Mlp::flat_parameters() const { return flatten(layers_); }

void Mlp::set_flat_parameters(std::span<const double> params) {
  std::size_t pos = 0;
  for (auto& layer : layers_) {
    const auto need = static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    if (pos + need > params.size()) throw Error("mlp: parameter vector too short");
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = params[pos++];
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = params[pos++];
  }
  if (pos != params.size()) throw Error("mlp: parameter vector too long");
}

Mlp train_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MlpConfig& config, MlpHead head) {
  if (x.rows() == 0 || x.rows() != y.rows()) throw TrainingError("mlp: empty or mismatched training data");
  if (!x.allFinite() || !y.allFinite()) throw TrainingError("mlp: non-finite training data");
  if (config.batch_size == 0 || !(config.learning_rate > 0.0)) throw TrainingError("mlp: invalid config");

  auto mlp = Mlp::initialize(static_cast<std::size_t>(x.cols()), config.hidden_sizes,
                             static_cast<std::size_t>(y.cols()), head, config.seed);
  Eigen::VectorXd shift = x.colwise().mean().transpose();
  Eigen::VectorXd scale = ((x.rowwise() - shift.transpose()).array().square().colwise().mean().sqrt())
                              .matrix()
                              .transpose();
  for (Eigen::Index c = 0; c < scale.size(); ++c) {
    if (!(scale(c) > 1e-12)) scale(c) = 1.0;
  }
  mlp.set_input_standardization(shift, scale);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto params = mlp.flat_parameters();
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed ^ 0xa5a5a5a5ULL);
  std::size_t step = 0;
  std::vector<DenseLayer> grads;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd bx(rows, x.cols()), by(rows, y.cols());
      for (Eigen::Index r = 0; r < rows; ++r) {
        bx.row(r) = x.row(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(r)]));
        by.row(r) = y.row(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(r)]));
      }
      const double batch_loss = mlp.loss_and_gradient(bx, by, grads);
      epoch_loss += batch_loss * static_cast<double>(rows);
      const auto g = Mlp::flatten(grads);
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
        params[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
      }
      mlp.set_flat_parameters(params);
    }
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("mlp training diverged at epoch " + std::to_string(epoch + 1));
    }
  }
  return mlp;
}

void serialize(const Mlp& mlp, std::string& out) {
  append_f64le(out, static_cast<double>(static_cast<int>(mlp.head_)));
  append_f64le(out, static_cast<double>(mlp.layers_.size()));
  for (const auto& layer : mlp.layers_) {
    append_f64le(out, static_cast<double>(layer.weights.rows()));
    append_f64le(out, static_cast<double>(layer.weights.cols()));
  }
  append_f64le(out, std::span<const double>(mlp.input_shift_.data(), static_cast<std::size_t>(mlp.input_shift_.size())));
  append_f64le(out, std::span<const double>(mlp.input_scale_.data(), static_cast<std::size_t>(mlp.input_scale_.size())));
  append_f64le(out, mlp.flat_parameters());
}

Mlp deserialize_mlp(F64Reader& in) {
  Mlp mlp;
  const auto head = in.next_count(2);
  mlp.head_ = static_cast<MlpHead>(head);
  const auto n_layers = in.next_count(64);
  if (n_layers == 0) throw BundleError("mlp without layers");
  std::size_t prev_out = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto rows = in.next_count(1 << 20);
    const auto cols = in.next_count(1 << 24);
    if (rows == 0 || cols == 0 || (l > 0 && cols != prev_out)) throw BundleError("mlp layer shapes are inconsistent");
    prev_out = rows;
    mlp.layers_.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
                           Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows))});
  }
  const auto dim = static_cast<std::size_t>(mlp.layers_.front().weights.cols());
  const auto shift = in.next_vector(dim);
  const auto scale = in.next_vector(dim);
  mlp.input_shift_ = Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(dim));
  mlp.input_scale_ = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(dim));
  std::size_t count = 0;
  for (const auto& layer : mlp.layers_) count += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  mlp.set_flat_parameters(in.next_vector(count));
  return mlp;
}

}  // namespace gaprouter::learners
