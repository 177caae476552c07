#include "gaprouter/learners/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/random.hpp"

namespace gaprouter::learners {
namespace {

struct Split {
  std::int64_t feature = -1;
  double threshold = 0.0;
  double score = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, ForestTask task,
              const ForestConfig& config, std::size_t features_per_split, Rng& rng)
      : x_(x), y_(y), task_(task), config_(config), features_per_split_(features_per_split), rng_(rng),
        outputs_(static_cast<std::size_t>(y.cols())) {}

  DecisionTree build(std::vector<std::size_t> samples) {
    tree_ = DecisionTree{};
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::vector<std::size_t>& samples, std::size_t depth) {
    const std::size_t node = tree_.nodes.size();
    tree_.nodes.emplace_back();

    const bool depth_ok = config_.max_depth == 0 || depth < config_.max_depth;
    Split best;
    if (depth_ok && samples.size() >= 2 * config_.min_leaf && !pure(samples)) best = find_split(samples);
    if (best.feature < 0) {
      make_leaf(node, samples);
      return node;
    }

    std::vector<std::size_t> left, right;
    for (auto s : samples) {
      (x_(static_cast<Eigen::Index>(s), best.feature) <= best.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    tree_.nodes[node].feature = best.feature;
    tree_.nodes[node].threshold = best.threshold;
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    tree_.nodes[node].left = l;
    tree_.nodes[node].right = r;
    return node;
  }

  bool pure(const std::vector<std::size_t>& samples) const {
    const auto first = static_cast<Eigen::Index>(samples.front());
    for (auto s : samples) {
      if ((y_.row(static_cast<Eigen::Index>(s)).array() != y_.row(first).array()).any()) return false;
    }
    return true;
  }

  void make_leaf(std::size_t node, const std::vector<std::size_t>& samples) {
    std::vector<double> mean(outputs_, 0.0);
    for (auto s : samples) {
      for (std::size_t k = 0; k < outputs_; ++k) {
        mean[k] += y_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
      }
    }
    for (auto& v : mean) v /= static_cast<double>(samples.size());
    if (task_ == ForestTask::classify) {
      const auto winner = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
      std::fill(mean.begin(), mean.end(), 0.0);
      mean[winner] = 1.0;
    }
    tree_.nodes[node].feature = -1;
    tree_.nodes[node].value_offset = tree_.leaf_values.size();
    tree_.leaf_values.insert(tree_.leaf_values.end(), mean.begin(), mean.end());
  }

  // Maximizes sum_k (L_k^2 / n_L + R_k^2 / n_R), which minimizes the summed
  // squared error for regression and the weighted Gini impurity for one-hot
  // classification targets.
  Split find_split(const std::vector<std::size_t>& samples) {
    const auto d = static_cast<std::size_t>(x_.cols());
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), std::size_t{0});
    const auto k = std::min(features_per_split_, d);
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_.below(d - i));
      std::swap(features[i], features[j]);
    }

    std::vector<double> total(outputs_, 0.0);
    for (auto s : samples) {
      for (std::size_t o = 0; o < outputs_; ++o) total[o] += y_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(o));
    }

    Split best;
    std::vector<std::size_t> order(samples);
    std::vector<double> left_sum(outputs_);
    const std::size_t n = samples.size();
    for (std::size_t fi = 0; fi < k; ++fi) {
      const auto f = static_cast<Eigen::Index>(features[fi]);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = x_(static_cast<Eigen::Index>(a), f);
        const double xb = x_(static_cast<Eigen::Index>(b), f);
        return xa < xb || (xa == xb && a < b);
      });
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto row = static_cast<Eigen::Index>(order[i]);
        for (std::size_t o = 0; o < outputs_; ++o) left_sum[o] += y_(row, static_cast<Eigen::Index>(o));
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < config_.min_leaf || n_right < config_.min_leaf) continue;
        const double here = x_(row, f);
        const double next = x_(static_cast<Eigen::Index>(order[i + 1]), f);
        if (!(here < next)) continue;
        double score = 0.0;
        for (std::size_t o = 0; o < outputs_; ++o) {
          const double r = total[o] - left_sum[o];
          score += left_sum[o] * left_sum[o] / static_cast<double>(n_left) +
                   r * r / static_cast<double>(n_right);
        }
        if (score > best.score) {
          double threshold = here + (next - here) / 2.0;
          if (!(threshold < next)) threshold = here;
          best = {f, threshold, score};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::MatrixXd& y_;
  ForestTask task_;
  const ForestConfig& config_;
  std::size_t features_per_split_;
  Rng& rng_;
  std::size_t outputs_;
  DecisionTree tree_;
};

}  // namespace

std::span<const double> DecisionTree::leaf_for(std::span<const double> x, std::size_t n_outputs) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return std::span<const double>(leaf_values).subspan(nodes[node].value_offset, n_outputs);
}

std::vector<double> RandomForest::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw DimensionError("forest input has dim " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(n_features_));
  }
  std::vector<double> out(n_outputs_, 0.0);
  for (const auto& tree : trees_) {
    const auto leaf = tree.leaf_for(x, n_outputs_);
    for (std::size_t k = 0; k < n_outputs_; ++k) out[k] += leaf[k];
  }
  for (auto& v : out) v /= static_cast<double>(trees_.size());
  return out;
}

std::size_t RandomForest::predict_class(std::span<const double> x) const {
  if (task_ != ForestTask::classify) throw Error("predict_class on a regression forest");
  const auto votes = predict(x);
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

RandomForest fit_forest(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets, ForestTask task,
                        const ForestConfig& config) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 2) throw TrainingError("random forest needs at least 2 samples");
  if (n < config.min_leaf) throw TrainingError("fewer samples than rf.min_leaf");
  if (targets.rows() != x.rows() || targets.cols() == 0 || x.cols() == 0) {
    throw TrainingError("random forest: shape mismatch");
  }
  if (config.n_trees == 0 || config.min_leaf == 0) throw TrainingError("random forest: invalid config");
  if (!x.allFinite() || !targets.allFinite()) throw TrainingError("random forest: non-finite training data");

  const auto d = static_cast<std::size_t>(x.cols());
  const std::size_t per_split =
      config.feature_subsample > 0
          ? std::min(config.feature_subsample, d)
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));

  RandomForest forest;
  forest.task_ = task;
  forest.n_features_ = d;
  forest.n_outputs_ = static_cast<std::size_t>(targets.cols());
  forest.trees_.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng(splitmix64(config.seed * 0x9e3779b97f4a7c15ULL + t));
    std::vector<std::size_t> samples(n);
    if (config.bootstrap) {
      for (auto& s : samples) s = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    TreeBuilder builder(x, targets, task, config, per_split, rng);
    forest.trees_.push_back(builder.build(std::move(samples)));
  }
  return forest;
}

RandomForest train_forest_regressor(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                    const ForestConfig& config) {
  return fit_forest(x, y, ForestTask::regress, config);
}

RandomForest train_forest_classifier(const Eigen::MatrixXd& x, std::span<const std::size_t> labels,
                                     std::size_t num_classes, const ForestConfig& config) {
  if (labels.size() != static_cast<std::size_t>(x.rows())) throw TrainingError("label count mismatch");
  if (num_classes < 2) throw TrainingError("classification needs at least 2 classes");
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw TrainingError("class label out of range");
    onehot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  return fit_forest(x, onehot, ForestTask::classify, config);
}

void serialize(const RandomForest& forest, std::string& out) {
  append_f64le(out, forest.task_ == ForestTask::regress ? 0.0 : 1.0);
  append_f64le(out, static_cast<double>(forest.n_features_));
  append_f64le(out, static_cast<double>(forest.n_outputs_));
  append_f64le(out, static_cast<double>(forest.trees_.size()));
  for (const auto& tree : forest.trees_) {
    append_f64le(out, static_cast<double>(tree.nodes.size()));
    append_f64le(out, static_cast<double>(tree.leaf_values.size()));
    for (const auto& node : tree.nodes) {
      append_f64le(out, static_cast<double>(node.feature));
      append_f64le(out, node.threshold);
      append_f64le(out, static_cast<double>(node.left));
      append_f64le(out, static_cast<double>(node.right));
      append_f64le(out, static_cast<double>(node.value_offset));
    }
    append_f64le(out, tree.leaf_values);
  }
}

RandomForest deserialize_forest(F64Reader& in) {
  RandomForest forest;
  const auto task = in.next_count(1);
  forest.task_ = task == 0 ? ForestTask::regress : ForestTask::classify;
  forest.n_features_ = in.next_count(1 << 24);
  forest.n_outputs_ = in.next_count(1 << 16);
  const auto n_trees = in.next_count(1 << 20);
  if (forest.n_features_ == 0 || forest.n_outputs_ == 0 || n_trees == 0) throw BundleError("empty forest");
  for (std::size_t t = 0; t < n_trees; ++t) {
    DecisionTree tree;
    const auto n_nodes = in.next_count(1 << 26);
    const auto n_values = in.next_count(1 << 28);
    if (n_nodes == 0 || n_nodes * 5 + n_values > in.remaining()) throw BundleError("forest payload truncated");
    tree.nodes.resize(n_nodes);
    for (std::size_t idx = 0; idx < n_nodes; ++idx) {
      auto& node = tree.nodes[idx];
      const double feature = in.next();
      if (feature != -1.0 && !(feature >= 0.0 && feature < static_cast<double>(forest.n_features_))) {
        throw BundleError("forest node references an invalid feature");
      }
      node.feature = static_cast<std::int64_t>(feature);
      node.threshold = in.next();
      node.left = in.next_count(n_nodes - 1);
      node.right = in.next_count(n_nodes - 1);
      node.value_offset = in.next_count(n_values);
      if (node.feature < 0 && node.value_offset + forest.n_outputs_ > n_values) {
        throw BundleError("forest leaf points outside its value table");
      }
      // Nodes are stored in preorder, so children always follow their parent.
      if (node.feature >= 0 && (node.left <= idx || node.right <= idx)) {
        throw BundleError("forest node links backwards");
      }
    }
    tree.leaf_values = in.next_vector(n_values);
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace gaprouter::learners
