#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gaprouter/common/random.hpp"
#include "gaprouter/jury/dataset.hpp"
#include "gaprouter/learners/bundle.hpp"
#include "gaprouter/learners/models.hpp"
#include "gaprouter/upstream/client.hpp"
#include "gaprouter/upstream/embedder.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "gaprouter-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline gaprouter::upstream::UpstreamSettings fast_settings(const std::string& base_url) {
  gaprouter::upstream::UpstreamSettings s;
  s.base_url = base_url;
  s.retry.base_delay = std::chrono::milliseconds(1);
  s.retry.max_delay = std::chrono::milliseconds(5);
  s.timeout = std::chrono::milliseconds(5000);
  return s;
}

/// Scores computed by a function of the embedding.
class StubRegressor final : public gaprouter::learners::ScorePredictor {
 public:
  using Fn = std::function<std::vector<double>(std::span<const double>)>;
  StubRegressor(gaprouter::Roster roster, std::size_t dim, Fn fn)
      : roster_(std::move(roster)), dim_(dim), fn_(std::move(fn)) {}
  std::vector<double> predict_scores(std::span<const double> e) const override { return fn_(e); }
  std::size_t input_dim() const override { return dim_; }
  const gaprouter::Roster& roster() const override { return roster_; }

 private:
  gaprouter::Roster roster_;
  std::size_t dim_;
  Fn fn_;
};

class StubPair final : public gaprouter::learners::PairPredictor {
 public:
  using Fn = std::function<double(std::span<const double>, std::size_t, std::size_t)>;
  StubPair(gaprouter::Roster roster, std::size_t dim, Fn fn)
      : roster_(std::move(roster)), dim_(dim), fn_(std::move(fn)) {}
  double probability_beats(std::span<const double> e, std::size_t a, std::size_t b) const override {
    ++calls;
    return fn_(e, a, b);
  }
  std::size_t input_dim() const override { return dim_; }
  const gaprouter::Roster& roster() const override { return roster_; }
  mutable std::size_t calls = 0;

 private:
  gaprouter::Roster roster_;
  std::size_t dim_;
  Fn fn_;
};

class StubCategory final : public gaprouter::learners::CategoryPredictor {
 public:
  using Fn = std::function<std::size_t(std::span<const double>)>;
  StubCategory(std::vector<std::string> labels, std::size_t dim, Fn fn)
      : labels_(std::move(labels)), dim_(dim), fn_(std::move(fn)) {}
  std::size_t predict_category(std::span<const double> e) const override { return fn_(e); }
  const std::vector<std::string>& labels() const override { return labels_; }
  std::size_t input_dim() const override { return dim_; }

 private:
  std::vector<std::string> labels_;
  std::size_t dim_;
  std::function<std::size_t(std::span<const double>)> fn_;
};

/// Embedder answering from a fixed table (falls back to a hashed vector).
class TableEmbedder final : public gaprouter::upstream::Embedder {
 public:
  explicit TableEmbedder(std::size_t dim) : dim_(dim) {}
  gaprouter::upstream::EmbeddingVector embed(std::string_view text) override;
  std::size_t dim() const override { return dim_; }
  std::map<std::string, std::vector<double>> table;
  bool fail = false;

 private:
  std::size_t dim_;
};

/// Global bundle whose ridge regressor is the identity (scores equal the
/// embedding, dim == roster size). The MLP pair classifier favours
/// `preferred` against anyone; without it every pair is a coin flip, so the
/// earlier roster expert wins.
std::shared_ptr<gaprouter::learners::ModelBundle> identity_bundle(const gaprouter::Roster& roster,
                                                                  std::optional<std::size_t> preferred = {});

/// Three category clusters in coordinates 2.., quality driven by the first
/// two coordinates: expert scores are proportional to 2 + (x0, -x0, x1, -x1),
/// so the best expert is whichever signed coordinate is largest.
struct SyntheticSpec {
  std::size_t n = 1200;
  std::size_t dim = 8;
  std::uint64_t seed = 5;
  double cluster_spread = 0.35;
};

inline std::vector<double> synthetic_scores(double x0, double x1) {
  std::vector<double> raw = {2.0 + x0, 2.0 - x0, 2.0 + x1, 2.0 - x1};
  double sum = 0.0;
  for (double r : raw) sum += r;
  for (double& r : raw) r /= sum;
  return raw;
}

inline const std::vector<std::string>& synthetic_categories() {
  static const std::vector<std::string> labels = {"mathematics", "coding", "summarization"};
  return labels;
}

inline gaprouter::Roster synthetic_roster() { return gaprouter::Roster({"alpha", "beta", "gamma", "delta"}); }

inline std::vector<gaprouter::jury::LabeledExample> synthetic_dataset(const SyntheticSpec& spec) {
  gaprouter::Rng rng(spec.seed);
  std::vector<gaprouter::jury::LabeledExample> out;
  for (std::size_t k = 0; k < spec.n; ++k) {
    gaprouter::jury::LabeledExample ex;
    ex.prompt_id = "s" + std::to_string(k);
    const auto c = static_cast<std::size_t>(rng.below(3));
    ex.category = synthetic_categories()[c];
    ex.embedding.resize(spec.dim);
    ex.embedding[0] = rng.uniform(-1.0, 1.0);
    ex.embedding[1] = rng.uniform(-1.0, 1.0);
    for (std::size_t d = 2; d < spec.dim; ++d) {
      const double center = (d - 2) % 3 == c ? 2.0 : 0.0;
      ex.embedding[d] = center + spec.cluster_spread * rng.normal();
    }
    ex.scores = synthetic_scores(ex.embedding[0], ex.embedding[1]);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace testing
