#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <future>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gaprouter/upstream/client.hpp"

namespace gaprouter::upstream {

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_tag;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

struct EmbeddingSettings {
  std::string model_tag = "text-embedding-ada-002";
  std::size_t dim = 1536;
  /// Content-addressed on-disk cache; empty disables it.
  std::string cache_dir;
  /// In-memory LRU entries; 0 disables it.
  std::size_t lru_capacity = 0;
};

/// Anything that turns prompt text into a feature vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) = 0;
  virtual std::size_t dim() const = 0;
};

/// Embedder backed by an OpenAI-compatible /embeddings endpoint, with an
/// optional disk cache and LRU. Concurrent requests for the same text share
/// one upstream call.
class EmbeddingClient final : public Embedder {
 public:
  EmbeddingClient(std::shared_ptr<const UpstreamClient> client, EmbeddingSettings settings);

  /// Throws DimensionError when the upstream vector length differs from the
  /// pinned dim, or CollectionError on transport failure.
  EmbeddingVector embed(std::string_view text) override;
  std::size_t dim() const override { return settings_.dim; }

  std::size_t upstream_calls() const { return upstream_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

  /// Path of the cache file for `text`.
  std::string cache_path(std::string_view text) const;

 private:
  std::string cache_key(std::string_view text) const;
  EmbeddingVector fetch(std::string_view text);
  bool lru_get(const std::string& key, EmbeddingVector& out);
  void lru_put(const std::string& key, const EmbeddingVector& value);

  std::shared_ptr<const UpstreamClient> client_;
  EmbeddingSettings settings_;
  std::atomic<std::size_t> upstream_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};

  std::mutex mutex_;
  std::unordered_map<std::string, std::shared_future<EmbeddingVector>> in_flight_;
  std::list<std::pair<std::string, EmbeddingVector>> lru_;
  std::unordered_map<std::string, std::list<std::pair<std::string, EmbeddingVector>>::iterator> lru_index_;
};

}  // namespace gaprouter::upstream
