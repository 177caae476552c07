#include "gaprouter/upstream/embedder.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gaprouter/common/binary.hpp"
#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/jsonl.hpp"

namespace gaprouter::upstream {

EmbeddingClient::EmbeddingClient(std::shared_ptr<const UpstreamClient> client,
                                 EmbeddingSettings settings)
    : client_(std::move(client)), settings_(std::move(settings)) {
  if (settings_.dim == 0) throw ConfigError("embedding.dim must be positive");
  if (!settings_.cache_dir.empty()) std::filesystem::create_directories(settings_.cache_dir);
}

std::string EmbeddingClient::cache_key(std::string_view text) const {
  std::string material = settings_.model_tag;
  material.push_back('\0');
  material.append(text);
  return sha256_hex(material);
}

std::string EmbeddingClient::cache_path(std::string_view text) const {
  return (std::filesystem::path(settings_.cache_dir) / (cache_key(text) + ".f64")).string();
}

bool EmbeddingClient::lru_get(const std::string& key, EmbeddingVector& out) {
  if (settings_.lru_capacity == 0) return false;
  const auto it = lru_index_.find(key);
  if (it == lru_index_.end()) return false;
  lru_.splice(lru_.begin(), lru_, it->second);
  out = it->second->second;
  return true;
}

void EmbeddingClient::lru_put(const std::string& key, const EmbeddingVector& value) {
  if (settings_.lru_capacity == 0 || lru_index_.count(key)) return;
  lru_.emplace_front(key, value);
  lru_index_[key] = lru_.begin();
  while (lru_.size() > settings_.lru_capacity) {
    lru_index_.erase(lru_.back().first);
    lru_.pop_back();
  }
}

EmbeddingVector EmbeddingClient::fetch(std::string_view text) {
  if (!settings_.cache_dir.empty()) {
    const auto path = cache_path(text);
    std::ifstream probe(path, std::ios::binary);
    if (probe) {
      probe.close();
      const std::string bytes = read_file(path);
      F64Reader reader(bytes);
      if (reader.remaining() == settings_.dim) {
        ++cache_hits_;
        return {reader.next_vector(settings_.dim), settings_.model_tag};
      }
    }
  }

  ++upstream_calls_;
  const nlohmann::json body = {{"model", settings_.model_tag}, {"input", std::string(text)}};
  const auto reply = client_->post_json(client_->settings().base_url, "/embeddings", body);
  if (reply.status < 200 || reply.status >= 300) {
    throw CollectionError("embedding endpoint returned HTTP " + std::to_string(reply.status));
  }
  const auto doc = nlohmann::json::parse(reply.body, nullptr, false);
  EmbeddingVector vec{{}, settings_.model_tag};
  try {
    for (const auto& v : doc.at("data").at(0).at("embedding")) vec.values.push_back(v.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw CollectionError(std::string("malformed embedding response: ") + e.what());
  }
  if (vec.dim() != settings_.dim) {
    throw DimensionError("embedding dim " + std::to_string(vec.dim()) +
                         " does not match pinned dim " + std::to_string(settings_.dim));
  }
  for (double v : vec.values) {
    if (!std::isfinite(v)) throw CollectionError("embedding contains non-finite values");
  }

  if (!settings_.cache_dir.empty()) {
    std::string bytes;
    append_f64le(bytes, vec.values);
    write_file_atomic(cache_path(text), bytes);
  }
  return vec;
}

EmbeddingVector EmbeddingClient::embed(std::string_view text) {
  if (text.empty()) throw Error("cannot embed empty text");
  const auto key = cache_key(text);

  std::promise<EmbeddingVector> promise;
  std::shared_future<EmbeddingVector> pending;
  {
    std::lock_guard lock(mutex_);
    EmbeddingVector hit;
    if (lru_get(key, hit)) {
      ++cache_hits_;
      return hit;
    }
    const auto it = in_flight_.find(key);
    if (it != in_flight_.end()) {
      pending = it->second;
    } else {
      in_flight_.emplace(key, promise.get_future().share());
    }
  }
  if (pending.valid()) return pending.get();

  try {
    auto vec = fetch(text);
    std::lock_guard lock(mutex_);
    lru_put(key, vec);
    in_flight_.erase(key);
    promise.set_value(vec);
    return vec;
  } catch (...) {
    std::lock_guard lock(mutex_);
    in_flight_.erase(key);
    promise.set_exception(std::current_exception());
    throw;
  }
}

}  // namespace gaprouter::upstream
