#pragma once

#include <cstddef>
#include <istream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace gaprouter::corpus {

enum class Split { unassigned, train, validation };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

/// The configured, extensible set of task categories. Names are stored
/// lower-cased; lookups are case-insensitive.
class CategorySet {
 public:
  explicit CategorySet(std::vector<std::string> labels);

  /// mathematics, coding, reasoning_knowledge, summarization, creative_writing
  static CategorySet defaults();

  bool contains(std::string_view name) const;
  /// Returns the canonical spelling or throws ConfigError.
  std::string canonical(std::string_view name) const;
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t index_of(std::string_view name) const;
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
};

std::string normalize_label(std::string_view name);

struct PromptRecord {
  std::string id;
  std::string text;
  std::string category;
  std::string source;
  Split split = Split::unassigned;

  bool operator==(const PromptRecord&) const = default;
};

nlohmann::json to_json(const PromptRecord& record);
PromptRecord record_from_json(const nlohmann::json& row);

std::vector<PromptRecord> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<PromptRecord>& records);

/// Issues sequential ids ("p000001", ...) that never collide with ids it has
/// been told about.
class IdAllocator {
 public:
  explicit IdAllocator(std::string prefix = "p") : prefix_(std::move(prefix)) {}
  void reserve(const std::vector<PromptRecord>& existing);
  std::string next();

 private:
  std::string prefix_;
  std::size_t counter_ = 0;
  std::unordered_set<std::string> taken_;
};

struct IngestResult {
  std::vector<PromptRecord> records;
  std::size_t skipped = 0;
};

/// Reads JSON-lines objects carrying a "text" field (optionally "source").
/// Lines that fail to parse or lack a non-empty text are skipped and counted.
IngestResult ingest_stream(std::istream& in, std::string_view source_name,
                           const std::string& category, IdAllocator& ids);

/// Ingests each file in order. Throws IngestError naming the first
/// unreadable file or an unknown category.
IngestResult ingest(const std::vector<std::string>& files, std::string_view category,
                    const CategorySet& categories, IdAllocator& ids);

}  // namespace gaprouter::corpus
