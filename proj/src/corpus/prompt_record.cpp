#include "gaprouter/corpus/prompt_record.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/jsonl.hpp"
#include "gaprouter/common/log.hpp"

namespace gaprouter::corpus {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name.empty() || name == "unassigned") return Split::unassigned;
  throw Error("unknown split '" + std::string(name) + "'");
}

std::string normalize_label(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  const auto first = out.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(" \t");
  return out.substr(first, last - first + 1);
}

CategorySet::CategorySet(std::vector<std::string> labels) {
  if (labels.empty()) throw ConfigError("category label set is empty");
  for (const auto& raw : labels) {
    auto name = normalize_label(raw);
    if (name.empty()) throw ConfigError("empty category label");
    if (std::find(labels_.begin(), labels_.end(), name) != labels_.end()) {
      throw ConfigError("duplicate category label '" + name + "'");
    }
    labels_.push_back(std::move(name));
  }
}

CategorySet CategorySet::defaults() {
  return CategorySet({"mathematics", "coding", "reasoning_knowledge", "summarization",
                      "creative_writing"});
}

bool CategorySet::contains(std::string_view name) const {
  const auto key = normalize_label(name);
  return std::find(labels_.begin(), labels_.end(), key) != labels_.end();
}

std::string CategorySet::canonical(std::string_view name) const {
  auto key = normalize_label(name);
  if (std::find(labels_.begin(), labels_.end(), key) == labels_.end()) {
    throw ConfigError("category '" + std::string(name) + "' is not in the configured label set");
  }
  return key;
}

std::size_t CategorySet::index_of(std::string_view name) const {
  const auto key = normalize_label(name);
  const auto it = std::find(labels_.begin(), labels_.end(), key);
  if (it == labels_.end()) {
    throw ConfigError("category '" + std::string(name) + "' is not in the configured label set");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

nlohmann::json to_json(const PromptRecord& record) {
  return {{"id", record.id},
          {"text", record.text},
          {"category", record.category},
          {"source", record.source},
          {"split", std::string(to_string(record.split))}};
}

PromptRecord record_from_json(const nlohmann::json& row) {
  PromptRecord record;
  record.id = row.at("id").get<std::string>();
  record.text = row.at("text").get<std::string>();
  record.category = row.value("category", "");
  record.source = row.value("source", "");
  record.split = split_from_string(row.value("split", "unassigned"));
  if (record.id.empty() || record.text.empty()) {
    throw Error("corpus record with empty id or text");
  }
  return record;
}

std::vector<PromptRecord> load_corpus(const std::string& path) {
  std::vector<PromptRecord> records;
  read_jsonl(path, [&](const json& row) { records.push_back(record_from_json(row)); });
  return records;
}

void save_corpus(const std::string& path, const std::vector<PromptRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

void IdAllocator::reserve(const std::vector<PromptRecord>& existing) {
  for (const auto& r : existing) taken_.insert(r.id);
}

std::string IdAllocator::next() {
  std::string id;
  do {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu", ++counter_);
    id = prefix_ + buf;
  } while (taken_.count(id) != 0);
  taken_.insert(id);
  return id;
}

IngestResult ingest_stream(std::istream& in, std::string_view source_name,
                           const std::string& category, IdAllocator& ids) {
  IngestResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("text") ||
        !doc["text"].is_string() || doc["text"].get_ref<const std::string&>().empty()) {
      ++result.skipped;
      continue;
    }
    PromptRecord record;
    record.id = ids.next();
    record.text = doc["text"].get<std::string>();
    record.category = category;
    record.source = doc.contains("source") && doc["source"].is_string()
                        ? doc["source"].get<std::string>()
                        : std::string(source_name);
    result.records.push_back(std::move(record));
  }
  return result;
}

IngestResult ingest(const std::vector<std::string>& files, std::string_view category,
                    const CategorySet& categories, IdAllocator& ids) {
  const std::string canonical = categories.canonical(category);
  IngestResult total;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw IngestError("cannot read ingest source '" + file + "'");
    const auto source = std::filesystem::path(file).stem().string();
    auto part = ingest_stream(in, source, canonical, ids);
    total.skipped += part.skipped;
    for (auto& r : part.records) total.records.push_back(std::move(r));
  }
  if (total.records.empty()) {
    log::warn("ingest produced no records", {{"category", canonical}, {"skipped", total.skipped}});
  }
  return total;
}

}  // namespace gaprouter::corpus
