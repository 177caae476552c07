#pragma once

#include <cstddef>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace gaprouter {

using json = nlohmann::json;

struct JsonlReadStats {
  std::size_t lines = 0;
  std::size_t malformed = 0;
};

/// Calls `visit` for each parseable JSON object line. Blank lines are ignored,
/// lines that fail to parse (or are not objects) are counted as malformed.
/// Throws IngestError if the file cannot be opened.
JsonlReadStats read_jsonl(const std::string& path, const std::function<void(const json&)>& visit);

std::vector<json> read_jsonl(const std::string& path);

/// Writes one compact JSON document per line, replacing the file atomically.
void write_jsonl(const std::string& path, const std::vector<json>& rows);

/// Writes bytes to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace gaprouter
