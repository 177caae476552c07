#include "gaprouter/common/jsonl.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "gaprouter/common/error.hpp"

namespace gaprouter {

JsonlReadStats read_jsonl(const std::string& path, const std::function<void(const json&)>& visit) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path);
  JsonlReadStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++stats.lines;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      ++stats.malformed;
      continue;
    }
    visit(doc);
  }
  return stats;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> rows;
  read_jsonl(path, [&](const json& row) { rows.push_back(row); });
  return rows;
}

void write_jsonl(const std::string& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  static std::atomic<std::uint64_t> counter{0};
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid()) + "." +
                       std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace gaprouter
