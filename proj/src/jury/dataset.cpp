#include "gaprouter/jury/dataset.hpp"

#include <cmath>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/jsonl.hpp"

namespace gaprouter::jury {

nlohmann::json to_json(const LabeledExample& example, const Roster& roster) {
  if (example.scores.size() != roster.size()) throw Error("score vector does not match roster");
  nlohmann::json scores = nlohmann::json::object();
  for (std::size_t e = 0; e < roster.size(); ++e) scores[roster.id(e)] = example.scores[e];
  return {{"prompt_id", example.prompt_id},
          {"category", example.category},
          {"split", std::string(corpus::to_string(example.split))},
          {"embedding", example.embedding},
          {"scores", scores}};
}

LabeledExample labeled_from_json(const nlohmann::json& row, const Roster& roster) {
  LabeledExample ex;
  ex.prompt_id = row.at("prompt_id").get<std::string>();
  ex.category = row.value("category", "");
  ex.split = corpus::split_from_string(row.value("split", "unassigned"));
  ex.embedding = row.at("embedding").get<std::vector<double>>();
  const auto& scores = row.at("scores");
  if (!scores.is_object() || scores.size() != roster.size()) {
    throw Error("label '" + ex.prompt_id + "' does not score exactly the roster's experts");
  }
  ex.scores.resize(roster.size());
  for (std::size_t e = 0; e < roster.size(); ++e) {
    if (!scores.contains(roster.id(e))) {
      throw Error("label '" + ex.prompt_id + "' has no score for expert '" + roster.id(e) + "'");
    }
    ex.scores[e] = scores.at(roster.id(e)).get<double>();
  }
  return ex;
}

std::vector<LabeledExample> load_labels(const std::string& path, const Roster& roster) {
  std::vector<LabeledExample> out;
  std::size_t dim = 0;
  read_jsonl(path, [&](const json& row) {
    auto ex = labeled_from_json(row, roster);
    if (out.empty()) dim = ex.embedding.size();
    if (ex.embedding.size() != dim || dim == 0) {
      throw DimensionError("label '" + ex.prompt_id + "' has embedding dim " +
                           std::to_string(ex.embedding.size()) + ", expected " + std::to_string(dim));
    }
    out.push_back(std::move(ex));
  });
  return out;
}

void save_labels(const std::string& path, const std::vector<LabeledExample>& examples,
                 const Roster& roster) {
  std::vector<json> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) rows.push_back(to_json(ex, roster));
  write_jsonl(path, rows);
}

LabelBuildResult build_labeled_dataset(const std::vector<corpus::PromptRecord>& corpus,
                                       const std::map<std::string, NormalizedScores>& scores,
                                       const std::map<std::string, std::vector<double>>& embeddings,
                                       std::size_t dim) {
  LabelBuildResult result;
  for (const auto& prompt : corpus) {
    const auto s = scores.find(prompt.id);
    const auto e = embeddings.find(prompt.id);
    if (s == scores.end() || e == embeddings.end()) {
      std::string missing = s == scores.end() ? "scores" : "";
      if (e == embeddings.end()) missing += missing.empty() ? "embedding" : " and embedding";
      result.report.push_back("prompt " + prompt.id + ": missing " + missing);
      continue;
    }
    if (e->second.size() != dim) {
      throw DimensionError("prompt " + prompt.id + ": embedding dim " + std::to_string(e->second.size()) +
                           " differs from pinned dim " + std::to_string(dim));
    }
    result.examples.push_back({prompt.id, prompt.category, e->second, s->second.scores, prompt.split});
  }
  return result;
}

std::size_t best_expert(const std::vector<double>& scores) {
  if (scores.empty()) throw Error("empty score vector");
  std::size_t best = 0;
  for (std::size_t e = 1; e < scores.size(); ++e) {
    if (scores[e] > scores[best]) best = e;
  }
  return best;
}

}  // namespace gaprouter::jury
