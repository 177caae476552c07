#include "gaprouter/jury/judgment.hpp"

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/jsonl.hpp"

namespace gaprouter::jury {

bool valid_verdict(double a) { return a == 0.0 || a == 0.5 || a == 1.0; }

nlohmann::json to_json(const PairJudgment& j) {
  return {{"prompt_id", j.prompt_id},
          {"model_i", j.model_i},
          {"model_j", j.model_j},
          {"judge_id", j.judge_id},
          {"a", j.a},
          {"presentation_order", j.presentation_order == Presentation::ij ? "ij" : "ji"}};
}

PairJudgment judgment_from_json(const nlohmann::json& row) {
  PairJudgment j;
  j.prompt_id = row.at("prompt_id").get<std::string>();
  j.model_i = row.at("model_i").get<std::string>();
  j.model_j = row.at("model_j").get<std::string>();
  j.judge_id = row.at("judge_id").get<std::string>();
  j.a = row.at("a").get<double>();
  const auto order = row.value("presentation_order", "ij");
  if (order != "ij" && order != "ji") throw Error("bad presentation_order '" + order + "'");
  j.presentation_order = order == "ij" ? Presentation::ij : Presentation::ji;
  if (!valid_verdict(j.a)) throw Error("judgment verdict must be 0, 0.5 or 1");
  if (j.model_i == j.model_j) throw Error("judgment compares a model with itself");
  return j;
}

std::vector<PairJudgment> load_judgments(const std::string& path) {
  std::vector<PairJudgment> out;
  read_jsonl(path, [&](const json& row) { out.push_back(judgment_from_json(row)); });
  return out;
}

void save_judgments(const std::string& path, const std::vector<PairJudgment>& judgments) {
  std::vector<json> rows;
  rows.reserve(judgments.size());
  for (const auto& j : judgments) rows.push_back(to_json(j));
  write_jsonl(path, rows);
}

std::vector<ExpertPair> make_pairs(std::size_t m) {
  if (m < 2) throw Error("pairwise judging needs at least two experts");
  std::vector<ExpertPair> pairs;
  pairs.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) pairs.push_back({i, j});
  }
  return pairs;
}

}  // namespace gaprouter::jury
