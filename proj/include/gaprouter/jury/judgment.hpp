#pragma once

#include <cstddef>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace gaprouter::jury {

enum class Presentation { ij, ji };

/// One judge's verdict on a canonical (i < j) pair of expert responses.
/// `a` is the credit given to model_i: 1 prefer i, 0.5 tie, 0 prefer j.
struct PairJudgment {
  std::string prompt_id;
  std::string model_i;
  std::string model_j;
  std::string judge_id;
  double a = 0.5;
  Presentation presentation_order = Presentation::ij;

  bool operator==(const PairJudgment&) const = default;
};

bool valid_verdict(double a);

nlohmann::json to_json(const PairJudgment& j);
PairJudgment judgment_from_json(const nlohmann::json& row);

std::vector<PairJudgment> load_judgments(const std::string& path);
void save_judgments(const std::string& path, const std::vector<PairJudgment>& judgments);

struct ExpertPair {
  std::size_t i;
  std::size_t j;
  bool operator==(const ExpertPair&) const = default;
};

/// All unordered pairs of an m-expert roster in canonical order
/// (0,1), (0,2), ..., (m-2, m-1). Throws Error when m < 2.
std::vector<ExpertPair> make_pairs(std::size_t m);

}  // namespace gaprouter::jury
