#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gaprouter/corpus/prompt_record.hpp"
#include "gaprouter/jury/judgment.hpp"
#include "gaprouter/upstream/client.hpp"
#include "gaprouter/upstream/model_descriptor.hpp"

namespace gaprouter::jury {

enum class Verdict { first, second, tie };

/// Accepts A / B / TIE (and FIRST / SECOND / EQUAL), case-insensitive, with
/// surrounding punctuation or markdown tolerated. Longer replies are judged
/// by their first word.
std::optional<Verdict> parse_verdict(std::string_view reply);

/// Credit for the canonical model_i given the positional verdict.
double canonical_credit(Verdict verdict, Presentation order);

extern const char* const kDefaultJudgeTemplate;
extern const char* const kDefaultReaskSuffix;

struct JudgeSettings {
  /// Must contain {prompt}, {response_a} and {response_b}.
  std::string prompt_template = kDefaultJudgeTemplate;
  std::string reask_suffix = kDefaultReaskSuffix;
  std::uint64_t seed = 17;
  double temperature = 0.0;
  /// Skip pairs that contain the judge's own output.
  bool exclude_self_pairs = false;
  std::size_t parallelism = 4;
};

std::string render_judge_prompt(const std::string& tmpl, std::string_view prompt,
                                std::string_view response_a, std::string_view response_b);

/// Seeded per (prompt, pair, judge) so reruns present pairs identically.
Presentation presentation_for(std::uint64_t seed, std::string_view prompt_id, std::string_view model_i,
                              std::string_view model_j, std::string_view judge_id);

/// Sends one chat message to a judge and returns its reply text.
using JudgeChatFn = std::function<std::string(const upstream::ModelDescriptor& judge,
                                              const std::string& message, double temperature)>;

JudgeChatFn client_judge_chat(const upstream::UpstreamClient& client);

/// Blind comparison of two responses. Returns nullopt (a missing verdict)
/// when the judge's reply cannot be parsed after one re-ask.
std::optional<PairJudgment> judge_pair(const corpus::PromptRecord& prompt,
                                       const std::string& model_i, std::string_view response_i,
                                       const std::string& model_j, std::string_view response_j,
                                       const upstream::ModelDescriptor& judge, const JudgeChatFn& chat,
                                       const JudgeSettings& settings);

struct JudgeRunReport {
  std::vector<PairJudgment> judgments;
  std::size_t missing = 0;
  std::size_t transport_failures = 0;
  /// Prompts lacking a response from some expert; their pairs are skipped.
  std::vector<std::string> incomplete_prompts;
};

/// Judges every canonical expert pair of every prompt with every judge.
/// Output is ordered by (prompt, pair, judge).
JudgeRunReport judge_corpus(const std::vector<corpus::PromptRecord>& prompts,
                            const std::vector<upstream::ResponseRecord>& responses,
                            const Roster& experts,
                            const std::vector<upstream::ModelDescriptor>& judges,
                            const JudgeChatFn& chat, const JudgeSettings& settings);

}  // namespace gaprouter::jury
