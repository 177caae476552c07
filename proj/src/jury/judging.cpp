#include "gaprouter/jury/judging.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <mutex>
#include <thread>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/log.hpp"

namespace gaprouter::jury {

const char* const kDefaultJudgeTemplate =
    "You are an impartial judge. Compare the two responses to the prompt below on clarity, "
    "accuracy, and completeness.\n"
    "Reply with exactly one token: A if Response A is better, B if Response B is better, or TIE "
    "if they are equally good.\n\n"
    "[Prompt]\n{prompt}\n\n[Response A]\n{response_a}\n\n[Response B]\n{response_b}\n";

const char* const kDefaultReaskSuffix =
    "\nYour previous reply could not be read. Answer with exactly one of: A, B, TIE.";

std::optional<Verdict> parse_verdict(std::string_view reply) {
  std::vector<std::string> words;
  std::string word;
  for (char ch : reply) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::toupper(c)));
    } else if (!word.empty()) {
      words.push_back(std::move(word));
      word.clear();
      if (words.size() == 2) break;
    }
  }
  if (!word.empty() && words.size() < 2) words.push_back(std::move(word));
  if (words.empty()) return std::nullopt;
  // "Response A" style replies name the winner in the second word.
  const auto& key = words[0] == "RESPONSE" && words.size() > 1 ? words[1] : words[0];
  if (key == "A" || key == "FIRST" || key == "1") return Verdict::first;
  if (key == "B" || key == "SECOND" || key == "2") return Verdict::second;
  if (key == "TIE" || key == "EQUAL" || key == "DRAW") return Verdict::tie;
  return std::nullopt;
}

double canonical_credit(Verdict verdict, Presentation order) {
  if (verdict == Verdict::tie) return 0.5;
  const bool first_is_i = order == Presentation::ij;
  const bool prefers_first = verdict == Verdict::first;
  return prefers_first == first_is_i ? 1.0 : 0.0;
}

std::string render_judge_prompt(const std::string& tmpl, std::string_view prompt,
                                std::string_view response_a, std::string_view response_b) {
  std::string out;
  out.reserve(tmpl.size() + prompt.size() + response_a.size() + response_b.size());
  for (std::size_t pos = 0; pos < tmpl.size();) {
    if (tmpl[pos] == '{') {
      const auto close = tmpl.find('}', pos);
      if (close != std::string::npos) {
        const auto name = std::string_view(tmpl).substr(pos + 1, close - pos - 1);
        if (name == "prompt" || name == "response_a" || name == "response_b") {
          out += name == "prompt" ? prompt : name == "response_a" ? response_a : response_b;
          pos = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[pos++]);
  }
  return out;
}

Presentation presentation_for(std::uint64_t seed, std::string_view prompt_id, std::string_view model_i,
                              std::string_view model_j, std::string_view judge_id) {
  const std::string_view parts[] = {prompt_id, model_i, model_j, judge_id};
  return (mix_seed(seed, parts) & 1U) ? Presentation::ji : Presentation::ij;
}

JudgeChatFn client_judge_chat(const upstream::UpstreamClient& client) {
  return [&client](const upstream::ModelDescriptor& judge, const std::string& message, double temperature) {
    return client.complete(judge, message, temperature).text;
  };
}

std::optional<PairJudgment> judge_pair(const corpus::PromptRecord& prompt,
                                       const std::string& model_i, std::string_view response_i,
                                       const std::string& model_j, std::string_view response_j,
                                       const upstream::ModelDescriptor& judge, const JudgeChatFn& chat,
                                       const JudgeSettings& settings) {
  const auto order = presentation_for(settings.seed, prompt.id, model_i, model_j, judge.id);
  const auto first = order == Presentation::ij ? response_i : response_j;
  const auto second = order == Presentation::ij ? response_j : response_i;
  const auto message = render_judge_prompt(settings.prompt_template, prompt.text, first, second);

  auto verdict = parse_verdict(chat(judge, message, settings.temperature));
  if (!verdict) verdict = parse_verdict(chat(judge, message + settings.reask_suffix, settings.temperature));
  if (!verdict) return std::nullopt;
  return PairJudgment{prompt.id, model_i, model_j, judge.id, canonical_credit(*verdict, order), order};
}

JudgeRunReport judge_corpus(const std::vector<corpus::PromptRecord>& prompts,
                            const std::vector<upstream::ResponseRecord>& responses,
                            const Roster& experts,
                            const std::vector<upstream::ModelDescriptor>& judges,
                            const JudgeChatFn& chat, const JudgeSettings& settings) {
  if (judges.empty()) throw ConfigError("no judges configured");
  const auto pairs = make_pairs(experts.size());
  std::map<std::pair<std::string, std::string>, const upstream::ResponseRecord*> by_key;
  for (const auto& r : responses) by_key[{r.prompt_id, r.model_id}] = &r;

  struct Task {
    std::size_t prompt, pair, judge;
    const upstream::ResponseRecord* ri;
    const upstream::ResponseRecord* rj;
  };
  JudgeRunReport report;
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    bool complete = true;
    for (std::size_t e = 0; e < experts.size(); ++e) {
      complete = complete && by_key.count({prompts[p].id, experts.id(e)});
    }
    if (!complete) report.incomplete_prompts.push_back(prompts[p].id);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto ii = by_key.find({prompts[p].id, experts.id(pairs[k].i)});
      const auto jj = by_key.find({prompts[p].id, experts.id(pairs[k].j)});
      if (ii == by_key.end() || jj == by_key.end()) continue;
      for (std::size_t q = 0; q < judges.size(); ++q) {
        if (settings.exclude_self_pairs &&
            (judges[q].id == experts.id(pairs[k].i) || judges[q].id == experts.id(pairs[k].j))) {
          continue;
        }
        tasks.push_back({p, k, q, ii->second, jj->second});
      }
    }
  }

  std::vector<std::optional<PairJudgment>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const auto& task = tasks[t];
      try {
        results[t] = judge_pair(prompts[task.prompt], experts.id(pairs[task.pair].i), task.ri->text,
                                experts.id(pairs[task.pair].j), task.rj->text, judges[task.judge], chat,
                                settings);
      } catch (const std::exception& e) {
        ++failures;
        log::warn("judge call failed", {{"prompt_id", prompts[task.prompt].id},
                                        {"judge", judges[task.judge].id}, {"error", e.what()}});
      }
    }
  };
  const auto workers = std::max<std::size_t>(1, std::min(settings.parallelism, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  report.transport_failures = failures.load();
  for (auto& r : results) {
    if (r) {
      report.judgments.push_back(std::move(*r));
    } else {
      ++report.missing;
    }
  }
  report.missing -= report.transport_failures;
  return report;
}

}  // namespace gaprouter::jury
