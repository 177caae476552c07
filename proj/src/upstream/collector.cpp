#include "gaprouter/upstream/collector.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/log.hpp"

namespace gaprouter::upstream {

CompleteFn client_completer(const UpstreamClient& client) {
  return [&client](const ModelDescriptor& model, const corpus::PromptRecord& prompt, double temperature) {
    auto record = client.complete(model, prompt.text, temperature);
    record.prompt_id = prompt.id;
    return record;
  };
}

CollectReport collect_responses(const std::vector<corpus::PromptRecord>& prompts,
                                const std::vector<ModelDescriptor>& experts,
                                const CompleteFn& complete,
                                const std::vector<ResponseRecord>& existing,
                                const CollectOptions& options,
                                const std::function<void(const ResponseRecord&)>& on_record) {
  if (options.parallelism < 1) throw ConfigError("collect.parallelism must be >= 1");

  std::set<std::pair<std::string, std::string>> done;
  for (const auto& r : existing) done.emplace(r.prompt_id, r.model_id);

  struct Task {
    std::size_t prompt;
    std::size_t expert;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    for (std::size_t e = 0; e < experts.size(); ++e) {
      if (!done.count({prompts[p].id, experts[e].id})) tasks.push_back({p, e});
    }
  }

  CollectReport report;
  report.records = existing;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const auto& prompt = prompts[tasks[t].prompt];
      const auto& expert = experts[tasks[t].expert];
      try {
        auto record = complete(expert, prompt, options.temperature);
        record.prompt_id = prompt.id;
        record.model_id = expert.id;
        std::lock_guard lock(mutex);
        ++report.upstream_calls;
        if (on_record) on_record(record);
        report.records.push_back(std::move(record));
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        ++report.upstream_calls;
        report.failures.push_back({prompt.id, expert.id, e.what()});
      }
    }
  };
  const auto workers = std::min(options.parallelism, std::max<std::size_t>(tasks.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::map<std::string, std::size_t> prompt_order;
  for (std::size_t p = 0; p < prompts.size(); ++p) prompt_order.emplace(prompts[p].id, p);
  std::map<std::string, std::size_t> expert_order;
  for (std::size_t e = 0; e < experts.size(); ++e) expert_order.emplace(experts[e].id, e);
  auto order_key = [&](const std::string& prompt_id, const std::string& model_id) {
    const auto p = prompt_order.find(prompt_id);
    const auto e = expert_order.find(model_id);
    return std::pair(p == prompt_order.end() ? prompts.size() : p->second,
                     e == expert_order.end() ? experts.size() : e->second);
  };
  std::stable_sort(report.records.begin(), report.records.end(), [&](const auto& a, const auto& b) {
    return order_key(a.prompt_id, a.model_id) < order_key(b.prompt_id, b.model_id);
  });
  std::stable_sort(report.failures.begin(), report.failures.end(), [&](const auto& a, const auto& b) {
    return order_key(a.prompt_id, a.model_id) < order_key(b.prompt_id, b.model_id);
  });

  const auto total = prompts.size() * experts.size();
  if (!report.failures.empty()) {
    const double rate = static_cast<double>(report.failures.size()) / static_cast<double>(total);
    log::warn("collection failures", {{"failed", report.failures.size()}, {"total", total}, {"rate", rate}});
    report.ceiling_exceeded = rate > options.failure_ceiling;
  }
  return report;
}

}  // namespace gaprouter::upstream
