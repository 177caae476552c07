#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gaprouter/corpus/prompt_record.hpp"
#include "gaprouter/upstream/client.hpp"

namespace gaprouter::upstream {

struct CollectOptions {
  std::size_t parallelism = 4;
  /// Largest tolerated fraction of failed (prompt, expert) pairs.
  double failure_ceiling = 0.05;
  double temperature = kDefaultTemperature;
};

struct CollectFailure {
  std::string prompt_id;
  std::string model_id;
  std::string error;
};

struct CollectReport {
  /// Previously stored records plus the new ones, ordered by (prompt, expert).
  std::vector<ResponseRecord> records;
  std::vector<CollectFailure> failures;
  std::size_t upstream_calls = 0;
  /// The failure fraction exceeded CollectOptions::failure_ceiling; the run
  /// counts as failed even though successful records were kept.
  bool ceiling_exceeded = false;
};

using CompleteFn =
    std::function<ResponseRecord(const ModelDescriptor&, const corpus::PromptRecord&, double temperature)>;

/// Asks every expert to answer every prompt on a pool of `parallelism`
/// workers. Pairs already present in `existing` are skipped. Each new record
/// is handed to `on_record` (serialized) as soon as it arrives so a crashed
/// run can resume.
CollectReport collect_responses(const std::vector<corpus::PromptRecord>& prompts,
                                const std::vector<ModelDescriptor>& experts,
                                const CompleteFn& complete,
                                const std::vector<ResponseRecord>& existing,
                                const CollectOptions& options,
                                const std::function<void(const ResponseRecord&)>& on_record = {});

/// CompleteFn backed by an UpstreamClient.
CompleteFn client_completer(const UpstreamClient& client);

}  // namespace gaprouter::upstream
