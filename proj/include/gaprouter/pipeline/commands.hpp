#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gaprouter/gateway/gateway.hpp"
#include "gaprouter/jury/judging.hpp"
#include "gaprouter/pipeline/config.hpp"
#include "gaprouter/upstream/collector.hpp"
#include "gaprouter/upstream/embedder.hpp"

// One function per pipeline stage. Each reads and writes the JSON-lines
// files of the previous and next stage and returns a summary object. Network
// access is injected so the whole pipeline runs against mocks.
namespace gaprouter::pipeline {

/// Appends to `out` when it already exists (ids never collide).
nlohmann::json run_ingest(const AppConfig& config, const std::vector<std::string>& files,
                          const std::string& category, const std::string& out);

/// Optional seeded reshuffle, then near-duplicate removal.
nlohmann::json run_dedup(const AppConfig& config, const std::string& in, const std::string& out);

/// Works on a corpus (strata = category) or on labels (strata = category x
/// best expert); the kind is detected from the first row.
nlohmann::json run_split(const AppConfig& config, const std::string& in, const std::string& out);

/// Resumes from `out` if present. Throws CollectionError when the failure
/// ceiling is exceeded (after saving what succeeded).
nlohmann::json run_collect(const AppConfig& config, const std::string& corpus_path, const std::string& out,
                           const upstream::CompleteFn& complete);

/// `judge_ids` empty means the configured jury.
nlohmann::json run_judge(const AppConfig& config, const std::string& corpus_path,
                         const std::string& responses_path, const std::vector<std::string>& judge_ids,
                         const std::string& out, const jury::JudgeChatFn& chat);

/// Aggregates and normalizes judgments, embeds prompts, writes labels.
nlohmann::json run_label(const AppConfig& config, const std::string& corpus_path,
                         const std::string& judgments_path, const std::string& out, upstream::Embedder& embedder);

/// Kappa matrix, mean kappa, self-win table and per-judge majority agreement.
nlohmann::json run_jury_stats(const AppConfig& config, const std::string& judgments_path,
                              const std::optional<std::string>& out);

/// Trains on the train split (everything when no split was assigned) and
/// writes one bundle.
nlohmann::json run_train(const AppConfig& config, const std::string& labels_path, learners::RoutingMode mode,
                         const std::string& bundle_dir);

/// Evaluates on the validation split (everything when there is none). The
/// report goes to `out` as JSON and next to it as CSV (same stem).
nlohmann::json run_sweep(const AppConfig& config, const std::string& bundle_dir, const std::string& labels_path,
                         const std::vector<double>& taus, const std::string& out);

nlohmann::json run_eval(const AppConfig& config, const std::string& bundle_dir, const std::string& labels_path,
                        double tau, const std::vector<std::string>& references, const std::optional<std::string>& out);

/// Gateway view of the config. The in-memory embedding LRU defaults to 4096
/// entries when the config leaves it at 0.
gateway::GatewayConfig gateway_config(const AppConfig& config);

}  // namespace gaprouter::pipeline
