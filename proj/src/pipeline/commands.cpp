#include "gaprouter/pipeline/commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/jsonl.hpp"
#include "gaprouter/common/log.hpp"
#include "gaprouter/corpus/minhash.hpp"
#include "gaprouter/corpus/split.hpp"
#include "gaprouter/eval/evaluation.hpp"
#include "gaprouter/jury/dataset.hpp"
#include "gaprouter/jury/reliability.hpp"
#include "gaprouter/jury/scoring.hpp"
#include "gaprouter/learners/bundle.hpp"
#include "gaprouter/learners/training.hpp"

namespace gaprouter::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// The CLI prefixes errors with the stage name.
void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " file not found: " + path);
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

/// Runs fn(0..n-1) on `threads` workers; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<upstream::ResponseRecord> load_responses(const std::string& path) {
  std::vector<upstream::ResponseRecord> out;
  read_jsonl(path, [&](const json& row) { out.push_back(upstream::response_from_json(row)); });
  return out;
}

std::vector<jury::LabeledExample> subset(const std::vector<jury::LabeledExample>& all, corpus::Split split) {
  std::vector<jury::LabeledExample> out;
  for (const auto& ex : all) {
    if (ex.split == split) out.push_back(ex);
  }
  return out;
}

std::vector<jury::LabeledExample> evaluation_set(const std::vector<jury::LabeledExample>& all) {
  auto val = subset(all, corpus::Split::validation);
  if (!val.empty()) return val;
  log::warn("no validation split in labels; evaluating on every example");
  return all;
}

std::string csv_path_for(const std::string& json_path) {
  fs::path p(json_path);
  p.replace_extension(".csv");
  return p.string();
}

std::shared_ptr<const learners::ModelBundle> load_for(const AppConfig& config, const std::string& dir) {
  require_file((fs::path(dir) / "manifest.json").string(), "bundle manifest");
  std::optional<std::string> expected;
  if (!config.models.empty()) expected = config.roster().hash();
  return std::make_shared<const learners::ModelBundle>(learners::load_bundle(dir, expected));
}

router::RouterPolicy policy_for(const AppConfig& config, const learners::ModelBundle& bundle) {
  auto policy = config.policy;
  policy.mode = bundle.mode;
  return policy;
}

}  // namespace

json run_ingest(const AppConfig& config, const std::vector<std::string>& files, const std::string& category,
                const std::string& out) {
  if (files.empty()) throw ConfigError("no input files");
  std::vector<corpus::PromptRecord> existing;
  if (fs::exists(out)) existing = corpus::load_corpus(out);
  corpus::IdAllocator ids;
  ids.reserve(existing);
  auto result = corpus::ingest(files, category, config.category_set(), ids);
  const auto added = result.records.size();
  existing.insert(existing.end(), std::make_move_iterator(result.records.begin()),
                  std::make_move_iterator(result.records.end()));
  ensure_parent(out);
  corpus::save_corpus(out, existing);
  return {{"stage", "ingest"}, {"added", added}, {"skipped", result.skipped}, {"total", existing.size()}};
}

json run_dedup(const AppConfig& config, const std::string& in, const std::string& out) {
  require_file(in, "corpus");
  auto records = corpus::load_corpus(in);
  if (config.shuffle) corpus::shuffle(records, config.shuffle_seed);
  const auto result = corpus::dedup(records, config.dedup);
  ensure_parent(out);
  corpus::save_corpus(out, result.kept);
  json removed = json::array();
  for (const auto& [gone, kept] : result.removed) removed.push_back({{"removed", gone}, {"duplicate_of", kept}});
  return {{"stage", "dedup"}, {"input", records.size()}, {"kept", result.kept.size()}, {"removed", removed}};
}

json run_split(const AppConfig& config, const std::string& in, const std::string& out) {
  require_file(in, "input");
  const auto rows = read_jsonl(in);
  if (rows.empty()) throw IngestError("" + in + " has no records");
  const bool labels = rows.front().contains("scores");
  std::vector<std::string> strata;
  std::size_t singletons = 0;

  auto apply = [&](auto& items, auto key_of) {
    for (const auto& it : items) strata.push_back(key_of(it));
    std::map<std::string, std::size_t> sizes;
    for (const auto& s : strata) ++sizes[s];
    for (const auto& [s, n] : sizes) {
      if (n == 1) {
        ++singletons;
        log::info("singleton stratum goes to train", {{"stratum", s}});
      }
    }
    const auto split = corpus::stratified_split(strata, config.split.train_fraction, config.split.seed);
    for (auto k : split.train) items[k].split = corpus::Split::train;
    for (auto k : split.validation) items[k].split = corpus::Split::validation;
    return std::pair{split.train.size(), split.validation.size()};
  };

  std::pair<std::size_t, std::size_t> sizes;
  ensure_parent(out);
  if (labels) {
    const auto roster = config.roster();
    auto examples = jury::load_labels(in, roster);
    sizes = apply(examples, [&](const jury::LabeledExample& ex) {
      return ex.category + "|" + roster.id(jury::best_expert(ex.scores));
    });
    jury::save_labels(out, examples, roster);
  } else {
    auto records = corpus::load_corpus(in);
    sizes = apply(records, [](const corpus::PromptRecord& r) { return r.category; });
    corpus::save_corpus(out, records);
  }
  return {{"stage", "split"},
          {"kind", labels ? "labels" : "corpus"},
          {"train", sizes.first},
          {"validation", sizes.second},
          {"singleton_strata", singletons}};
}

json run_collect(const AppConfig& config, const std::string& corpus_path, const std::string& out,
                 const upstream::CompleteFn& complete) {
  require_file(corpus_path, "corpus");
  const auto prompts = corpus::load_corpus(corpus_path);
  const auto experts = config.experts();
  if (experts.empty()) throw ConfigError("no experts configured under models");
  std::vector<upstream::ResponseRecord> existing;
  if (fs::exists(out)) existing = load_responses(out);
  ensure_parent(out);

  std::mutex append_mutex;
  std::ofstream journal(out, std::ios::app);
  const auto report = upstream::collect_responses(prompts, experts, complete, existing, config.collect,
                                                  [&](const upstream::ResponseRecord& r) {
                                                    std::lock_guard lock(append_mutex);
                                                    journal << upstream::to_json(r).dump() << '\n';
                                                    journal.flush();
                                                  });
  journal.close();
  std::vector<json> rows;
  for (const auto& r : report.records) rows.push_back(upstream::to_json(r));
  write_jsonl(out, rows);

  json failures = json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"prompt_id", f.prompt_id}, {"model_id", f.model_id}, {"error", f.error}});
  }
  json summary = {{"stage", "collect"},
                  {"records", report.records.size()},
                  {"resumed", existing.size()},
                  {"upstream_calls", report.upstream_calls},
                  {"failures", failures}};
  if (report.ceiling_exceeded) {
    throw CollectionError("" + std::to_string(report.failures.size()) +
                          " failed (prompt, expert) pairs exceed the failure ceiling of " +
                          std::to_string(config.collect.failure_ceiling) + "; " +
                          std::to_string(report.records.size()) + " records kept in " + out);
  }
  return summary;
}

json run_judge(const AppConfig& config, const std::string& corpus_path, const std::string& responses_path,
               const std::vector<std::string>& judge_ids, const std::string& out, const jury::JudgeChatFn& chat) {
  require_file(corpus_path, "corpus");
  require_file(responses_path, "responses");
  const auto prompts = corpus::load_corpus(corpus_path);
  const auto responses = load_responses(responses_path);
  std::vector<upstream::ModelDescriptor> judges;
  if (judge_ids.empty()) {
    judges = config.judges();
  } else {
    for (const auto& id : judge_ids) judges.push_back(upstream::find_model(config.models, id));
  }
  if (judges.empty()) throw ConfigError("no judges configured");
  const auto report = jury::judge_corpus(prompts, responses, config.roster(), judges, chat, config.judge);
  ensure_parent(out);
  jury::save_judgments(out, report.judgments);

  const auto attempted = report.judgments.size() + report.missing + report.transport_failures;
  const double failure_rate =
      attempted == 0 ? 0.0 : static_cast<double>(report.transport_failures) / static_cast<double>(attempted);
  if (failure_rate > config.collect.failure_ceiling) {
    throw CollectionError("transport failure rate " + std::to_string(failure_rate) +
                          " exceeds the failure ceiling; partial judgments saved to " + out);
  }
  return {{"stage", "judge"},
          {"judgments", report.judgments.size()},
          {"missing", report.missing},
          {"transport_failures", report.transport_failures},
          {"incomplete_prompts", report.incomplete_prompts}};
}

json run_label(const AppConfig& config, const std::string& corpus_path, const std::string& judgments_path,
               const std::string& out, upstream::Embedder& embedder) {
  require_file(corpus_path, "corpus");
  require_file(judgments_path, "judgments");
  const auto prompts = corpus::load_corpus(corpus_path);
  const auto judgments = jury::load_judgments(judgments_path);
  const auto roster = config.roster();

  std::map<std::string, jury::NormalizedScores> scores;
  json skipped = json::array();
  for (const auto& [prompt_id, group] : jury::group_by_prompt(judgments)) {
    try {
      scores.emplace(prompt_id, jury::normalize(jury::aggregate(group, roster, prompt_id)));
    } catch (const Error& e) {
      skipped.push_back({{"prompt_id", prompt_id}, {"reason", e.what()}});
    }
  }

  std::vector<const corpus::PromptRecord*> todo;
  for (const auto& p : prompts) {
    if (scores.count(p.id)) todo.push_back(&p);
  }
  std::vector<std::vector<double>> vectors(todo.size());
  parallel_for(todo.size(), config.collect.parallelism,
               [&](std::size_t k) { vectors[k] = embedder.embed(todo[k]->text).values; });
  std::map<std::string, std::vector<double>> embeddings;
  for (std::size_t k = 0; k < todo.size(); ++k) embeddings.emplace(todo[k]->id, std::move(vectors[k]));

  auto built = jury::build_labeled_dataset(prompts, scores, embeddings, embedder.dim());
  for (const auto& line : built.report) skipped.push_back({{"reason", line}});
  ensure_parent(out);
  jury::save_labels(out, built.examples, roster);
  return {{"stage", "label"}, {"examples", built.examples.size()}, {"skipped", skipped}};
}

json run_jury_stats(const AppConfig& config, const std::string& judgments_path,
                    const std::optional<std::string>& out) {
  require_file(judgments_path, "judgments");
  const auto judgments = jury::load_judgments(judgments_path);
  const auto kappa = jury::pairwise_kappa(judgments);

  json matrix = json::object();
  for (std::size_t x = 0; x < kappa.judges.size(); ++x) {
    json row = json::object();
    for (std::size_t y = 0; y < kappa.judges.size(); ++y) {
      row[kappa.judges[y]] = kappa.kappa[x][y] ? json(*kappa.kappa[x][y]) : json(nullptr);
    }
    matrix[kappa.judges[x]] = row;
  }

  const auto roster = config.roster();
  json self_win = json::object();
  for (const auto& judge : kappa.judges) {
    if (!roster.contains(judge)) continue;
    try {
      self_win[judge] = jury::self_win_rate(judgments, judge, judge, roster);
    } catch (const Error&) {
      self_win[judge] = nullptr;
    }
  }

  // Agreement with the per-item majority label (items with >= 2 judges and a
  // strict majority).
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<const jury::PairJudgment*>> items;
  for (const auto& j : judgments) items[{j.prompt_id, j.model_i, j.model_j}].push_back(&j);
  std::map<std::string, std::pair<std::size_t, std::size_t>> agree;
  for (const auto& [key, group] : items) {
    if (group.size() < 2) continue;
    std::array<std::size_t, 3> counts{};
    for (const auto* j : group) ++counts[static_cast<std::size_t>(jury::label_of(j->a))];
    const auto best = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    if (std::count(counts.begin(), counts.end(), counts[best]) > 1) continue;
    for (const auto* j : group) {
      auto& [hits, total] = agree[j->judge_id];
      ++total;
      hits += static_cast<std::size_t>(jury::label_of(j->a)) == best;
    }
  }
  json majority = json::object();
  for (const auto& [judge, ht] : agree) {
    majority[judge] = static_cast<double>(ht.first) / static_cast<double>(ht.second);
  }

  json report = {{"judgments", judgments.size()},
                 {"judges", kappa.judges},
                 {"kappa", matrix},
                 {"mean_kappa", kappa.mean_pairwise ? json(*kappa.mean_pairwise) : json(nullptr)},
                 {"self_win", self_win},
                 {"majority_agreement", majority}};
  if (out) {
    ensure_parent(*out);
    write_file_atomic(*out, report.dump(2) + "\n");
  }
  return report;
}

json run_train(const AppConfig& config, const std::string& labels_path, learners::RoutingMode mode,
               const std::string& bundle_dir) {
  require_file(labels_path, "labels");
  const auto roster = config.roster();
  const auto all = jury::load_labels(labels_path, roster);
  auto train = subset(all, corpus::Split::train);
  if (train.empty()) {
    log::warn("no train split in labels; training on every example");
    train = all;
  }
  if (train.size() < 2) throw TrainingError("need at least two labeled examples");

  // Category labels in configured order, restricted to those present.
  const auto configured = config.category_set();
  std::set<std::string> present;
  for (const auto& ex : train) present.insert(ex.category);
  std::vector<std::string> categories;
  for (const auto& label : configured.labels()) {
    if (present.count(label)) categories.push_back(label);
  }

  learners::ModelBundle bundle;
  bundle.mode = mode;
  bundle.roster = roster;
  bundle.embedding_dim = train.front().embedding.size();
  bundle.config = config.training;
  bundle.pair_classifier =
      std::make_shared<const learners::PairClassifierModel>(learners::train_pair_classifier(train, roster, config.training));
  if (categories.size() >= 2) {
    bundle.category_classifier = std::make_shared<const learners::CategoryClassifierModel>(
        learners::train_category_classifier(train, categories, config.training));
  }
  if (mode == learners::RoutingMode::global) {
    bundle.regressor =
        std::make_shared<const learners::RegressorModel>(learners::train_regressor(train, roster, config.training));
  } else {
    if (categories.size() < 2) throw TrainingError("per-category mode needs at least two categories");
    for (const auto& label : categories) {
      std::vector<jury::LabeledExample> part;
      for (const auto& ex : train) {
        if (ex.category == label) part.push_back(ex);
      }
      if (part.size() < 2) throw TrainingError("category '" + label + "' has fewer than two examples");
      bundle.category_regressors[label] =
          std::make_shared<const learners::RegressorModel>(learners::train_regressor(part, roster, config.training));
    }
  }
  learners::save_bundle(bundle, bundle_dir);

  json summary = {{"stage", "train"},
                  {"mode", learners::to_string(mode)},
                  {"train_examples", train.size()},
                  {"categories", categories},
                  {"bundle", bundle_dir},
                  {"bundle_hash", learners::bundle_hash(bundle_dir)}};
  const auto validation = subset(all, corpus::Split::validation);
  if (!validation.empty()) {
    const router::BundleRouter router(std::make_shared<const learners::ModelBundle>(bundle),
                                      policy_for(config, bundle));
    eval::EvalOptions opts;
    opts.tau = config.policy.tau;
    opts.baselines = false;
    const auto report = eval::evaluate(router, validation, opts);
    summary["validation"] = {{"examples", validation.size()},
                             {"avg_mse", report.regressor.avg_mse},
                             {"top1", report.regressor.top1},
                             {"top1or2", report.regressor.top1or2},
                             {"selection_acc", report.rows.front().selection_acc}};
    if (report.category_accuracy) summary["validation"]["category_accuracy"] = *report.category_accuracy;
  }
  return summary;
}

json run_sweep(const AppConfig& config, const std::string& bundle_dir, const std::string& labels_path,
               const std::vector<double>& taus, const std::string& out) {
  require_file(labels_path, "labels");
  const auto bundle = load_for(config, bundle_dir);
  const auto examples = evaluation_set(jury::load_labels(labels_path, bundle->roster));
  const router::BundleRouter router(bundle, policy_for(config, *bundle));
  eval::EvalOptions opts;
  opts.tau = config.policy.tau;
  opts.taus = taus;
  opts.references = config.eval.references;
  opts.histogram_bins = config.eval.histogram_bins;
  opts.cost = {config.eval.cost_regressor, config.eval.cost_classifier};
  const auto report = eval::evaluate(router, examples, opts);
  ensure_parent(out);
  write_file_atomic(out, eval::to_json(report).dump(2) + "\n");
  write_file_atomic(csv_path_for(out), eval::rows_to_csv(report.rows));
  return {{"stage", "sweep"}, {"rows", report.rows.size()}, {"report", out}, {"csv", csv_path_for(out)}};
}

json run_eval(const AppConfig& config, const std::string& bundle_dir, const std::string& labels_path, double tau,
              const std::vector<std::string>& references, const std::optional<std::string>& out) {
  require_file(labels_path, "labels");
  const auto bundle = load_for(config, bundle_dir);
  const auto examples = evaluation_set(jury::load_labels(labels_path, bundle->roster));
  auto policy = policy_for(config, *bundle);
  policy.tau = tau;
  const router::BundleRouter router(bundle, policy);
  eval::EvalOptions opts;
  opts.tau = tau;
  opts.references = references.empty() ? config.eval.references : references;
  opts.histogram_bins = config.eval.histogram_bins;
  opts.cost = {config.eval.cost_regressor, config.eval.cost_classifier};
  const auto report = eval::evaluate(router, examples, opts);
  auto j = eval::to_json(report);
  if (out) {
    ensure_parent(*out);
    write_file_atomic(*out, j.dump(2) + "\n");
    write_file_atomic(csv_path_for(*out), eval::rows_to_csv(report.rows));
  }
  return j;
}

gateway::GatewayConfig gateway_config(const AppConfig& config) {
  gateway::GatewayConfig g;
  g.host = config.gateway.host;
  g.port = config.gateway.port;
  g.models = config.models;
  g.policy = config.policy;
  g.bundle_path = config.bundle_path;
  g.embedding = config.embedding;
  if (g.embedding.lru_capacity == 0) g.embedding.lru_capacity = 4096;
  g.upstream = config.upstream;
  g.metrics = config.gateway.metrics;
  g.admin = config.gateway.admin;
  g.cost = {config.eval.cost_regressor, config.eval.cost_classifier};
  return g;
}

}  // namespace gaprouter::pipeline
