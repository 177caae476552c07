// gaprouter: offline pipeline stages and the routing gateway.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/log.hpp"
#include "gaprouter/eval/evaluation.hpp"
#include "gaprouter/gateway/gateway.hpp"
#include "gaprouter/pipeline/commands.hpp"

namespace gp = gaprouter::pipeline;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string log_level = "info";
};

// Explicit flags are applied after --set so they win.
struct Overrides {
  std::vector<std::string> items;
  template <typename T>
  void add(const std::string& key, const std::optional<T>& v) {
    if (v) items.push_back(key + "=" + to_text(*v));
  }
  static std::string to_text(const std::string& s) { return s; }
  static std::string to_text(bool b) { return b ? "true" : "false"; }
  template <typename T>
  static std::string to_text(T v) {
    return nlohmann::json(v).dump();
  }
};

gp::AppConfig load(const Common& common, const Overrides& overrides) {
  std::vector<std::string> all = common.sets;
  all.insert(all.end(), overrides.items.begin(), overrides.items.end());
  std::optional<std::string> path;
  if (!common.config_path.empty()) path = common.config_path;
  return gp::load_app_config(path, all);
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

int serve(const gp::AppConfig& config) {
  using namespace gaprouter;
  auto gcfg = gp::gateway_config(config);
  auto shared = std::make_shared<const upstream::UpstreamClient>(gcfg.upstream);
  auto embedder = std::make_shared<upstream::EmbeddingClient>(shared, gcfg.embedding);
  auto forwarder = std::make_shared<const upstream::UpstreamClient>(gateway::forwarding_settings(gcfg.upstream));
  // Loads and checks the bundle; throws before anything is bound.
  gateway::Gateway gw(gcfg, embedder, forwarder);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGHUP);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int port = gw.bind();
  std::cout << nlohmann::json{{"listening", gcfg.host + ":" + std::to_string(port)},
                              {"bundle_hash", gw.snapshot()->bundle_hash}}
                   .dump()
            << std::endl;
  std::thread([&gw, signals] {
    for (;;) {
      int sig = 0;
      if (sigwait(&signals, &sig) != 0) continue;
      if (sig == SIGHUP) {
        try {
          gw.reload();
        } catch (const std::exception& e) {
          log::error("bundle reload failed, previous bundle kept", {{"error", e.what()}});
        }
        continue;
      }
      log::info("shutting down", {{"signal", sig}});
      gw.stop();
      return;
    }
  }).detach();
  gw.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-gap LLM router: offline pipeline and gateway"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", common.sets, "Config override key=value (dotted key), repeatable");
  app.add_option("--log-level", common.log_level, "debug|info|warn|error");

  Overrides ov;
  std::string in, out, corpus_path, responses, judgments, labels, bundle, category, tau_grid;
  std::vector<std::string> files, judges, references;
  std::optional<double> threshold, train_frac, failure_ceiling, tau;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> num_perms, parallelism;
  std::optional<std::string> mode_flag, fallback, host, out_opt;
  std::optional<int> port;
  bool no_shuffle = false;
  std::string mode = "global";

  auto* ingest = app.add_subcommand("ingest", "Read prompt JSON-lines into a corpus");
  ingest->add_option("--category", category, "Category label of every input record")->required();
  ingest->add_option("--in", files, "Input JSON-lines files")->required();
  ingest->add_option("--out", out, "Corpus file (appended when it exists)")->required();

  auto* dedup = app.add_subcommand("dedup", "Shuffle and remove near-duplicate prompts");
  dedup->add_option("--in", in)->required();
  dedup->add_option("--out", out)->required();
  dedup->add_option("--threshold", threshold, "Jaccard threshold");
  dedup->add_option("--num-perms", num_perms);
  dedup->add_flag("--no-shuffle", no_shuffle);

  auto* split = app.add_subcommand("split", "Stratified train/validation split of a corpus or labels file");
  split->add_option("--in", in)->required();
  split->add_option("--out", out)->required();
  split->add_option("--train-frac", train_frac);
  split->add_option("--seed", seed);

  auto* collect = app.add_subcommand("collect", "Ask every expert to answer every prompt");
  collect->add_option("--corpus", corpus_path)->required();
  collect->add_option("--out", out, "responses.jsonl (resumed when present)")->required();
  collect->add_option("--parallelism", parallelism);
  collect->add_option("--failure-ceiling", failure_ceiling);

  auto* judge = app.add_subcommand("judge", "Pairwise blind judging of expert responses");
  judge->add_option("--corpus", corpus_path)->required();
  judge->add_option("--responses", responses)->required();
  judge->add_option("--judges", judges, "Judge model ids (default: configured jury)");
  judge->add_option("--out", out)->required();
  judge->add_option("--parallelism", parallelism);

  auto* label = app.add_subcommand("label", "Aggregate judgments and embed prompts into labels.jsonl");
  label->add_option("--corpus", corpus_path)->required();
  label->add_option("--judgments", judgments)->required();
  label->add_option("--out", out)->required();

  auto* stats = app.add_subcommand("jury-stats", "Kappa matrix, self-win and agreement of the jury");
  stats->add_option("--judgments", judgments)->required();
  stats->add_option("--out", out_opt);

  auto* train = app.add_subcommand("train", "Train regressor(s) and classifiers into a bundle");
  train->add_option("--labels", labels)->required();
  train->add_option("--mode", mode)->check(CLI::IsMember({"global", "per-category", "per_category"}));
  train->add_option("--out", out, "Bundle directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Coverage/selection/cost over a tau grid");
  sweep->add_option("--bundle", bundle)->required();
  sweep->add_option("--labels", labels)->required();
  sweep->add_option("--tau-grid", tau_grid, "lo:hi:step");
  sweep->add_option("--out", out, "report.json (CSV written alongside)")->required();

  auto* evaluate = app.add_subcommand("eval", "Evaluate a bundle at one tau");
  evaluate->add_option("--bundle", bundle)->required();
  evaluate->add_option("--labels", labels)->required();
  evaluate->add_option("--tau", tau);
  evaluate->add_option("--reference", references, "Reference expert for win rate, repeatable");
  evaluate->add_option("--out", out_opt);

  auto* serve_cmd = app.add_subcommand("serve", "Run the routing gateway");
  serve_cmd->add_option("--bundle", bundle);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--tau", tau);
  serve_cmd->add_option("--mode", mode_flag);
  serve_cmd->add_option("--fallback", fallback);

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  const std::string stage = sub->get_name();
  try {
    using gaprouter::log::Level;
    if (common.log_level == "debug") gaprouter::log::set_min_level(Level::debug);
    else if (common.log_level == "warn") gaprouter::log::set_min_level(Level::warn);
    else if (common.log_level == "error") gaprouter::log::set_min_level(Level::error);

    ov.add("dedup.jaccard_threshold", threshold);
    ov.add("dedup.num_perms", num_perms);
    if (no_shuffle) ov.items.push_back("dedup.shuffle=false");
    ov.add("split.train_fraction", train_frac);
    ov.add("split.seed", seed);
    if (stage == "judge") ov.add("judge.parallelism", parallelism);
    else ov.add("collect.parallelism", parallelism);
    ov.add("collect.failure_ceiling", failure_ceiling);
    if (stage == "serve") {
      if (!bundle.empty()) ov.items.push_back("policy.bundle_path=" + bundle);
      ov.add("gateway.host", host);
      ov.add("gateway.port", port);
      ov.add("policy.tau", tau);
      ov.add("policy.mode", mode_flag);
      ov.add("policy.fallback", fallback);
    }
    if (!tau_grid.empty()) ov.items.push_back("eval.tau_grid=" + tau_grid);
    const auto config = load(common, ov);

    if (stage == "ingest") {
      print(gp::run_ingest(config, files, category, out));
    } else if (stage == "dedup") {
      print(gp::run_dedup(config, in, out));
    } else if (stage == "split") {
      print(gp::run_split(config, in, out));
    } else if (stage == "collect") {
      const gaprouter::upstream::UpstreamClient client(config.upstream);
      print(gp::run_collect(config, corpus_path, out, gaprouter::upstream::client_completer(client)));
    } else if (stage == "judge") {
      const gaprouter::upstream::UpstreamClient client(config.upstream);
      print(gp::run_judge(config, corpus_path, responses, judges, out, gaprouter::jury::client_judge_chat(client)));
    } else if (stage == "label") {
      auto client = std::make_shared<const gaprouter::upstream::UpstreamClient>(config.upstream);
      gaprouter::upstream::EmbeddingClient embedder(client, config.embedding);
      print(gp::run_label(config, corpus_path, judgments, out, embedder));
    } else if (stage == "jury-stats") {
      print(gp::run_jury_stats(config, judgments, out_opt));
    } else if (stage == "train") {
      const auto m = gaprouter::learners::routing_mode_from_string(mode);
      print(gp::run_train(config, labels, m, out));
    } else if (stage == "sweep") {
      print(gp::run_sweep(config, bundle, labels, gaprouter::eval::parse_tau_grid(config.eval.tau_grid), out));
    } else if (stage == "eval") {
      print(gp::run_eval(config, bundle, labels, tau.value_or(config.policy.tau), references, out_opt));
    } else if (stage == "serve") {
      return serve(config);
    }
  } catch (const std::exception& e) {
    gaprouter::log::error("stage failed", {{"stage", stage}, {"error", e.what()}});
    std::cerr << "gaprouter " << stage << ": " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
