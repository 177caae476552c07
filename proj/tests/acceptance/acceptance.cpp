// Acceptance gate: one PASS/FAIL line per criterion, exit code 1 on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "gaprouter/common/random.hpp"
#include "gaprouter/corpus/minhash.hpp"
#include "gaprouter/eval/evaluation.hpp"
#include "gaprouter/gateway/gateway.hpp"
#include "gaprouter/jury/reliability.hpp"
#include "gaprouter/jury/scoring.hpp"
#include "gaprouter/learners/bundle.hpp"
#include "gaprouter/learners/training.hpp"
#include "gaprouter/common/log.hpp"
#include "gaprouter/pipeline/commands.hpp"

using namespace gaprouter;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) {
    out.pass = false;
    out.detail += " (over time budget " + std::to_string(budget_s) + " s)";
  }
  if (!out.pass) ++failures;
  char time_buf[32];
  std::snprintf(time_buf, sizeof time_buf, "%.2fs", secs);
  std::cout << (out.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << " (" << time_buf << ") " << out.detail
            << std::endl;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

pipeline::AppConfig synthetic_config() {
  pipeline::AppConfig cfg;
  cfg.embedding.dim = 8;
  const auto roster = testing::synthetic_roster();
  for (const auto& id : roster.ids()) {
    upstream::ModelDescriptor m;
    m.id = id;
    m.route = id;
    cfg.models.push_back(m);
  }
  cfg.categories = testing::synthetic_categories();
  return cfg;
}

// labels -> split -> train (global) -> sweep; returns the sweep report.
json synthetic_pipeline(const pipeline::AppConfig& cfg, const std::vector<jury::LabeledExample>& data,
                        const fs::path& dir, const std::string& grid) {
  fs::create_directories(dir);
  jury::save_labels((dir / "labels.jsonl").string(), data, cfg.roster());
  pipeline::run_split(cfg, (dir / "labels.jsonl").string(), (dir / "split.jsonl").string());
  pipeline::run_train(cfg, (dir / "split.jsonl").string(), learners::RoutingMode::global, (dir / "bundle").string());
  pipeline::run_sweep(cfg, (dir / "bundle").string(), (dir / "split.jsonl").string(), eval::parse_tau_grid(grid),
                      (dir / "sweep.json").string());
  return json::parse(slurp(dir / "sweep.json"));
}

}  // namespace

int main() {
  log::set_min_level(log::Level::error);

  criterion(1, "win-rate worked example = 62.5%", 1, [] {
    const std::vector<std::vector<double>> actual(8, {0.3, 0.5, 0.2});
    const std::vector<std::size_t> picks = {0, 0, 0, 0, 1, 1, 1, 2};
    const double rate = eval::win_rate(picks, actual, 0) * 100.0;
    return Outcome{rate == 62.5, "rate=" + num(rate)};
  });

  criterion(2, "aggregation worked example 3.5 vs 0.5", 1, [] {
    const Roster ab({"A", "B"});
    std::vector<jury::PairJudgment> js;
    for (double a : {1.0, 1.0, 1.0, 0.5}) js.push_back({"p", "A", "B", "j" + std::to_string(js.size()), a, jury::Presentation::ij});
    const auto board = jury::aggregate(js, ab, "p");
    const double sa = board.score_against(0, 1), sb = board.score_against(1, 0);
    return Outcome{sa == 3.5 && sb == 0.5, "A=" + num(sa) + " B=" + num(sb)};
  });

  criterion(3, "pair counting and all-pairs call count", 1, [] {
    const Roster r({"a", "b", "c", "d"});
    const testing::StubPair clf(r, 1, [](auto, std::size_t a, std::size_t b) { return a < b ? 0.6 : 0.4; });
    const double e[1] = {0};
    const auto all = router::baseline_all_pairs(e, clf, 4);
    const auto p4 = jury::make_pairs(4).size(), p5 = jury::make_pairs(5).size();
    return Outcome{p4 == 6 && p5 == 10 && all.classifier_calls == 6,
                   "M4=" + std::to_string(p4) + " M5=" + std::to_string(p5) + " calls=" + std::to_string(all.classifier_calls)};
  });

  criterion(4, "ridge matches independent normal-equations solve (20 datasets)", 10, [] {
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto n = 1 + rng.below(100), d = 1 + rng.below(16), m = 1 + rng.below(5);
      const Eigen::MatrixXd x = random_matrix(rng, n, d), y = random_matrix(rng, n, m);
      const double lambda = 0.05 + rng.uniform(0.0, 3.0);
      const auto model = learners::train_ridge(x, y, lambda);
      Eigen::MatrixXd a(n, d + 1);
      a << x, Eigen::VectorXd::Ones(n);
      Eigen::MatrixXd lhs = a.transpose() * a;
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(d); ++k) lhs(k, k) += lambda;
      const Eigen::MatrixXd beta = lhs.fullPivLu().solve(a.transpose() * y);
      worst = std::max(worst, (model.weights - beta.topRows(d)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (model.intercept - beta.row(d).transpose()).cwiseAbs().maxCoeff());
    }
    return Outcome{worst < 1e-8, "max_abs_diff=" + num(worst)};
  });

  criterion(5, "MLP analytic vs finite-difference gradients", 10, [] {
    Rng rng(505);
    double worst = 0.0;
    for (int net = 0; net < 5; ++net) {
      auto mlp = learners::Mlp::initialize(3, {3}, 2, learners::MlpHead::regression, 500 + net);
      const Eigen::MatrixXd x = random_matrix(rng, 1, 3), y = random_matrix(rng, 1, 2);
      std::vector<learners::DenseLayer> grads;
      mlp.loss_and_gradient(x, y, grads);
      const auto analytic = learners::Mlp::flatten(grads);
      auto params = mlp.flat_parameters();
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double keep = params[k], h = 1e-6;
        params[k] = keep + h;
        mlp.set_flat_parameters(params);
        const double up = mlp.loss(x, y);
        params[k] = keep - h;
        mlp.set_flat_parameters(params);
        const double down = mlp.loss(x, y);
        params[k] = keep;
        mlp.set_flat_parameters(params);
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(numeric - analytic[k]) / std::max({std::abs(numeric), std::abs(analytic[k]), 1e-7}));
      }
    }
    return Outcome{worst < 1e-4, "max_rel_err=" + num(worst)};
  });

  criterion(6, "normalization sums to 1 and scores conserve judgments (1000 boards)", 5, [] {
    Rng rng(606);
    double worst_sum = 0.0;
    bool conserved = true;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t m = 2 + rng.below(5);
      std::vector<std::string> ids;
      for (std::size_t e = 0; e < m; ++e) ids.push_back("e" + std::to_string(e));
      const Roster r(ids);
      std::vector<jury::PairJudgment> js;
      for (const auto& pr : jury::make_pairs(m)) {
        const auto n = 1 + rng.below(5);
        for (std::uint64_t q = 0; q < n; ++q) {
          js.push_back({"p", ids[pr.i], ids[pr.j], "j" + std::to_string(q), 0.5 * static_cast<double>(rng.below(3)),
                        jury::Presentation::ij});
        }
      }
      const auto board = jury::aggregate(js, r, "p");
      const double total = std::accumulate(board.global_scores.begin(), board.global_scores.end(), 0.0);
      conserved = conserved && total == static_cast<double>(board.counted_total()) && board.counted_total() == js.size();
      const auto n = jury::normalize(board).scores;
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(n.begin(), n.end(), 0.0) - 1.0));
    }
    return Outcome{worst_sum <= 1e-9 && conserved,
                   "max|sum-1|=" + num(worst_sum) + " conserved=" + (conserved ? "yes" : "no")};
  });

  criterion(7, "Cohen's kappa checks", 10, [] {
    using L = jury::VerdictLabel;
    const std::vector<L> a = {L::prefer_i, L::prefer_i, L::tie, L::prefer_j};
    const std::vector<L> b = {L::prefer_i, L::tie, L::tie, L::prefer_j};
    const double worked = jury::cohen_kappa(a, b);
    const double same = jury::cohen_kappa(a, a);
    Rng rng(707);
    std::vector<L> x(10000), y(10000);
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = static_cast<L>(rng.below(3));
      y[k] = static_cast<L>(rng.below(3));
    }
    const double random = jury::cohen_kappa(x, y);
    return Outcome{same == 1.0 && std::abs(worked - 0.625) < 1e-12 && std::abs(random) < 0.05,
                   "identical=" + num(same) + " worked=" + num(worked) + " random=" + num(random)};
  });

  criterion(8, "routing boundary equivalences (500 prompts)", 5, [] {
    Rng rng(808);
    const Roster roster({"a", "b", "c", "d"});
    std::vector<jury::LabeledExample> data;
    std::vector<std::vector<double>> predicted;
    for (int k = 0; k < 500; ++k) {
      jury::LabeledExample ex;
      ex.embedding = {static_cast<double>(k)};
      ex.scores.resize(4);
      for (auto& v : ex.scores) v = static_cast<double>(rng.below(10));
      std::vector<double> p(4);
      for (auto& v : p) v = static_cast<double>(rng.below(20)) / 20.0;
      predicted.push_back(p);
      data.push_back(ex);
    }
    const testing::StubRegressor reg(roster, 1, [&](std::span<const double> e) { return predicted[static_cast<std::size_t>(e[0])]; });
    const testing::StubPair clf(roster, 1, [](auto, std::size_t a, std::size_t b) { return a > b ? 0.7 : 0.35; });
    std::vector<router::RoutingDecision> d0, d1;
    std::vector<std::vector<double>> actual;
    bool top1_equal = true;
    for (const auto& ex : data) {
      d0.push_back(router::route(ex.embedding, reg, &clf, router::RouterPolicy{0.0}));
      d1.push_back(router::route(ex.embedding, reg, &clf, router::RouterPolicy{1.0}));
      top1_equal = top1_equal && d0.back().chosen == router::baseline_top1(ex.embedding, reg) && !d0.back().fallback_used;
      actual.push_back(ex.scores);
    }
    std::size_t consulted = 0;
    for (const auto& d : d1) consulted += d.fallback_used;
    const auto metrics = learners::evaluate_regressor(reg, data);
    const double c0 = eval::coverage_accuracy(d0, actual), c1 = eval::coverage_accuracy(d1, actual);
    const bool ok = top1_equal && consulted == 500 && c0 == metrics.top1 && c1 == metrics.top1or2;
    return Outcome{ok, "tau0==top1:" + std::string(top1_equal ? "yes" : "no") + " consulted@1=" + std::to_string(consulted) +
                           "/500 cov0=" + num(c0) + " top1=" + num(metrics.top1) + " cov1=" + num(c1) +
                           " top1or2=" + num(metrics.top1or2)};
  });

  criterion(9, "sweep monotonicity and metric sandwich", 10, [] {
    Rng rng(909);
    const auto grid = eval::parse_tau_grid("0.01:0.20:0.01");
    std::size_t violations = 0, datasets = 50;
    for (std::size_t trial = 0; trial < datasets; ++trial) {
      std::vector<std::vector<double>> actual;
      std::vector<eval::PromptTrace> traces;
      double top1 = 0, top12 = 0;
      const std::size_t n = 30 + rng.below(200);
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> s(4), p(4);
        for (auto& v : s) v = static_cast<double>(rng.below(6));
        for (auto& v : p) v = rng.uniform(0.0, 0.4);
        actual.push_back(s);
        const double e[1] = {0};
        eval::PromptTrace t;
        t.confident = router::decide(e, p, nullptr, router::RouterPolicy{0.0});
        t.classifier_choice = rng.below(2) ? t.confident.top1 : t.confident.top2;
        t.classifier_probability = 0.6;
        traces.push_back(t);
        const auto best = jury::best_expert(s);
        top1 += t.confident.top1 == best;
        top12 += t.confident.top1 == best || t.confident.top2 == best;
      }
      top1 /= static_cast<double>(n);
      top12 /= static_cast<double>(n);
      const auto rows = eval::sweep(traces, actual, grid);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        violations += !(top1 <= rows[k].coverage_acc && rows[k].coverage_acc <= top12);
        violations += !(rows[k].selection_acc <= rows[k].coverage_acc);
        if (k > 0) {
          violations += rows[k].coverage_acc < rows[k - 1].coverage_acc;
          violations += rows[k].fallback_fraction < rows[k - 1].fallback_fraction;
        }
      }
    }
    return Outcome{violations == 0, std::to_string(datasets) + " datasets, violations=" + std::to_string(violations)};
  });

  criterion(10, "cost model exactness and gateway fallback fraction", 5, [] {
    const std::vector<double> gaps = {0.02, 0.05, 0.09, 0.15};
    const double cost = router::expected_cost(gaps, 0.10);
    const Roster roster({"a", "b", "c", "d"});
    gateway::GatewayConfig cfg;
    cfg.port = 0;
    for (const auto& id : roster.ids()) {
      upstream::ModelDescriptor m;
      m.id = id;
      m.route = id;
      cfg.models.push_back(m);
    }
    cfg.policy.tau = 0.10;
    auto embedder = std::make_shared<testing::TableEmbedder>(4);
    gateway::Gateway gw(cfg, embedder, nullptr, testing::identity_bundle(roster), "fixture");
    // Ten fixture prompts; four have a gap below tau.
    const std::vector<double> fixture_gaps = {0.02, 0.05, 0.09, 0.0625, 0.1, 0.15, 0.25, 0.5, 0.375, 0.125};
    std::size_t below = 0;
    for (std::size_t k = 0; k < fixture_gaps.size(); ++k) {
      const auto prompt = "q" + std::to_string(k);
      embedder->table[prompt] = {0.1 + fixture_gaps[k], 0.1, 0.0, 0.0};
      below += router::gap(embedder->table[prompt]).gap < 0.10;
      if (gw.handle_route(json{{"prompt", prompt}}.dump()).status != 200) return Outcome{false, "route failed"};
    }
    std::vector<double> realized;
    for (const auto& [p, v] : embedder->table) realized.push_back(router::gap(v).gap);
    const auto m = json::parse(gw.handle_metrics().body);
    const double fraction = m["fallback_fraction"].get<double>();
    const double oracle = static_cast<double>(below) / 10.0;
    const bool ok = cost == 1.75 && fraction == oracle &&
                    m["expected_cost"].get<double>() == router::expected_cost(realized, 0.10) && m["requests"] == 10;
    return Outcome{ok, "E[C]=" + num(cost) + " metrics_fraction=" + num(fraction) + " Pr[g<tau]=" + num(oracle) +
                           " metrics_cost=" + num(m["expected_cost"].get<double>())};
  });

  criterion(11, "synthetic end-to-end: category, top-1-or-2, confidence routing beats top-1", 120, [] {
    testing::TempDir dir;
    const auto cfg = synthetic_config();
    const auto data = testing::synthetic_dataset({});
    const auto report = synthetic_pipeline(cfg, data, dir.path() / "run", "0.00:0.20:0.01");
    const double cat = report["category_accuracy"].get<double>();
    const double top12 = report["regressor"]["top1or2"].get<double>();
    const double top1 = report["regressor"]["top1"].get<double>();
    double sel0 = -1, sel10 = -1;
    for (const auto& row : report["rows"]) {
      if (row["tau"].get<double>() == 0.0) sel0 = row["selection_acc"].get<double>();
      if (row["tau"].get<double>() == 0.1) sel10 = row["selection_acc"].get<double>();
    }
    const bool ok = cat >= 0.95 && top12 >= 0.90 && sel10 > sel0 && sel0 == top1;
    return Outcome{ok, "n=" + std::to_string(report["prompts"].get<std::size_t>()) + " category_acc=" + num(cat) +
                           " top1=" + num(top1) + " top1or2=" + num(top12) + " selection@0=" + num(sel0) +
                           " selection@0.10=" + num(sel10)};
  });

  criterion(12, "MinHash: exact duplicates removed, estimate within 0.10 of exact Jaccard", 30, [] {
    Rng rng(1212);
    std::vector<std::string> vocab;
    for (int w = 0; w < 400; ++w) vocab.push_back("w" + std::to_string(w));
    auto text = [&](std::size_t words) {
      std::string s;
      for (std::size_t k = 0; k < words; ++k) s += (k ? " " : "") + vocab[rng.below(vocab.size())];
      return s;
    };
    // Exact duplicates interleaved with distinct prompts.
    std::vector<corpus::PromptRecord> records;
    std::size_t dups = 0;
    for (int k = 0; k < 100; ++k) {
      const auto t = text(30);
      records.push_back({"p" + std::to_string(records.size()), t, "coding", "s", corpus::Split::unassigned});
      if (k % 3 == 0) {
        records.push_back({"p" + std::to_string(records.size()), t, "coding", "s", corpus::Split::unassigned});
        ++dups;
      }
    }
    const auto result = corpus::dedup(records);
    std::set<std::string> texts;
    for (const auto& r : result.kept) texts.insert(r.text);
    const bool dup_ok = texts.size() == result.kept.size() && result.removed.size() >= dups;

    // 200 pairs spanning the similarity range: edit a fraction of words.
    double worst = 0.0;
    std::size_t within = 0;
    for (int pair = 0; pair < 200; ++pair) {
      auto words = corpus::normalized_words(text(120));
      std::string a, b;
      const double edit = static_cast<double>(pair % 20) / 20.0;
      for (std::size_t k = 0; k < words.size(); ++k) {
        a += (k ? " " : "") + words[k];
        b += (k ? " " : "") + (rng.uniform(0, 1) < edit ? vocab[rng.below(vocab.size())] + "x" : words[k]);
      }
      const auto sa = corpus::shingle_hashes(a, 3), sb = corpus::shingle_hashes(b, 3);
      std::set<std::uint64_t> ua(sa.begin(), sa.end()), inter;
      std::set<std::uint64_t> un(sa.begin(), sa.end());
      for (auto h : sb) {
        if (ua.count(h)) inter.insert(h);
        un.insert(h);
      }
      const double exact = static_cast<double>(inter.size()) / static_cast<double>(un.size());
      const double est = corpus::estimate_jaccard(corpus::minhash_signature(a), corpus::minhash_signature(b));
      worst = std::max(worst, std::abs(est - exact));
      within += std::abs(est - exact) <= 0.10;
    }
    return Outcome{dup_ok && within == 200, "exact_dups_removed=" + std::string(dup_ok ? "yes" : "no") +
                                                " within_0.10=" + std::to_string(within) + "/200 max_err=" + num(worst)};
  });

  criterion(13, "self-win of a uniformly random judge is 0.25 +- 0.03", 30, [] {
    const Roster roster({"a", "b", "c", "d"});
    Rng rng(1313);
    std::vector<jury::PairJudgment> js;
    for (int p = 0; p < 5000; ++p) {
      // A random preference order; verdicts follow it.
      std::vector<std::size_t> order = {0, 1, 2, 3};
      rng.shuffle(order);
      std::vector<std::size_t> pos(4);
      for (std::size_t k = 0; k < 4; ++k) pos[order[k]] = k;
      for (const auto& pr : jury::make_pairs(4)) {
        js.push_back({"p" + std::to_string(p), roster.id(pr.i), roster.id(pr.j), "c", pos[pr.i] < pos[pr.j] ? 1.0 : 0.0,
                      jury::Presentation::ij});
      }
    }
    const double rate = jury::self_win_rate(js, "c", "c", roster);
    return Outcome{std::abs(rate - 0.25) <= 0.03, "rate=" + num(rate)};
  });

  criterion(14, "determinism and bundle round-trip", 60, [] {
    testing::TempDir dir;
    const auto cfg = synthetic_config();
    const auto data = testing::synthetic_dataset({.n = 300});
    synthetic_pipeline(cfg, data, dir.path() / "a", "0.01:0.20:0.01");
    synthetic_pipeline(cfg, data, dir.path() / "b", "0.01:0.20:0.01");
    bool identical = true;
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir.path() / "a")) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), dir.path() / "a");
      identical = identical && slurp(entry.path()) == slurp(dir.path() / "b" / rel);
      ++compared;
    }
    const auto loaded = std::make_shared<learners::ModelBundle>(learners::load_bundle((dir.path() / "a" / "bundle").string()));
    learners::save_bundle(*loaded, (dir.path() / "resaved").string());
    const auto again = learners::load_bundle((dir.path() / "resaved").string());
    bool bit_identical = slurp(dir.path() / "a" / "bundle" / "manifest.json") == slurp(dir.path() / "resaved" / "manifest.json");
    for (const auto& probe : testing::synthetic_dataset({.n = 10, .seed = 99})) {
      bit_identical = bit_identical && loaded->regressor->predict_scores(probe.embedding) == again.regressor->predict_scores(probe.embedding);
      bit_identical = bit_identical && loaded->pair_classifier->probability_beats(probe.embedding, 1, 3) ==
                                           again.pair_classifier->probability_beats(probe.embedding, 1, 3);
    }
    return Outcome{identical && bit_identical && compared >= 8,
                   "files_compared=" + std::to_string(compared) + " byte_identical=" + (identical ? "yes" : "no") +
                       " roundtrip_bit_identical=" + (bit_identical ? "yes" : "no")};
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
