#include "gaprouter/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <type_traits>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/jsonl.hpp"

namespace gaprouter::pipeline {

using nlohmann::json;

corpus::CategorySet AppConfig::category_set() const {
  return categories.empty() ? corpus::CategorySet::defaults() : corpus::CategorySet(categories);
}

Roster AppConfig::roster() const { return upstream::expert_roster(models); }

std::vector<upstream::ModelDescriptor> AppConfig::judges() const {
  std::vector<upstream::ModelDescriptor> out;
  for (const auto& m : models) {
    if (m.judge) out.push_back(m);
  }
  // No explicit jury: the experts judge each other.
  return out.empty() ? experts() : out;
}

std::vector<upstream::ModelDescriptor> AppConfig::experts() const {
  std::vector<upstream::ModelDescriptor> out;
  for (const auto& m : models) {
    if (m.expert) out.push_back(m);
  }
  return out;
}

json to_json(const AppConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) models.push_back(upstream::to_json(m));
  json upstream = {{"base_url", c.upstream.base_url},
                   {"api_key_env", c.upstream.api_key_env},
                   {"timeout_ms", c.upstream.timeout.count()},
                   {"system_prompt", c.upstream.system_prompt},
                   {"retry",
                    {{"max_attempts", c.upstream.retry.max_attempts},
                     {"base_delay_ms", c.upstream.retry.base_delay.count()},
                     {"max_delay_ms", c.upstream.retry.max_delay.count()},
                     {"jitter", c.upstream.retry.jitter}}}};
  upstream["max_tokens"] = c.upstream.max_tokens ? json(*c.upstream.max_tokens) : json(nullptr);
  return {
      {"upstream", upstream},
      {"embedding",
       {{"model_tag", c.embedding.model_tag},
        {"dim", c.embedding.dim},
        {"cache_dir", c.embedding.cache_dir},
        {"lru_capacity", c.embedding.lru_capacity}}},
      {"models", models},
      {"categories", c.categories.empty() ? corpus::CategorySet::defaults().labels() : c.categories},
      {"dedup",
       {{"num_perms", c.dedup.minhash.num_perms},
        {"shingle_size", c.dedup.minhash.shingle_size},
        {"seed", c.dedup.minhash.seed},
        {"bands", c.dedup.bands},
        {"rows", c.dedup.rows},
        {"jaccard_threshold", c.dedup.jaccard_threshold},
        {"shuffle", c.shuffle},
        {"shuffle_seed", c.shuffle_seed}}},
      {"split", {{"train_fraction", c.split.train_fraction}, {"seed", c.split.seed}}},
      {"collect",
       {{"parallelism", c.collect.parallelism},
        {"failure_ceiling", c.collect.failure_ceiling},
        {"temperature", c.collect.temperature}}},
      {"judge",
       {{"template", c.judge.prompt_template},
        {"reask_suffix", c.judge.reask_suffix},
        {"seed", c.judge.seed},
        {"temperature", c.judge.temperature},
        {"exclude_self_pairs", c.judge.exclude_self_pairs},
        {"parallelism", c.judge.parallelism}}},
      {"training", learners::to_json(c.training)},
      {"policy",
       {{"mode", learners::to_string(c.policy.mode)},
        {"tau", c.policy.tau},
        {"fallback", router::to_string(c.policy.fallback)},
        {"bundle_path", c.bundle_path}}},
      {"gateway",
       {{"host", c.gateway.host},
        {"port", c.gateway.port},
        {"metrics", c.gateway.metrics},
        {"admin", c.gateway.admin}}},
      {"eval",
       {{"tau_grid", c.eval.tau_grid},
        {"references", c.eval.references},
        {"histogram_bins", c.eval.histogram_bins},
        {"cost_regressor", c.eval.cost_regressor},
        {"cost_classifier", c.eval.cost_classifier}}},
  };
}

namespace {

const json& block(const json& j, const char* name) {
  static const json empty = json::object();
  if (!j.contains(name)) return empty;
  const auto& b = j[name];
  if (!b.is_object()) throw ConfigError(std::string("config block '") + name + "' must be an object");
  return b;
}

template <typename T>
void read(const json& b, const char* key, T& out, const char* block_name) {
  if (!b.contains(key) || b[key].is_null()) return;
  if constexpr (std::is_same_v<T, std::string>) {
    // Env and flag values that look numeric arrive parsed.
    if (b[key].is_number() || b[key].is_boolean()) {
      out = b[key].dump();
      return;
    }
  }
  try {
    out = b[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + block_name + "." + key + "' has the wrong type");
  }
}

}  // namespace

AppConfig app_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  AppConfig c;

  const auto& up = block(j, "upstream");
  read(up, "base_url", c.upstream.base_url, "upstream");
  read(up, "api_key_env", c.upstream.api_key_env, "upstream");
  read(up, "system_prompt", c.upstream.system_prompt, "upstream");
  std::int64_t timeout_ms = c.upstream.timeout.count();
  read(up, "timeout_ms", timeout_ms, "upstream");
  c.upstream.timeout = std::chrono::milliseconds(timeout_ms);
  if (up.contains("max_tokens") && !up["max_tokens"].is_null()) {
    int mt = 0;
    read(up, "max_tokens", mt, "upstream");
    c.upstream.max_tokens = mt;
  }
  const auto& retry = block(up, "retry");
  read(retry, "max_attempts", c.upstream.retry.max_attempts, "upstream.retry");
  std::int64_t base_ms = c.upstream.retry.base_delay.count(), max_ms = c.upstream.retry.max_delay.count();
  read(retry, "base_delay_ms", base_ms, "upstream.retry");
  read(retry, "max_delay_ms", max_ms, "upstream.retry");
  read(retry, "jitter", c.upstream.retry.jitter, "upstream.retry");
  c.upstream.retry.base_delay = std::chrono::milliseconds(base_ms);
  c.upstream.retry.max_delay = std::chrono::milliseconds(max_ms);
  if (c.upstream.retry.max_attempts < 1) throw ConfigError("upstream.retry.max_attempts must be >= 1");

  const auto& emb = block(j, "embedding");
  read(emb, "model_tag", c.embedding.model_tag, "embedding");
  read(emb, "dim", c.embedding.dim, "embedding");
  read(emb, "cache_dir", c.embedding.cache_dir, "embedding");
  read(emb, "lru_capacity", c.embedding.lru_capacity, "embedding");
  if (c.embedding.dim == 0) throw ConfigError("embedding.dim must be > 0");

  if (j.contains("models")) c.models = upstream::models_from_json(j["models"]);
  if (j.contains("categories")) {
    read(j, "categories", c.categories, "root");
    (void)corpus::CategorySet(c.categories);
  }

  const auto& dd = block(j, "dedup");
  read(dd, "num_perms", c.dedup.minhash.num_perms, "dedup");
  read(dd, "shingle_size", c.dedup.minhash.shingle_size, "dedup");
  read(dd, "seed", c.dedup.minhash.seed, "dedup");
  read(dd, "bands", c.dedup.bands, "dedup");
  read(dd, "rows", c.dedup.rows, "dedup");
  read(dd, "jaccard_threshold", c.dedup.jaccard_threshold, "dedup");
  read(dd, "shuffle", c.shuffle, "dedup");
  read(dd, "shuffle_seed", c.shuffle_seed, "dedup");
  if (c.dedup.bands * c.dedup.rows > c.dedup.minhash.num_perms) {
    throw ConfigError("dedup.bands * dedup.rows must not exceed dedup.num_perms");
  }

  const auto& sp = block(j, "split");
  read(sp, "train_fraction", c.split.train_fraction, "split");
  read(sp, "seed", c.split.seed, "split");
  if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction must be in (0, 1)");
  }

  const auto& co = block(j, "collect");
  read(co, "parallelism", c.collect.parallelism, "collect");
  read(co, "failure_ceiling", c.collect.failure_ceiling, "collect");
  read(co, "temperature", c.collect.temperature, "collect");
  if (c.collect.parallelism == 0) throw ConfigError("collect.parallelism must be > 0");
  if (!(c.collect.failure_ceiling >= 0.0 && c.collect.failure_ceiling <= 1.0)) {
    throw ConfigError("collect.failure_ceiling must be in [0, 1]");
  }

  const auto& jd = block(j, "judge");
  read(jd, "template", c.judge.prompt_template, "judge");
  read(jd, "reask_suffix", c.judge.reask_suffix, "judge");
  read(jd, "seed", c.judge.seed, "judge");
  read(jd, "temperature", c.judge.temperature, "judge");
  read(jd, "exclude_self_pairs", c.judge.exclude_self_pairs, "judge");
  read(jd, "parallelism", c.judge.parallelism, "judge");
  for (const char* slot : {"{prompt}", "{response_a}", "{response_b}"}) {
    if (c.judge.prompt_template.find(slot) == std::string::npos) {
      throw ConfigError(std::string("judge.template lacks ") + slot);
    }
  }
  if (c.judge.parallelism == 0) throw ConfigError("judge.parallelism must be > 0");

  if (j.contains("training")) c.training = learners::training_config_from_json(j["training"]);

  const auto& po = block(j, "policy");
  if (po.contains("mode")) c.policy.mode = learners::routing_mode_from_string(po["mode"].get<std::string>());
  read(po, "tau", c.policy.tau, "policy");
  if (po.contains("fallback")) c.policy.fallback = router::fallback_from_string(po["fallback"].get<std::string>());
  read(po, "bundle_path", c.bundle_path, "policy");
  c.policy.validate();

  const auto& gw = block(j, "gateway");
  read(gw, "host", c.gateway.host, "gateway");
  read(gw, "port", c.gateway.port, "gateway");
  read(gw, "metrics", c.gateway.metrics, "gateway");
  read(gw, "admin", c.gateway.admin, "gateway");
  if (c.gateway.port < 0 || c.gateway.port > 65535) throw ConfigError("gateway.port out of range");

  const auto& ev = block(j, "eval");
  read(ev, "tau_grid", c.eval.tau_grid, "eval");
  read(ev, "references", c.eval.references, "eval");
  read(ev, "histogram_bins", c.eval.histogram_bins, "eval");
  read(ev, "cost_regressor", c.eval.cost_regressor, "eval");
  read(ev, "cost_classifier", c.eval.cost_classifier, "eval");
  return c;
}

std::string env_var_for(std::string_view dotted_key) {
  std::string out = "GAPROUTER_";
  for (char ch : dotted_key) {
    out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return out;
}

void set_dotted(json& target, std::string_view dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("empty config key");
  json* node = &target;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string part(dotted_key.substr(start, dot == std::string_view::npos ? dotted_key.npos : dot - start));
    if (part.empty()) throw ConfigError("bad config key '" + std::string(dotted_key) + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string_view::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

void scalar_keys(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      scalar_keys(*it, key, out);
    } else if (!it->is_array()) {
      out.push_back(key);
    }
  }
}

}  // namespace

AppConfig load_app_config(const std::optional<std::string>& path, const std::vector<std::string>& flag_overrides,
                          const EnvLookup& env) {
  json merged = json::object();
  if (path) {
    const json parsed = json::parse(read_file(*path), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) throw ConfigError("config file " + *path + " is not a JSON object");
    merged = parsed;
  }
  std::vector<std::string> keys;
  scalar_keys(to_json(AppConfig{}), "", keys);
  // Array keys that are still worth overriding from the environment.
  keys.push_back("eval.references");
  keys.push_back("categories");
  for (const auto& key : keys) {
    if (auto v = env(env_var_for(key))) set_dotted(merged, key, *v);
  }
  for (const auto& kv : flag_overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + kv + "' is not key=value");
    set_dotted(merged, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return app_config_from_json(merged);
}

}  // namespace gaprouter::pipeline
