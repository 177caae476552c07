#include "gaprouter/learners/bundle.hpp"

#include <filesystem>

#include "gaprouter/common/binary.hpp"
#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/jsonl.hpp"

namespace gaprouter::learners {
namespace fs = std::filesystem;
namespace {

constexpr double kPayloadMagic = 0x47525442;  // "GRTB"

enum class PayloadType { regressor = 1, pair_classifier = 2, category_classifier = 3 };

std::string payload_header(PayloadType type, ModelKind kind) {
  std::string out;
  append_f64le(out, kPayloadMagic);
  append_f64le(out, static_cast<double>(kBundleFormatVersion));
  append_f64le(out, static_cast<double>(static_cast<int>(type)));
  append_f64le(out, static_cast<double>(static_cast<int>(kind)));
  return out;
}

ModelKind read_header(F64Reader& in, PayloadType expected) {
  if (in.next() != kPayloadMagic) throw BundleError("model payload has a bad magic number");
  if (in.next() != static_cast<double>(kBundleFormatVersion)) throw BundleError("model payload version mismatch");
  if (in.next_count(16) != static_cast<std::size_t>(expected)) throw BundleError("model payload has the wrong type");
  const auto kind = in.next_count(2);
  return static_cast<ModelKind>(kind);
}

template <typename Variant>
void serialize_params(const Variant& params, std::string& out) {
  std::visit([&](const auto& model) { serialize(model, out); }, params);
}

std::string encode(const RegressorModel& m) {
  auto out = payload_header(PayloadType::regressor, m.kind());
  serialize_params(m.params(), out);
  return out;
}

std::string encode(const PairClassifierModel& m) {
  auto out = payload_header(PayloadType::pair_classifier, m.kind());
  serialize_params(m.params(), out);
  return out;
}

std::string encode(const CategoryClassifierModel& m) {
  auto out = payload_header(PayloadType::category_classifier, m.kind());
  serialize_params(m.params(), out);
  return out;
}

RegressorModel decode_regressor(const std::string& bytes, const Roster& roster, std::size_t dim) {
  F64Reader in(bytes);
  const auto kind = read_header(in, PayloadType::regressor);
  RegressorModel::Params params = [&]() -> RegressorModel::Params {
    switch (kind) {
      case ModelKind::ridge: return deserialize_ridge(in);
      case ModelKind::random_forest: return deserialize_forest(in);
      case ModelKind::mlp: return deserialize_mlp(in);
    }
    throw BundleError("unknown regressor kind");
  }();
  if (!in.done()) throw BundleError("regressor payload has trailing data");
  return RegressorModel(kind, roster, dim, std::move(params));
}

PairClassifierModel decode_pair(const std::string& bytes, const Roster& roster, std::size_t dim) {
  F64Reader in(bytes);
  const auto kind = read_header(in, PayloadType::pair_classifier);
  PairClassifierModel::Params params = [&]() -> PairClassifierModel::Params {
    if (kind == ModelKind::random_forest) return deserialize_forest(in);
    if (kind == ModelKind::mlp) return deserialize_mlp(in);
    throw BundleError("pair classifier must be random_forest or mlp");
  }();
  if (!in.done()) throw BundleError("pair classifier payload has trailing data");
  return PairClassifierModel(kind, roster, dim, std::move(params));
}

CategoryClassifierModel decode_category(const std::string& bytes, const std::vector<std::string>& labels,
                                        std::size_t dim) {
  F64Reader in(bytes);
  const auto kind = read_header(in, PayloadType::category_classifier);
  CategoryClassifierModel::Params params = [&]() -> CategoryClassifierModel::Params {
    if (kind == ModelKind::random_forest) return deserialize_forest(in);
    if (kind == ModelKind::mlp) return deserialize_mlp(in);
    throw BundleError("category classifier must be random_forest or mlp");
  }();
  if (!in.done()) throw BundleError("category classifier payload has trailing data");
  return CategoryClassifierModel(kind, labels, dim, std::move(params));
}

std::size_t variant_width(const auto& params, bool want_input) {
  return std::visit(
      [&](const auto& model) -> std::size_t {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, RidgeModel>) {
          return static_cast<std::size_t>(want_input ? model.weights.rows() : model.weights.cols());
        } else if constexpr (std::is_same_v<T, RandomForest>) {
          return want_input ? model.n_features() : model.n_outputs();
        } else {
          return want_input ? model.input_dim() : model.output_dim();
        }
      },
      params);
}

}  // namespace

std::string to_string(RoutingMode mode) { return mode == RoutingMode::global ? "global" : "per_category"; }

RoutingMode routing_mode_from_string(const std::string& name) {
  if (name == "global") return RoutingMode::global;
  if (name == "per_category" || name == "per-category" || name == "category_aware") return RoutingMode::per_category;
  throw ConfigError("unknown routing mode '" + name + "'");
}

void ModelBundle::validate() const {
  if (roster.size() < 2) throw BundleError("bundle roster needs at least two experts");
  if (embedding_dim == 0) throw BundleError("bundle embedding dim is zero");
  if (!pair_classifier) throw BundleError("bundle has no pair classifier");
  const auto m = roster.size();
  auto check_regressor = [&](const RegressorModel& r, const std::string& name) {
    if (!(r.roster() == roster)) throw BundleError(name + " roster differs from bundle roster");
    if (r.input_dim() != embedding_dim || variant_width(r.params(), true) != embedding_dim) {
      throw BundleError(name + " input dim differs from bundle embedding dim");
    }
    if (variant_width(r.params(), false) != m) throw BundleError(name + " output width differs from roster size");
  };
  if (!(pair_classifier->roster() == roster)) throw BundleError("pair classifier roster differs from bundle roster");
  if (variant_width(pair_classifier->params(), true) != embedding_dim + 2 * m) {
    throw BundleError("pair classifier input width does not match embedding dim + 2 x roster");
  }
  if (category_classifier && variant_width(category_classifier->params(), true) != embedding_dim) {
    throw BundleError("category classifier input dim differs from bundle embedding dim");
  }
  if (mode == RoutingMode::global) {
    if (!regressor) throw BundleError("global bundle has no regressor");
    check_regressor(*regressor, "regressor");
    return;
  }
  if (!category_classifier) throw BundleError("per-category bundle has no category classifier");
  for (const auto& label : category_classifier->labels()) {
    const auto it = category_regressors.find(label);
    if (it == category_regressors.end() || !it->second) {
      throw BundleError("category '" + label + "' has no regressor");
    }
    check_regressor(*it->second, "regressor for category '" + label + "'");
  }
}

void save_bundle(const ModelBundle& bundle, const std::string& dir) {
  bundle.validate();
  fs::create_directories(dir);
  json files = json::object();
  json kinds = json::object();
  auto put = [&](const std::string& name, const std::string& payload, ModelKind kind) {
    const std::string file = name + ".f64";
    write_file_atomic((fs::path(dir) / file).string(), payload);
    files[name] = {{"file", file}, {"sha256", sha256_hex(payload)}, {"bytes", payload.size()}};
    kinds[name] = to_string(kind);
  };
  put("pair_classifier", encode(*bundle.pair_classifier), bundle.pair_classifier->kind());
  json categories = json::array();
  if (bundle.category_classifier) {
    put("category_classifier", encode(*bundle.category_classifier), bundle.category_classifier->kind());
    for (const auto& label : bundle.category_classifier->labels()) categories.push_back(label);
  }
  if (bundle.mode == RoutingMode::global) {
    put("regressor", encode(*bundle.regressor), bundle.regressor->kind());
  } else {
    const auto& labels = bundle.category_classifier->labels();
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const auto& reg = bundle.category_regressors.at(labels[k]);
      put("regressor." + std::to_string(k), encode(*reg), reg->kind());
    }
  }
  const json manifest = {{"format_version", kBundleFormatVersion},
                         {"mode", to_string(bundle.mode)},
                         {"roster", bundle.roster.ids()},
                         {"roster_hash", bundle.roster.hash()},
                         {"embedding_dim", bundle.embedding_dim},
                         {"config", to_json(bundle.config)},
                         {"categories", categories},
                         {"kind", kinds},
                         {"files", files}};
  write_file_atomic((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

ModelBundle load_bundle(const std::string& dir, const std::optional<std::string>& expected_roster_hash) {
  const auto manifest_path = (fs::path(dir) / "manifest.json").string();
  std::string text;
  try {
    text = read_file(manifest_path);
  } catch (const Error&) {
    throw BundleError("bundle manifest not found at " + manifest_path);
  }
  const json manifest = json::parse(text, nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) throw BundleError("bundle manifest is not valid JSON");

  try {
    if (manifest.at("format_version").get<int>() != kBundleFormatVersion) {
      throw BundleError("bundle format version " + manifest.at("format_version").dump() + " is not supported (expected " +
                        std::to_string(kBundleFormatVersion) + ")");
    }
    ModelBundle bundle;
    bundle.mode = routing_mode_from_string(manifest.at("mode").get<std::string>());
    bundle.roster = Roster(manifest.at("roster").get<std::vector<std::string>>());
    if (manifest.at("roster_hash").get<std::string>() != bundle.roster.hash()) {
      throw BundleError("bundle roster hash does not match its roster");
    }
    if (expected_roster_hash && *expected_roster_hash != bundle.roster.hash()) {
      throw BundleError("bundle roster hash " + bundle.roster.hash() + " differs from configured roster hash " +
                        *expected_roster_hash);
    }
    bundle.embedding_dim = manifest.at("embedding_dim").get<std::size_t>();
    bundle.config = training_config_from_json(manifest.at("config"));

    const auto& files = manifest.at("files");
    auto payload = [&](const std::string& name) {
      const auto& entry = files.at(name);
      const auto path = (fs::path(dir) / entry.at("file").get<std::string>()).string();
      std::string bytes;
      try {
        bytes = read_file(path);
      } catch (const Error&) {
        throw BundleError("bundle file missing: " + path);
      }
      if (sha256_hex(bytes) != entry.at("sha256").get<std::string>()) {
        throw BundleError("bundle file " + path + " does not match its recorded hash");
      }
      return bytes;
    };

    bundle.pair_classifier = std::make_shared<const PairClassifierModel>(
        decode_pair(payload("pair_classifier"), bundle.roster, bundle.embedding_dim));
    const auto labels = manifest.at("categories").get<std::vector<std::string>>();
    if (files.contains("category_classifier")) {
      bundle.category_classifier = std::make_shared<const CategoryClassifierModel>(
          decode_category(payload("category_classifier"), labels, bundle.embedding_dim));
    }
    if (bundle.mode == RoutingMode::global) {
      bundle.regressor = std::make_shared<const RegressorModel>(
          decode_regressor(payload("regressor"), bundle.roster, bundle.embedding_dim));
    } else {
      if (!bundle.category_classifier) throw BundleError("per-category bundle has no category classifier");
      for (std::size_t k = 0; k < labels.size(); ++k) {
        bundle.category_regressors[labels[k]] = std::make_shared<const RegressorModel>(
            decode_regressor(payload("regressor." + std::to_string(k)), bundle.roster, bundle.embedding_dim));
      }
    }
    bundle.validate();
    return bundle;
  } catch (const BundleError&) {
    throw;
  } catch (const std::exception& e) {
    throw BundleError(std::string("corrupt bundle: ") + e.what());
  }
}

std::string bundle_hash(const std::string& dir) {
  return sha256_file((fs::path(dir) / "manifest.json").string());
}

}  // namespace gaprouter::learners
