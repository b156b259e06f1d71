#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "memfail/predictors.hpp"

namespace memfail {

using nlohmann::json;

std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::ge: return ">=";
    case Comparator::le: return "<=";
    case Comparator::eq: return "==";
  }
  return ">=";
}

namespace {

Comparator parse_comparator(const std::string& s) {
  if (s == ">=" || s == "ge") return Comparator::ge;
  if (s == "<=" || s == "le") return Comparator::le;
  if (s == "==" || s == "=" || s == "eq") return Comparator::eq;
  throw Error(ErrorCode::config, "unknown comparator " + s);
}

bool holds(Comparator op, double value, double threshold) {
  switch (op) {
    case Comparator::ge: return value >= threshold;
    case Comparator::le: return value <= threshold;
    case Comparator::eq: return value == threshold;
  }
  return false;
}

}  // namespace

RuleSet RuleSet::risky_default() {
  RuleSet r;
  r.rules.push_back({{{"dq_count", Comparator::ge, 2}, {"beat_interval", Comparator::eq, 4}}});
  r.rules.push_back({{{"dq_count", Comparator::ge, 4}, {"beat_count", Comparator::ge, 5}}});
  return r;
}

json RuleSet::to_json() const {
  json rules_json = json::array();
  for (const auto& rule : rules) {
    json conds = json::array();
    for (const auto& c : rule.conditions) {
      conds.push_back({{"feature", c.feature}, {"op", std::string(memfail::to_string(c.op))}, {"threshold", c.threshold}});
    }
    rules_json.push_back(conds);
  }
  return {{"rules", rules_json}};
}

RuleSet RuleSet::from_json(const json& j) {
  RuleSet r;
  try {
    for (const auto& rule_json : j.at("rules")) {
      Rule rule;
      for (const auto& c : rule_json) {
        Condition cond{c.at("feature").get<std::string>(), parse_comparator(c.at("op").get<std::string>()),
                       c.at("threshold").get<double>()};
        if (!std::isfinite(cond.threshold)) throw Error(ErrorCode::config, "rule threshold must be finite");
        rule.conditions.push_back(std::move(cond));
      }
      r.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("ruleset: ") + e.what());
  }
  return r;
}

int rule_score(const RuleSet& rules, std::span<const std::string> names, std::span<const double> x) {
  if (names.size() != x.size()) {
    throw Error(ErrorCode::schema_mismatch, fmt::format("sample has {} values for {} features", x.size(), names.size()));
  }
  auto index = [&](const std::string& feature) {
    const auto it = std::find(names.begin(), names.end(), feature);
    if (it == names.end()) throw Error(ErrorCode::schema_mismatch, "rule references unknown feature " + feature);
    return static_cast<std::size_t>(it - names.begin());
  };
  int fired = 0;
  for (const auto& rule : rules.rules) {
    bool all = true;
    for (const auto& c : rule.conditions) {
      all = all && holds(c.op, x[index(c.feature)], c.threshold);
    }
    if (all) fired = 1;
  }
  return fired;
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::forest: return "forest";
    case ModelKind::gbdt: return "gbdt";
    case ModelKind::rules: return "rules";
  }
  return "gbdt";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "forest") return ModelKind::forest;
  if (s == "gbdt") return ModelKind::gbdt;
  if (s == "rules") return ModelKind::rules;
  return std::nullopt;
}

json TrainOptions::to_json() const {
  json j = {{"kind", std::string(memfail::to_string(kind))},
            {"forest", forest.to_json()},
            {"gbdt", gbdt.to_json()},
            {"rules", rules.to_json()}};
  if (negative_ratio) j["negative_ratio"] = *negative_ratio;
  return j;
}

TrainOptions TrainOptions::from_json(const json& j) {
  TrainOptions o;
  try {
    if (j.contains("kind")) {
      const auto kind = parse_model_kind(j.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::config, "model kind must be forest, gbdt or rules");
      o.kind = *kind;
    }
    if (j.contains("forest")) o.forest = ForestParams::from_json(j.at("forest"));
    if (j.contains("gbdt")) o.gbdt = GbdtParams::from_json(j.at("gbdt"));
    if (j.contains("rules")) o.rules = RuleSet::from_json(j.at("rules"));
    if (j.contains("negative_ratio") && !j.at("negative_ratio").is_null()) {
      o.negative_ratio = j.at("negative_ratio").get<double>();
      if (!(*o.negative_ratio > 0.0)) throw Error(ErrorCode::config, "negative_ratio must be positive");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("train options: ") + e.what());
  }
  return o;
}

Model::Model(std::string schema_hash, std::vector<std::string> feature_names,
             std::variant<ForestModel, GbdtModel, RuleSet> body)
    : schema_hash_(std::move(schema_hash)), feature_names_(std::move(feature_names)), body_(std::move(body)) {}

ModelKind Model::kind() const {
  switch (body_.index()) {
    case 0: return ModelKind::forest;
    case 1: return ModelKind::gbdt;
    default: return ModelKind::rules;
  }
}

double Model::score(std::span<const double> x) const {
  if (x.size() != feature_names_.size()) {
    throw Error(ErrorCode::schema_mismatch,
                fmt::format("sample has {} values, model expects {}", x.size(), feature_names_.size()));
  }
  if (const auto* f = std::get_if<ForestModel>(&body_)) return f->predict(x);
  if (const auto* g = std::get_if<GbdtModel>(&body_)) return g->predict(x);
  return rule_score(std::get<RuleSet>(body_), feature_names_, x);
}

namespace {

json tree_to_json(const DecisionTree& t) {
  // Columnar layout keeps model files compact.
  json feature = json::array();
  json threshold = json::array();
  json left = json::array();
  json right = json::array();
  json value = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

DecisionTree tree_from_json(const json& j) {
  DecisionTree t;
  const auto& feature = j.at("feature");
  const std::size_t n = feature.size();
  const auto& threshold = j.at("threshold");
  const auto& left = j.at("left");
  const auto& right = j.at("right");
  const auto& value = j.at("value");
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0) {
    throw Error(ErrorCode::malformed_record, "inconsistent tree arrays");
  }
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node.feature = feature[i].get<int>();
    node.threshold = threshold[i].get<double>();
    node.left = left[i].get<int>();
    node.right = right[i].get<int>();
    node.value = value[i].get<double>();
    if (node.feature >= 0) {
      const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
      if (!in_range(node.left) || !in_range(node.right)) {
        throw Error(ErrorCode::malformed_record, "tree child index out of range");
      }
    }
  }
  return t;
}

json trees_to_json(const std::vector<DecisionTree>& trees) {
  json out = json::array();
  for (const auto& t : trees) out.push_back(tree_to_json(t));
  return out;
}

std::vector<DecisionTree> trees_from_json(const json& j, std::size_t n_features) {
  std::vector<DecisionTree> out;
  for (const auto& t : j) {
    out.push_back(tree_from_json(t));
    for (const auto& node : out.back().nodes) {
      if (node.feature >= static_cast<int>(n_features)) {
        throw Error(ErrorCode::schema_mismatch, "tree split references a feature outside the schema");
      }
    }
  }
  return out;
}

}  // namespace

json Model::to_json() const {
  json j = {{"format", "memfail-model"},
            {"version", kFormatVersion},
            {"kind", std::string(memfail::to_string(kind()))},
            {"schema_hash", schema_hash_},
            {"feature_names", feature_names_}};
  if (const auto* f = std::get_if<ForestModel>(&body_)) {
    j["params"] = f->params.to_json();
    j["seed"] = f->seed;
    j["positive_weight"] = f->positive_weight;
    j["trees"] = trees_to_json(f->trees);
  } else if (const auto* g = std::get_if<GbdtModel>(&body_)) {
    j["params"] = g->params.to_json();
    j["seed"] = g->seed;
    j["positive_weight"] = g->positive_weight;
    j["base_score"] = g->base_score;
    j["loss_trace"] = g->loss_trace;
    j["trees"] = trees_to_json(g->trees);
  } else {
    j["ruleset"] = std::get<RuleSet>(body_).to_json();
  }
  return j;
}

Model Model::from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != "memfail-model") {
      throw Error(ErrorCode::malformed_record, "not a model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion) {
      throw Error(ErrorCode::schema_mismatch, fmt::format("unsupported model version {}", version));
    }
    auto hash = j.at("schema_hash").get<std::string>();
    auto names = j.at("feature_names").get<std::vector<std::string>>();
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::malformed_record, "unknown model kind");
    switch (*kind) {
      case ModelKind::forest: {
        ForestModel f;
        f.params = ForestParams::from_json(j.at("params"));
        f.seed = j.at("seed").get<std::uint64_t>();
        f.positive_weight = j.at("positive_weight").get<double>();
        f.trees = trees_from_json(j.at("trees"), names.size());
        return Model(std::move(hash), std::move(names), std::move(f));
      }
      case ModelKind::gbdt: {
        GbdtModel g;
        g.params = GbdtParams::from_json(j.at("params"));
        g.seed = j.at("seed").get<std::uint64_t>();
        g.positive_weight = j.at("positive_weight").get<double>();
        g.base_score = j.at("base_score").get<double>();
        g.loss_trace = j.at("loss_trace").get<std::vector<double>>();
        g.trees = trees_from_json(j.at("trees"), names.size());
        return Model(std::move(hash), std::move(names), std::move(g));
      }
      case ModelKind::rules: {
        auto rules = RuleSet::from_json(j.at("ruleset"));
        for (const auto& rule : rules.rules) {
          for (const auto& c : rule.conditions) {
            if (std::find(names.begin(), names.end(), c.feature) == names.end()) {
              throw Error(ErrorCode::schema_mismatch, "rule references unknown feature " + c.feature);
            }
          }
        }
        return Model(std::move(hash), std::move(names), std::move(rules));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_record, std::string("model file: ") + e.what());
  }
  throw Error(ErrorCode::malformed_record, "unknown model kind");
}

namespace {

Model fit(const Dataset& full, std::string hash, std::vector<std::string> names, const TrainOptions& options,
          std::uint64_t seed) {
  if (options.kind == ModelKind::rules) {
    for (const auto& rule : options.rules.rules) {
      for (const auto& c : rule.conditions) {
        if (std::find(names.begin(), names.end(), c.feature) == names.end()) {
          throw Error(ErrorCode::schema_mismatch, "rule references unknown feature " + c.feature);
        }
      }
    }
    return Model(std::move(hash), std::move(names), options.rules);
  }
  const Dataset data = options.negative_ratio ? downsample_negatives(full, *options.negative_ratio, seed) : full;
  if (options.kind == ModelKind::forest) {
    return Model(std::move(hash), std::move(names), train_forest(data, options.forest, seed));
  }
  return Model(std::move(hash), std::move(names), train_gbdt(data, options.gbdt, seed));
}

}  // namespace

Model train_model(std::span<const Sample> samples, const FeatureSchema& schema, const TrainOptions& options,
                  std::uint64_t seed) {
  return fit(Dataset::from_samples(samples, schema.size()), schema.hash(), schema.names(), options, seed);
}

Model train_model(const FeatureMatrix& matrix, const TrainOptions& options, std::uint64_t seed) {
  return fit(Dataset::from_samples(matrix.samples, matrix.feature_names.size()), matrix.schema_hash,
             matrix.feature_names, options, seed);
}

Prediction predict(const Model& model, std::string_view schema_hash, std::span<const double> x, double threshold) {
  if (schema_hash != model.schema_hash()) {
    throw Error(ErrorCode::schema_mismatch,
                fmt::format("model schema {} does not match features {}", model.schema_hash(), schema_hash));
  }
  const double s = model.score(x);
  return {s, s >= threshold};
}

}  // namespace memfail
