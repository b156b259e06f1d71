#pragma once

// Binary classifiers over feature samples: a CART random forest, a
// histogram-based leaf-wise gradient-boosted tree ensemble and a rule-based
// risky-pattern baseline, plus the versioned model file that binds any of
// them to a feature schema hash.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "memfail/features.hpp"

namespace memfail {

// Dense row-major design matrix with binary targets.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> x;
  std::vector<std::uint8_t> y;

  explicit Dataset(std::size_t features = 0) : n_features(features) {}

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * n_features, n_features}; }
  double at(std::size_t i, std::size_t f) const { return x[i * n_features + f]; }
  std::size_t positives() const;

  // Throws Error(schema_mismatch) if the width differs, Error(malformed_record)
  // for a non-finite value.
  void add(std::span<const double> features, bool positive);

  static Dataset from_samples(std::span<const Sample> samples, std::size_t n_features);
};

// Keeps every positive and a seeded uniform subset of at most
// `ratio * positives` negatives, preserving the original row order.
Dataset downsample_negatives(const Dataset& data, double ratio, std::uint64_t seed);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

// Axis-aligned binary tree; x[feature] <= threshold goes left.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  bool operator==(const DecisionTree&) const = default;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_leaf = 5;
  int max_features = 0;  // features tried per split; 0 means floor(sqrt(F))
  bool bootstrap = true;
  std::optional<double> positive_weight;  // default: negatives / positives
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static ForestParams from_json(const nlohmann::json& j);
};

struct ForestModel {
  ForestParams params;
  std::uint64_t seed = 0;
  double positive_weight = 1.0;
  std::vector<DecisionTree> trees;

  // Mean of the trees' leaf positive fractions.
  double predict(std::span<const double> x) const;
};

// Throws Error(degenerate_data) unless both classes are present.
ForestModel train_forest(const Dataset& data, const ForestParams& params, std::uint64_t seed);

struct GbdtParams {
  int n_rounds = 200;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int max_bins = 64;
  double lambda = 1.0;
  int min_leaf = 20;
  double min_child_hessian = 1e-3;
  double feature_fraction = 1.0;
  std::optional<double> positive_weight;  // default: negatives / positives

  void validate() const;
  nlohmann::json to_json() const;
  static GbdtParams from_json(const nlohmann::json& j);
};

struct GbdtModel {
  GbdtParams params;
  std::uint64_t seed = 0;
  double positive_weight = 1.0;
  double base_score = 0.0;
  std::vector<DecisionTree> trees;  // leaf values already scaled by the learning rate
  std::vector<double> loss_trace;   // weighted mean logistic loss after each round

  double raw_score(std::span<const double> x) const;
  double predict(std::span<const double> x) const;
};

// Equal-frequency bin upper bounds of one feature column. Every distinct
// value gets its own bin when there are at most `max_bins` of them.
std::vector<double> bin_bounds(std::vector<double> values, int max_bins);

GbdtModel train_gbdt(const Dataset& data, const GbdtParams& params, std::uint64_t seed);

enum class Comparator { ge, le, eq };

std::string_view to_string(Comparator c);

struct Condition {
  std::string feature;
  Comparator op = Comparator::ge;
  double threshold = 0.0;
};

// A rule fires when all its conditions hold; a rule set fires when any rule
// does.
struct Rule {
  std::vector<Condition> conditions;
};

struct RuleSet {
  std::vector<Rule> rules;

  // Risky CE bit patterns: two erroneous DQs with a 4-beat interval, or a
  // wide burst touching at least 4 DQs and 5 beats.
  static RuleSet risky_default();

  nlohmann::json to_json() const;
  static RuleSet from_json(const nlohmann::json& j);
};

// 1 iff any rule's conjunction holds. Throws Error(schema_mismatch) when a
// rule names an unknown feature or `x` does not match `names`.
int rule_score(const RuleSet& rules, std::span<const std::string> names, std::span<const double> x);

enum class ModelKind { forest, gbdt, rules };

std::string_view to_string(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view s);

struct TrainOptions {
  ModelKind kind = ModelKind::gbdt;
  ForestParams forest;
  GbdtParams gbdt;
  RuleSet rules = RuleSet::risky_default();
  std::optional<double> negative_ratio;  // downsample negatives before fitting

  nlohmann::json to_json() const;
  static TrainOptions from_json(const nlohmann::json& j);
};

// A trained model bound to the feature schema it was fitted on.
class Model {
 public:
  static constexpr int kFormatVersion = 1;

  Model(std::string schema_hash, std::vector<std::string> feature_names,
        std::variant<ForestModel, GbdtModel, RuleSet> body);

  ModelKind kind() const;
  const std::string& schema_hash() const { return schema_hash_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::variant<ForestModel, GbdtModel, RuleSet>& body() const { return body_; }

  // Score in [0, 1]. `x` must have one value per feature.
  double score(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& j);

 private:
  std::string schema_hash_;
  std::vector<std::string> feature_names_;
  std::variant<ForestModel, GbdtModel, RuleSet> body_;
};

Model train_model(std::span<const Sample> samples, const FeatureSchema& schema, const TrainOptions& options,
                  std::uint64_t seed);
Model train_model(const FeatureMatrix& matrix, const TrainOptions& options, std::uint64_t seed);

struct Prediction {
  double score = 0.0;
  bool positive = false;
};

// positive = score >= threshold. Throws Error(schema_mismatch) if
// `schema_hash` differs from the model's.
Prediction predict(const Model& model, std::string_view schema_hash, std::span<const double> x,
                   double threshold = 0.5);

}  // namespace memfail
