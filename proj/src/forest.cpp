#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "memfail/hash.hpp"
#include "memfail/predictors.hpp"
#include "memfail/random.hpp"

namespace memfail {

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
}

void Dataset::add(std::span<const double> features, bool positive) {
  if (features.size() != n_features) {
    throw Error(ErrorCode::schema_mismatch,
                fmt::format("row has {} features, dataset expects {}", features.size(), n_features));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw Error(ErrorCode::malformed_record, "non-finite feature value");
  }
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(positive ? 1 : 0);
}

Dataset Dataset::from_samples(std::span<const Sample> samples, std::size_t n_features) {
  Dataset d(n_features);
  d.x.reserve(samples.size() * n_features);
  d.y.reserve(samples.size());
  for (const auto& s : samples) d.add(s.features, s.label == Label::positive);
  return d;
}

Dataset downsample_negatives(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0)) throw Error(ErrorCode::config, "negative ratio must be positive");
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.y[i] == 0) negatives.push_back(i);
  }
  const auto budget = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(data.positives())));
  std::vector<std::uint8_t> keep(data.size(), 1);
  if (negatives.size() > budget) {
    Rng rng(mix64(seed ^ 0x6e65675f73616d70ull));
    // Partial Fisher-Yates: the first `budget` slots become the kept subset.
    for (std::size_t i = 0; i < budget; ++i) {
      const auto j = i + rng.index(negatives.size() - i);
      std::swap(negatives[i], negatives[j]);
    }
    for (std::size_t i = budget; i < negatives.size(); ++i) keep[negatives[i]] = 0;
  }
  Dataset out(data.n_features);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (keep[i]) out.add(data.row(i), data.y[i] == 1);
  }
  return out;
}

double DecisionTree::predict(std::span<const double> x) const {
  int n = 0;
  while (nodes[n].feature >= 0) {
    const auto& node = nodes[n];
    n = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[n].value;
}

void ForestParams::validate() const {
  if (n_trees < 1 || max_depth < 0 || min_leaf < 1 || max_features < 0 || threads < 1) {
    throw Error(ErrorCode::config, "invalid forest parameters");
  }
  if (positive_weight && !(*positive_weight > 0.0)) throw Error(ErrorCode::config, "positive_weight must be > 0");
}

nlohmann::json ForestParams::to_json() const {
  nlohmann::json j = {{"n_trees", n_trees},          {"max_depth", max_depth}, {"min_leaf", min_leaf},
                      {"max_features", max_features}, {"bootstrap", bootstrap}};
  if (positive_weight) j["positive_weight"] = *positive_weight;
  return j;
}

ForestParams ForestParams::from_json(const nlohmann::json& j) {
  ForestParams p;
  try {
    p.n_trees = j.value("n_trees", p.n_trees);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    p.max_features = j.value("max_features", p.max_features);
    p.bootstrap = j.value("bootstrap", p.bootstrap);
    if (j.contains("positive_weight") && !j.at("positive_weight").is_null()) {
      p.positive_weight = j.at("positive_weight").get<double>();
    }
    p.threads = j.value("threads", p.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, std::string("forest params: ") + e.what());
  }
  p.validate();
  return p;
}

double ForestModel::predict(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return trees.empty() ? 0.0 : sum / static_cast<double>(trees.size());
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Weighted impurity mass W * gini = W - (wp^2 + wn^2) / W.
double gini_mass(double wp, double wn) {
  const double w = wp + wn;
  return w > 0.0 ? w - (wp * wp + wn * wn) / w : 0.0;
}

class CartBuilder {
 public:
  CartBuilder(const Dataset& data, const ForestParams& params, double positive_weight, int mtry, Rng& rng)
      : data_(data), params_(params), wpos_(positive_weight), mtry_(mtry), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> idx) {
    tree_.nodes.clear();
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    std::size_t cp = 0;
    for (auto i : idx) cp += data_.y[i];
    const std::size_t cn = idx.size() - cp;
    const double wp = static_cast<double>(cp) * wpos_;
    const double wn = static_cast<double>(cn);

    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].value = wp / (wp + wn);

    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    if (depth >= params_.max_depth || cp == 0 || cn == 0 || idx.size() < 2 * min_leaf) return id;

    const SplitChoice best = find_split(idx, cp, cn);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) (data_.at(i, best.feature) <= best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  std::vector<int> candidate_features() {
    const int f = static_cast<int>(data_.n_features);
    std::vector<int> all(f);
    std::iota(all.begin(), all.end(), 0);
    if (mtry_ >= f) return all;
    for (int i = 0; i < mtry_; ++i) {
      const auto j = i + static_cast<int>(rng_.index(static_cast<std::uint64_t>(f - i)));
      std::swap(all[i], all[j]);
    }
    all.resize(mtry_);
    std::sort(all.begin(), all.end());
    return all;
  }

  SplitChoice find_split(const std::vector<std::size_t>& idx, std::size_t cp, std::size_t cn) {
    SplitChoice best;
    const double parent = gini_mass(static_cast<double>(cp) * wpos_, static_cast<double>(cn));
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    std::vector<std::pair<double, std::uint8_t>> column(idx.size());
    for (int f : candidate_features()) {
      for (std::size_t k = 0; k < idx.size(); ++k) column[k] = {data_.at(idx[k], f), data_.y[idx[k]]};
      std::sort(column.begin(), column.end());
      std::size_t lp = 0;
      std::size_t ln = 0;
      for (std::size_t k = 0; k + 1 < column.size(); ++k) {
        (column[k].second ? lp : ln) += 1;
        if (column[k].first == column[k + 1].first) continue;
        const std::size_t nl = k + 1;
        if (nl < min_leaf || column.size() - nl < min_leaf) continue;
        const double gain = parent - gini_mass(static_cast<double>(lp) * wpos_, static_cast<double>(ln)) -
                            gini_mass(static_cast<double>(cp - lp) * wpos_, static_cast<double>(cn - ln));
        if (gain > best.gain) {
          double mid = column[k].first + (column[k + 1].first - column[k].first) / 2.0;
          if (!(mid < column[k + 1].first)) mid = column[k].first;
          best = {f, mid, gain};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const ForestParams& params_;
  double wpos_;
  int mtry_;
  Rng& rng_;
  DecisionTree tree_;
};

}  // namespace

ForestModel train_forest(const Dataset& data, const ForestParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) {
    throw Error(ErrorCode::degenerate_data, "training data must contain both classes");
  }
  ForestModel model;
  model.params = params;
  model.seed = seed;
  model.positive_weight =
      params.positive_weight.value_or(static_cast<double>(data.size() - pos) / static_cast<double>(pos));
  const int f = static_cast<int>(data.n_features);
  const int mtry = params.max_features > 0
                       ? std::min(params.max_features, f)
                       : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(f)))));

  model.trees.resize(params.n_trees);
  auto build_tree = [&](int t) {
    Rng rng(mix64(seed ^ mix64(static_cast<std::uint64_t>(t) + 1)));
    std::vector<std::size_t> idx(data.size());
    if (params.bootstrap) {
      for (auto& i : idx) i = rng.index(data.size());
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    CartBuilder builder(data, params, model.positive_weight, mtry, rng);
    model.trees[t] = builder.build(std::move(idx));
  };

  const int workers = std::min(params.threads, params.n_trees);
  if (workers <= 1) {
    for (int t = 0; t < params.n_trees; ++t) build_tree(t);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int t = w; t < params.n_trees; t += workers) build_tree(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return model;
}

}  // namespace memfail
