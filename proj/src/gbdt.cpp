#include <algorithm>
#include <cmath>
#include <numeric>

#include "memfail/hash.hpp"
#include "memfail/predictors.hpp"
#include "memfail/random.hpp"

namespace memfail {

void GbdtParams::validate() const {
  if (n_rounds < 1 || !(learning_rate > 0.0) || max_leaves < 1 || max_bins < 2 || max_bins > 256 ||
      !(lambda >= 0.0) || min_leaf < 1 || !(min_child_hessian >= 0.0) || !(feature_fraction > 0.0) ||
      feature_fraction > 1.0) {
    throw Error(ErrorCode::config, "invalid gbdt parameters");
  }
  if (positive_weight && !(*positive_weight > 0.0)) throw Error(ErrorCode::config, "positive_weight must be > 0");
}

nlohmann::json GbdtParams::to_json() const {
  nlohmann::json j = {{"n_rounds", n_rounds},
                      {"learning_rate", learning_rate},
                      {"max_leaves", max_leaves},
                      {"max_bins", max_bins},
                      {"lambda", lambda},
                      {"min_leaf", min_leaf},
                      {"min_child_hessian", min_child_hessian},
                      {"feature_fraction", feature_fraction}};
  if (positive_weight) j["positive_weight"] = *positive_weight;
  return j;
}

GbdtParams GbdtParams::from_json(const nlohmann::json& j) {
  GbdtParams p;
  try {
    p.n_rounds = j.value("n_rounds", p.n_rounds);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.max_leaves = j.value("max_leaves", p.max_leaves);
    p.max_bins = j.value("max_bins", p.max_bins);
    p.lambda = j.value("lambda", p.lambda);
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    p.min_child_hessian = j.value("min_child_hessian", p.min_child_hessian);
    p.feature_fraction = j.value("feature_fraction", p.feature_fraction);
    if (j.contains("positive_weight") && !j.at("positive_weight").is_null()) {
      p.positive_weight = j.at("positive_weight").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, std::string("gbdt params: ") + e.what());
  }
  p.validate();
  return p;
}

double GbdtModel::raw_score(std::span<const double> x) const {
  double s = base_score;
  for (const auto& t : trees) s += t.predict(x);
  return s;
}

double GbdtModel::predict(std::span<const double> x) const { return 1.0 / (1.0 + std::exp(-raw_score(x))); }

std::vector<double> bin_bounds(std::vector<double> values, int max_bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> distinct = values;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  auto midpoint = [](double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m < b ? m : a;
  };
  std::vector<double> bounds;
  if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) bounds.push_back(midpoint(distinct[i], distinct[i + 1]));
  } else {
    // Greedy equal-frequency cuts, only ever between distinct values.
    const double n = static_cast<double>(values.size());
    int k = 0;
    for (std::size_t i = 0; i + 1 < values.size() && static_cast<int>(bounds.size()) < max_bins - 1; ++i) {
      if (values[i] == values[i + 1]) continue;
      if (static_cast<double>(i + 1) >= static_cast<double>(k + 1) * n / max_bins) {
        bounds.push_back(midpoint(values[i], values[i + 1]));
        while (static_cast<double>(i + 1) >= static_cast<double>(k + 1) * n / max_bins) ++k;
      }
    }
  }
  return bounds;  // bin j holds x <= bounds[j]; the last bin is unbounded
}

namespace {

struct HistCell {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;
};

struct LeafSplit {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
};

struct Leaf {
  int node = -1;
  std::vector<std::size_t> rows;
  double g = 0.0;
  double h = 0.0;
  std::vector<HistCell> hist;  // feature-major, bins_per_feature_ cells per feature
  LeafSplit split;
  int depth = 0;
};

class GbdtTrainer {
 public:
  GbdtTrainer(const Dataset& data, const GbdtParams& params, std::uint64_t seed)
      : data_(data), params_(params), rng_(mix64(seed ^ 0x67626474ull)) {
    const std::size_t f = data.n_features;
    bounds_.resize(f);
    binned_.resize(f * data.size());
    for (std::size_t j = 0; j < f; ++j) {
      std::vector<double> col(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) col[i] = data.at(i, j);
      bounds_[j] = bin_bounds(col, params.max_bins);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto it = std::lower_bound(bounds_[j].begin(), bounds_[j].end(), col[i]);
        binned_[j * data.size() + i] = static_cast<std::uint8_t>(it - bounds_[j].begin());
      }
    }
    bins_ = static_cast<std::size_t>(params.max_bins);
  }

  const std::vector<std::vector<double>>& bounds() const { return bounds_; }

  DecisionTree fit_tree(std::span<const double> grad, std::span<const double> hess) {
    grad_ = grad;
    hess_ = hess;
    choose_features();

    DecisionTree tree;
    std::vector<Leaf> leaves;
    Leaf root;
    root.rows.resize(data_.size());
    std::iota(root.rows.begin(), root.rows.end(), 0);
    root.node = 0;
    tree.nodes.push_back({});
    for (auto i : root.rows) {
      root.g += grad_[i];
      root.h += hess_[i];
    }
    root.hist = histogram(root.rows);
    root.split = best_split(root);
    leaves.push_back(std::move(root));

    while (static_cast<int>(leaves.size()) < params_.max_leaves) {
      int pick = -1;
      double best = 0.0;
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        if (leaves[k].split.feature >= 0 && leaves[k].split.gain > best) {
          best = leaves[k].split.gain;
          pick = static_cast<int>(k);
        }
      }
      if (pick < 0) break;
      Leaf parent = std::move(leaves[pick]);
      const auto f = static_cast<std::size_t>(parent.split.feature);
      const auto bin = static_cast<std::uint8_t>(parent.split.bin);

      Leaf left;
      Leaf right;
      for (auto i : parent.rows) {
        Leaf& dst = binned_[f * data_.size() + i] <= bin ? left : right;
        dst.rows.push_back(i);
        dst.g += grad_[i];
        dst.h += hess_[i];
      }
      Leaf& small = left.rows.size() <= right.rows.size() ? left : right;
      Leaf& large = left.rows.size() <= right.rows.size() ? right : left;
      small.hist = histogram(small.rows);
      large.hist = parent.hist;
      for (std::size_t c = 0; c < large.hist.size(); ++c) {
        large.hist[c].g -= small.hist[c].g;
        large.hist[c].h -= small.hist[c].h;
        large.hist[c].n -= small.hist[c].n;
      }

      auto& node = tree.nodes[parent.node];
      node.feature = static_cast<int>(f);
      node.threshold = bounds_[f][bin];
      left.node = static_cast<int>(tree.nodes.size());
      right.node = left.node + 1;
      node.left = left.node;
      node.right = right.node;
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      left.depth = right.depth = parent.depth + 1;
      left.split = best_split(left);
      right.split = best_split(right);

      // `leaves` stays in creation order, which breaks gain ties.
      leaves.erase(leaves.begin() + pick);
      leaves.push_back(std::move(left));
      leaves.push_back(std::move(right));
    }

    for (auto& leaf : leaves) {
      tree.nodes[leaf.node].value = params_.learning_rate * (-leaf.g / (leaf.h + params_.lambda));
    }
    return tree;
  }

 private:
  void choose_features() {
    const std::size_t f = data_.n_features;
    active_.assign(f, 1);
    if (params_.feature_fraction >= 1.0) return;
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params_.feature_fraction * f)));
    std::vector<std::size_t> order(f);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < keep; ++i) std::swap(order[i], order[i + rng_.index(f - i)]);
    active_.assign(f, 0);
    for (std::size_t i = 0; i < keep; ++i) active_[order[i]] = 1;
  }

  std::vector<HistCell> histogram(const std::vector<std::size_t>& rows) const {
    const std::size_t f = data_.n_features;
    std::vector<HistCell> hist(f * bins_);
    for (std::size_t j = 0; j < f; ++j) {
      if (!active_[j]) continue;
      const std::uint8_t* col = binned_.data() + j * data_.size();
      HistCell* out = hist.data() + j * bins_;
      for (auto i : rows) {
        auto& c = out[col[i]];
        c.g += grad_[i];
        c.h += hess_[i];
        c.n += 1;
      }
    }
    return hist;
  }

  double score(double g, double h) const { return g * g / (h + params_.lambda); }

  LeafSplit best_split(const Leaf& leaf) const {
    LeafSplit best;
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    if (leaf.rows.size() < 2 * min_leaf) return best;
    const double parent = score(leaf.g, leaf.h);
    for (std::size_t j = 0; j < data_.n_features; ++j) {
      if (!active_[j]) continue;
      const std::size_t nb = bounds_[j].size();  // split after bin b for b < nb
      double gl = 0.0;
      double hl = 0.0;
      std::size_t nl = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        const auto& c = leaf.hist[j * bins_ + b];
        gl += c.g;
        hl += c.h;
        nl += c.n;
        if (nl < min_leaf) continue;
        if (leaf.rows.size() - nl < min_leaf) break;
        const double gr = leaf.g - gl;
        const double hr = leaf.h - hl;
        if (hl < params_.min_child_hessian || hr < params_.min_child_hessian) continue;
        const double gain = score(gl, hl) + score(gr, hr) - parent;
        if (gain > best.gain) best = {static_cast<int>(j), static_cast<int>(b), gain};
      }
    }
    return best;
  }

  const Dataset& data_;
  const GbdtParams& params_;
  Rng rng_;
  std::vector<std::vector<double>> bounds_;
  std::vector<std::uint8_t> binned_;  // feature-major bin indices
  std::size_t bins_ = 0;
  std::vector<std::uint8_t> active_;
  std::span<const double> grad_;
  std::span<const double> hess_;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

GbdtModel train_gbdt(const Dataset& data, const GbdtParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) {
    throw Error(ErrorCode::degenerate_data, "training data must contain both classes");
  }
  GbdtModel model;
  model.params = params;
  model.seed = seed;
  const double neg = static_cast<double>(data.size() - pos);
  model.positive_weight = params.positive_weight.value_or(neg / static_cast<double>(pos));
  const double wp = model.positive_weight * static_cast<double>(pos);
  model.base_score = std::log(wp / neg);

  const std::size_t n = data.size();
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) weight[i] = data.y[i] ? model.positive_weight : 1.0;
  const double total_weight = wp + neg;

  std::vector<double> raw(n, model.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  GbdtTrainer trainer(data, params, seed);
  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      grad[i] = weight[i] * (p - data.y[i]);
      hess[i] = weight[i] * p * (1.0 - p);
    }
    auto tree = trainer.fit_tree(grad, hess);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      raw[i] += tree.predict(data.row(i));
      // log(1 + e^{-z}) for positives, log(1 + e^{z}) for negatives.
      const double z = data.y[i] ? raw[i] : -raw[i];
      loss += weight[i] * (z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)));
    }
    model.loss_trace.push_back(loss / total_weight);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace memfail
