#include "ventrl/extra_trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ventrl::ml {

namespace {

struct BuildContext {
  std::span<const double> X;
  std::span<const double> y;
  std::size_t n_cols = 0;
  const TreeEnsembleParams* params = nullptr;
  int n_classes = 0;

  double at(std::size_t row, std::size_t col) const { return X[row * n_cols + col]; }
};

bool targets_constant(const BuildContext& ctx, std::span<const std::size_t> idx) {
  const double first = ctx.y[idx.front()];
  for (auto i : idx) {
    if (ctx.y[i] != first) return false;
  }
  return true;
}

void make_leaf(const BuildContext& ctx, std::span<const std::size_t> idx, TreeNode& node) {
  node.feature = -1;
  node.n_samples = static_cast<std::int32_t>(idx.size());
  if (ctx.params->task == TreeTask::regression) {
    double mean = 0.0;
    for (auto i : idx) mean += ctx.y[i];
    node.leaf_value = mean / static_cast<double>(idx.size());
  } else {
    node.class_counts.assign(ctx.n_classes, 0.0);
    for (auto i : idx) node.class_counts[static_cast<int>(ctx.y[i])] += 1.0;
  }
}

// Recursive node builder over an index slice; returns the node's index.
std::int32_t build_node(const BuildContext& ctx, Tree& tree, std::vector<std::size_t>& idx,
                        std::size_t lo, std::size_t hi, Rng& rng) {
  const auto node_id = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  const std::span<const std::size_t> slice(idx.data() + lo, hi - lo);
  const auto n = static_cast<std::int32_t>(slice.size());

  const int min_leaf = ctx.params->min_leaf;
  if (n < 2 * min_leaf || targets_constant(ctx, slice)) {
    make_leaf(ctx, slice, tree.nodes[node_id]);
    return node_id;
  }

  // features with spread at this node are the only split candidates
  std::vector<std::int32_t> usable;
  std::vector<double> f_lo(ctx.n_cols), f_hi(ctx.n_cols);
  for (std::size_t f = 0; f < ctx.n_cols; ++f) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    for (auto i : slice) {
      mn = std::min(mn, ctx.at(i, f));
      mx = std::max(mx, ctx.at(i, f));
    }
    f_lo[f] = mn;
    f_hi[f] = mx;
    if (mx > mn) usable.push_back(static_cast<std::int32_t>(f));
  }
  if (usable.empty()) {
    make_leaf(ctx, slice, tree.nodes[node_id]);
    return node_id;
  }

  int k = ctx.params->k_features;
  if (k <= 0) {
    k = ctx.params->task == TreeTask::regression
            ? static_cast<int>(ctx.n_cols)
            : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ctx.n_cols))));
  }
  k = std::min<int>(k, static_cast<int>(usable.size()));
  // partial Fisher-Yates, then ascending order so equal scores resolve to
  // the lowest feature index
  for (int j = 0; j < k; ++j) {
    const std::size_t pick = j + rng.uniform_index(usable.size() - j);
    std::swap(usable[j], usable[pick]);
  }
  std::sort(usable.begin(), usable.begin() + k);

  // split scores from single-pass accumulators; only the winner materializes
  const bool regression = ctx.params->task == TreeTask::regression;
  double parent_sum = 0.0, parent_sumsq = 0.0;
  std::vector<double> parent_counts;
  if (regression) {
    for (auto i : slice) {
      parent_sum += ctx.y[i];
      parent_sumsq += ctx.y[i] * ctx.y[i];
    }
  } else {
    parent_counts.assign(ctx.n_classes, 0.0);
    for (auto i : slice) parent_counts[static_cast<int>(ctx.y[i])] += 1.0;
  }
  const double nd = static_cast<double>(n);
  // impurity-weighted-by-count: variance*n = sumsq - sum^2/n; gini*n = n - sum c^2/n
  auto weighted_parent = [&] {
    if (regression) return parent_sumsq - parent_sum * parent_sum / nd;
    double sq = 0.0;
    for (double c : parent_counts) sq += c * c;
    return nd - sq / nd;
  }();

  double best_score = -1.0;
  std::int32_t best_feature = -1;
  double best_threshold = 0.0;
  std::vector<double> left_counts(regression ? 0 : ctx.n_classes, 0.0);

  for (int j = 0; j < k; ++j) {
    const std::int32_t f = usable[j];
    double thr;
    do {
      thr = rng.uniform(f_lo[f], f_hi[f]);
    } while (thr <= f_lo[f] || thr >= f_hi[f]);

    double score;
    std::size_t n_left = 0;
    if (regression) {
      double sum_l = 0.0, sumsq_l = 0.0;
      for (auto i : slice) {
        if (ctx.at(i, f) < thr) {
          ++n_left;
          sum_l += ctx.y[i];
          sumsq_l += ctx.y[i] * ctx.y[i];
        }
      }
      const std::size_t n_right = slice.size() - n_left;
      if (n_left < static_cast<std::size_t>(min_leaf) ||
          n_right < static_cast<std::size_t>(min_leaf)) {
        continue;
      }
      const double nl = static_cast<double>(n_left);
      const double nr = static_cast<double>(n_right);
      const double sum_r = parent_sum - sum_l;
      const double sumsq_r = parent_sumsq - sumsq_l;
      score = weighted_parent - (sumsq_l - sum_l * sum_l / nl) -
              (sumsq_r - sum_r * sum_r / nr);
    } else {
      std::fill(left_counts.begin(), left_counts.end(), 0.0);
      for (auto i : slice) {
        if (ctx.at(i, f) < thr) {
          ++n_left;
          left_counts[static_cast<int>(ctx.y[i])] += 1.0;
        }
      }
      const std::size_t n_right = slice.size() - n_left;
      if (n_left < static_cast<std::size_t>(min_leaf) ||
          n_right < static_cast<std::size_t>(min_leaf)) {
        continue;
      }
      const double nl = static_cast<double>(n_left);
      const double nr = static_cast<double>(n_right);
      double sq_l = 0.0, sq_r = 0.0;
      for (int c = 0; c < ctx.n_classes; ++c) {
        sq_l += left_counts[c] * left_counts[c];
        const double rc = parent_counts[c] - left_counts[c];
        sq_r += rc * rc;
      }
      score = weighted_parent - (nl - sq_l / nl) - (nr - sq_r / nr);
    }
    if (score > best_score) {
      best_score = score;
      best_feature = f;
      best_threshold = thr;
    }
  }

  if (best_feature < 0) {
    make_leaf(ctx, slice, tree.nodes[node_id]);
    return node_id;
  }

  // partition in place, preserving relative order for determinism
  std::vector<std::size_t> tmp(slice.begin(), slice.end());
  std::size_t w = lo;
  for (auto i : tmp) {
    if (ctx.at(i, best_feature) < best_threshold) idx[w++] = i;
  }
  const std::size_t mid = w;
  for (auto i : tmp) {
    if (!(ctx.at(i, best_feature) < best_threshold)) idx[w++] = i;
  }

  tree.nodes[node_id].feature = best_feature;
  tree.nodes[node_id].threshold = best_threshold;
  tree.nodes[node_id].impurity_decrease = best_score;
  tree.nodes[node_id].n_samples = n;
  const std::int32_t left = build_node(ctx, tree, idx, lo, mid, rng);
  tree.nodes[node_id].left = left;
  const std::int32_t right = build_node(ctx, tree, idx, mid, hi, rng);
  tree.nodes[node_id].right = right;
  return node_id;
}

const TreeNode& descend(const Tree& tree, std::span<const double> x) {
  const TreeNode* node = &tree.nodes[0];
  while (!node->is_leaf()) {
    node = x[node->feature] < node->threshold ? &tree.nodes[node->left]
                                              : &tree.nodes[node->right];
  }
  return *node;
}

}  // namespace

void TreeEnsembleParams::validate(std::size_t n_features) const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
  if (k_features < 0 || static_cast<std::size_t>(k_features) > n_features) {
    throw ConfigError("k_features must be in [1, n_features] (or 0 for auto)");
  }
}

TreeEnsemble et_fit(std::span<const double> X, std::size_t n_rows, std::size_t n_cols,
                    std::span<const double> y, const TreeEnsembleParams& params,
                    int threads) {
  if (n_rows == 0 || n_cols == 0) throw ValidationError("et_fit needs non-empty data");
  if (y.size() != n_rows) throw ValidationError("et_fit: y size mismatch");
  if (X.size() != n_rows * n_cols) throw ValidationError("et_fit: X size mismatch");
  params.validate(n_cols);
  for (double v : y) {
    if (!std::isfinite(v)) throw ValidationError("et_fit: non-finite target");
  }

  TreeEnsemble ens;
  ens.params_ = params;
  ens.n_features_ = n_cols;
  if (params.task == TreeTask::classification) {
    int n_classes = params.n_classes;
    if (n_classes <= 0) {
      double mx = 0.0;
      for (double v : y) mx = std::max(mx, v);
      n_classes = static_cast<int>(mx) + 1;
    }
    ens.n_classes_ = n_classes;
  }

  BuildContext ctx{X, y, n_cols, &ens.params_, ens.n_classes_};
  ens.trees_.resize(static_cast<std::size_t>(params.n_trees));
  parallel_for(ens.trees_.size(), threads, [&](std::size_t t) {
    Rng rng(mix_seed(params.seed, t));
    std::vector<std::size_t> idx(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) idx[i] = i;
    build_node(ctx, ens.trees_[t], idx, 0, n_rows, rng);
  });
  return ens;
}

double TreeEnsemble::predict(std::span<const double> x) const {
  if (x.size() != n_features_) throw ValidationError("predict: dimension mismatch");
  double sum = 0.0;
  for (const auto& tree : trees_) sum += descend(tree, x).leaf_value;
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> TreeEnsemble::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features_) throw ValidationError("predict_proba: dimension mismatch");
  std::vector<double> probs(n_classes_, 0.0);
  for (const auto& tree : trees_) {
    const TreeNode& leaf = descend(tree, x);
    double total = 0.0;
    for (double c : leaf.class_counts) total += c;
    for (int c = 0; c < n_classes_; ++c) probs[c] += leaf.class_counts[c] / total;
  }
  for (double& p : probs) p /= static_cast<double>(trees_.size());
  return probs;
}

int TreeEnsemble::predict_class(std::span<const double> x) const {
  const auto probs = predict_proba(x);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

TreeEnsemble TreeEnsemble::from_parts(TreeEnsembleParams params, std::size_t n_features,
                                      int n_classes, std::vector<Tree> trees) {
  TreeEnsemble ens;
  ens.params_ = params;
  ens.n_features_ = n_features;
  ens.n_classes_ = n_classes;
  ens.trees_ = std::move(trees);
  return ens;
}

double et_predict(const TreeEnsemble& ensemble, std::span<const double> x) {
  return ensemble.predict(x);
}

std::vector<double> gini_importance(const TreeEnsemble& ensemble) {
  if (ensemble.params().task != TreeTask::classification) {
    throw ValidationError("gini_importance is defined for classification ensembles");
  }
  std::vector<double> importance(ensemble.n_features(), 0.0);
  double total = 0.0;
  for (const auto& tree : ensemble.trees()) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) {
        importance[node.feature] += node.impurity_decrease;
        total += node.impurity_decrease;
      }
    }
  }
  if (total > 0.0) {
    for (double& v : importance) v /= total;
  }
  return importance;
}

}  // namespace ventrl::ml
