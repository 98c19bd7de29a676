#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ventrl/common.hpp"

namespace ventrl::ml {

enum class TreeTask : int { regression = 0, classification = 1 };

struct TreeEnsembleParams {
  int n_trees = 50;
  int k_features = 0;  // 0 = all features (regression) / ceil(sqrt(d)) (classification)
  int min_leaf = 20;
  std::uint64_t seed = 1;
  TreeTask task = TreeTask::regression;
  int n_classes = 0;  // inferred from labels when 0

  void validate(std::size_t n_features) const;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double leaf_value = 0.0;            // regression mean
  std::vector<double> class_counts;   // classification leaf histogram
  double impurity_decrease = 0.0;     // count-weighted, internal nodes only
  std::int32_t n_samples = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

class TreeEnsemble {
 public:
  double predict(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;
  int predict_class(std::span<const double> x) const;

  const TreeEnsembleParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }
  int n_classes() const { return n_classes_; }
  const std::vector<Tree>& trees() const { return trees_; }

  friend TreeEnsemble et_fit(std::span<const double> X, std::size_t n_rows,
                             std::size_t n_cols, std::span<const double> y,
                             const TreeEnsembleParams& params, int threads);
  friend std::vector<double> gini_importance(const TreeEnsemble& ensemble);

  // used by deserialization
  static TreeEnsemble from_parts(TreeEnsembleParams params, std::size_t n_features,
                                 int n_classes, std::vector<Tree> trees);

 private:
  TreeEnsembleParams params_;
  std::size_t n_features_ = 0;
  int n_classes_ = 0;
  std::vector<Tree> trees_;
};

/// Extremely randomized trees: per node, k features are drawn at random, one
/// uniform threshold is drawn strictly inside each feature's node range, and
/// the best candidate by impurity decrease wins. Trees are fit independently
/// on the full sample (no bootstrap), in parallel when threads > 1; per-tree
/// seeds derive from the master seed, so the result is thread-count
/// independent. X is row-major n_rows x n_cols.
TreeEnsemble et_fit(std::span<const double> X, std::size_t n_rows, std::size_t n_cols,
                    std::span<const double> y, const TreeEnsembleParams& params,
                    int threads = 1);

double et_predict(const TreeEnsemble& ensemble, std::span<const double> x);

/// Normalized total impurity decrease per feature; all-zero when the
/// ensemble never split. Defined for classification ensembles.
std::vector<double> gini_importance(const TreeEnsemble& ensemble);

}  // namespace ventrl::ml
