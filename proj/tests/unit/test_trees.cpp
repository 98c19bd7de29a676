#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "ventrl/extra_trees.hpp"

using namespace ventrl;
using namespace ventrl::ml;

namespace {

struct Dataset {
  std::vector<double> X;  // row-major
  std::vector<double> y;
  std::size_t n = 0, d = 0;
};

Dataset random_regression(std::size_t n, std::size_t d, Rng& rng) {
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.X.resize(n * d);
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.X[i * d + j] = rng.uniform(-2.0, 2.0);
    ds.y[i] = std::sin(ds.X[i * d]) + 0.5 * ds.X[i * d + std::min<std::size_t>(1, d - 1)] +
              0.05 * rng.normal();
  }
  return ds;
}

// route every training row through a tree, checking structural invariants
void walk_tree(const Tree& tree, const Dataset& ds, int min_leaf) {
  std::function<void(std::int32_t, std::vector<std::size_t>)> visit =
      [&](std::int32_t node_id, std::vector<std::size_t> rows) {
        const TreeNode& node = tree.nodes[node_id];
        if (node.is_leaf()) {
          CHECK(rows.size() >= static_cast<std::size_t>(min_leaf));
          CHECK(static_cast<std::size_t>(node.n_samples) == rows.size());
          return;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::vector<std::size_t> left, right;
        for (auto r : rows) {
          const double v = ds.X[r * ds.d + node.feature];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
          (v < node.threshold ? left : right).push_back(r);
        }
        CHECK(node.threshold > lo);
        CHECK(node.threshold < hi);
        visit(node.left, std::move(left));
        visit(node.right, std::move(right));
      };
  std::vector<std::size_t> all(ds.n);
  std::iota(all.begin(), all.end(), 0);
  visit(0, std::move(all));
}

}  // namespace

TEST_CASE("constant targets give constant predictions") {
  Rng rng(3);
  auto ds = random_regression(60, 4, rng);
  std::fill(ds.y.begin(), ds.y.end(), 3.25);
  TreeEnsembleParams p;
  p.n_trees = 10;
  p.min_leaf = 5;
  const auto ens = et_fit(ds.X, ds.n, ds.d, ds.y, p);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(ds.d);
    for (auto& v : x) v = rng.uniform(-3.0, 3.0);
    CHECK(ens.predict(x) == 3.25);
  }
}

TEST_CASE("too few samples collapse to a single mean leaf") {
  Rng rng(5);
  auto ds = random_regression(30, 3, rng);
  TreeEnsembleParams p;
  p.n_trees = 4;
  p.min_leaf = 20;  // 30 < 2*20
  const auto ens = et_fit(ds.X, ds.n, ds.d, ds.y, p);
  const double mean = std::accumulate(ds.y.begin(), ds.y.end(), 0.0) / ds.y.size();
  std::vector<double> x(ds.d, 0.0);
  CHECK(ens.predict(x) == doctest::Approx(mean).epsilon(1e-12));
  for (const auto& tree : ens.trees()) CHECK(tree.nodes.size() == 1);
}

TEST_CASE("same seed reproduces the ensemble") {
  Rng rng(7);
  const auto ds = random_regression(200, 5, rng);
  TreeEnsembleParams p;
  p.n_trees = 8;
  p.min_leaf = 4;
  p.seed = 99;
  const auto a = et_fit(ds.X, ds.n, ds.d, ds.y, p);
  const auto b = et_fit(ds.X, ds.n, ds.d, ds.y, p, /*threads=*/2);
  REQUIRE(a.trees().size() == b.trees().size());
  for (std::size_t t = 0; t < a.trees().size(); ++t) {
    REQUIRE(a.trees()[t].nodes.size() == b.trees()[t].nodes.size());
    for (std::size_t n = 0; n < a.trees()[t].nodes.size(); ++n) {
      CHECK(a.trees()[t].nodes[n].feature == b.trees()[t].nodes[n].feature);
      CHECK(a.trees()[t].nodes[n].threshold == b.trees()[t].nodes[n].threshold);
    }
  }
}

TEST_CASE("structural invariants: leaf sizes and strict thresholds") {
  Rng rng(11);
  const auto ds = random_regression(300, 4, rng);
  TreeEnsembleParams p;
  p.n_trees = 6;
  p.min_leaf = 7;
  const auto ens = et_fit(ds.X, ds.n, ds.d, ds.y, p);
  for (const auto& tree : ens.trees()) walk_tree(tree, ds, p.min_leaf);
}

TEST_CASE("one-tree stump separates 1-d clusters") {
  // two clusters on a line; a stump must classify probe points by side
  std::vector<double> X = {0.0, 0.1, 0.2, 0.9, 1.0, 1.1};
  std::vector<double> y = {0.0, 0.0, 0.0, 10.0, 10.0, 10.0};
  TreeEnsembleParams p;
  p.n_trees = 1;
  p.min_leaf = 1;
  p.seed = 5;
  const auto ens = et_fit(X, 6, 1, y, p);
  CHECK(ens.predict(std::vector<double>{-0.5}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ens.predict(std::vector<double>{1.6}) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("classification probabilities sum to one") {
  Rng rng(13);
  const std::size_t n = 150, d = 4;
  std::vector<double> X(n * d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) X[i * d + j] = rng.uniform(0.0, 1.0);
    y[i] = static_cast<double>(rng.uniform_index(5));
  }
  TreeEnsembleParams p;
  p.n_trees = 9;
  p.min_leaf = 3;
  p.task = TreeTask::classification;
  const auto ens = et_fit(X, n, d, y, p);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    const auto probs = ens.predict_proba(x);
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gini importance finds the label-driving feature") {
  Rng rng(17);
  const std::size_t n = 400, d = 6;
  std::vector<double> X(n * d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) X[i * d + j] = rng.uniform(0.0, 1.0);
    y[i] = X[i * d + 3] > 0.5 ? 1.0 : 0.0;
  }
  TreeEnsembleParams p;
  p.n_trees = 30;
  p.min_leaf = 2;
  p.task = TreeTask::classification;
  const auto ens = et_fit(X, n, d, y, p);
  const auto imp = gini_importance(ens);
  REQUIRE(imp.size() == d);
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(imp[3] > 0.8);
}

TEST_CASE("gini importance of a split-free ensemble is the zero vector") {
  std::vector<double> X = {0.5, 0.5, 0.5};  // constant feature, no usable split
  std::vector<double> y = {0.0, 1.0, 1.0};
  TreeEnsembleParams p;
  p.n_trees = 3;
  p.min_leaf = 1;
  p.task = TreeTask::classification;
  const auto ens = et_fit(X, 3, 1, y, p);
  const auto imp = gini_importance(ens);
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == 0.0);
}

TEST_CASE("gini importance rejects regression ensembles") {
  Rng rng(19);
  const auto ds = random_regression(40, 3, rng);
  TreeEnsembleParams p;
  p.n_trees = 2;
  p.min_leaf = 5;
  const auto ens = et_fit(ds.X, ds.n, ds.d, ds.y, p);
  CHECK_THROWS_AS(gini_importance(ens), ValidationError);
}

TEST_CASE("class argmax is invariant to uniform count scaling") {
  Rng rng(23);
  const std::size_t n = 120, d = 3;
  std::vector<double> X(n * d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) X[i * d + j] = rng.uniform(0.0, 1.0);
    y[i] = static_cast<double>(rng.uniform_index(3));
  }
  TreeEnsembleParams p;
  p.n_trees = 5;
  p.min_leaf = 2;
  p.task = TreeTask::classification;
  const auto ens = et_fit(X, n, d, y, p);

  auto scaled_trees = ens.trees();
  for (auto& tree : scaled_trees) {
    for (auto& node : tree.nodes) {
      for (auto& c : node.class_counts) c *= 7.0;
    }
  }
  const auto scaled =
      TreeEnsemble::from_parts(ens.params(), ens.n_features(), ens.n_classes(),
                               std::move(scaled_trees));
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    CHECK(ens.predict_class(x) == scaled.predict_class(x));
  }
}

TEST_CASE("training error does not grow with more trees, on average") {
  Rng rng(29);
  double err_small = 0.0, err_large = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const auto ds = random_regression(150, 4, rng);
    TreeEnsembleParams p;
    p.min_leaf = 2;
    p.seed = static_cast<std::uint64_t>(seed);
    auto mse = [&](int n_trees) {
      p.n_trees = n_trees;
      const auto ens = et_fit(ds.X, ds.n, ds.d, ds.y, p);
      double acc = 0.0;
      for (std::size_t i = 0; i < ds.n; ++i) {
        std::vector<double> x(ds.X.begin() + i * ds.d, ds.X.begin() + (i + 1) * ds.d);
        const double e = ens.predict(x) - ds.y[i];
        acc += e * e;
      }
      return acc / ds.n;
    };
    err_small += mse(2);
    err_large += mse(25);
  }
  CHECK(err_large <= err_small);
}

TEST_CASE("empty data and dimension mismatches are rejected") {
  std::vector<double> empty;
  TreeEnsembleParams p;
  CHECK_THROWS_AS(et_fit(empty, 0, 0, empty, p), ValidationError);

  Rng rng(31);
  const auto ds = random_regression(30, 3, rng);
  p.n_trees = 2;
  p.min_leaf = 2;
  const auto ens = et_fit(ds.X, ds.n, ds.d, ds.y, p);
  CHECK_THROWS_AS(ens.predict(std::vector<double>{1.0, 2.0}), ValidationError);
}
