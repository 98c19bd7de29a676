#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ventrl/extra_trees.hpp"
#include "ventrl/fqi.hpp"
#include "ventrl/mdp.hpp"

namespace ventrl::policy {

struct PolicyParams {
  int n_trees = 100;
  int min_leaf = 20;
  int k_features = 0;  // 0 = ceil(sqrt(32))
  std::uint64_t seed = 1;
};

/// Interpretable distillation of a Q-function: a tree-ensemble classifier
/// over states with the 8 joint actions as classes.
struct PolicyModel {
  ml::TreeEnsemble classifier;
  std::vector<double> importances;  // per state feature, sums to 1 or all zero
  std::string provenance;           // label source, e.g. "fqit" or "nfq"
  std::uint64_t reward_hash = 0;
};

/// Labels each state with greedy_action(q, s) and fits the classifier.
PolicyModel extract_policy(const fqi::QFunction& q,
                           std::span<const mdp::StateVector> states,
                           const PolicyParams& params, int threads = 1,
                           std::string provenance = {});

struct Recommendation {
  mdp::Action action;
  std::array<double, mdp::kNumActions> probabilities;
};

Recommendation recommend(const PolicyModel& policy, const mdp::StateVector& s);

/// (feature name, weight) in descending weight order; ties keep schema order.
std::vector<std::pair<std::string_view, double>> feature_importances(
    const PolicyModel& policy);

void save_policy(const std::string& path, const PolicyModel& policy);
PolicyModel load_policy(const std::string& path);

}  // namespace ventrl::policy
