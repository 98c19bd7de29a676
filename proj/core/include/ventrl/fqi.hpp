#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ventrl/extra_trees.hpp"
#include "ventrl/mdp.hpp"
#include "ventrl/mlp.hpp"

namespace ventrl::fqi {

// (state, action) regression input: 32 state features + vent_bit + sed_level.
inline constexpr std::size_t kEncodingDim = mdp::kStateDim + 2;
inline constexpr int kEncodingVersion = 1;

using Encoding = std::array<double, kEncodingDim>;

inline Encoding encode(const mdp::StateVector& s, const mdp::Action& a) {
  Encoding e;
  std::copy(s.begin(), s.end(), e.begin());
  e[mdp::kStateDim] = a.vent_bit;
  e[mdp::kStateDim + 1] = a.sed_level;
  return e;
}

enum class RegressorKind : int { extra_trees = 0, neural_net = 1 };

std::string_view regressor_kind_name(RegressorKind k);
RegressorKind regressor_kind_from_name(std::string_view name);

/// A fitted state-action value function over the fixed 34-real encoding.
struct QFunction {
  std::variant<std::monostate, ml::TreeEnsemble, ml::MLPModel> regressor;
  double gamma = 0.99;
  int encoding_version = kEncodingVersion;
  std::uint64_t reward_hash = 0;  // fingerprint of the RewardConfig that built the data

  bool fitted() const { return regressor.index() != 0; }
  RegressorKind kind() const;

  double value(const mdp::StateVector& s, const mdp::Action& a) const;
  /// Highest value over the 8 actions.
  double max_value(const mdp::StateVector& s) const;
  /// Values for every (state, action) pair, batched; pairs.size() results.
  std::vector<double> values(std::span<const Encoding> pairs, int threads = 1) const;
};

/// Greedy policy readout; ties break to the smallest (vent_bit, sed_level).
mdp::Action greedy_action(const QFunction& q, const mdp::StateVector& s);

/// Regression targets r + gamma * max_a Q_prev(s', a); plain rewards when
/// q_prev is null/unfitted (the first iteration) or the transition is
/// terminal.
std::vector<double> bellman_targets(const QFunction* q_prev,
                                    std::span<const mdp::Transition> batch,
                                    int threads = 1);

struct FqiConfig {
  int iterations = 100;
  double subset_fraction = 0.10;
  double gamma = 0.99;
  double early_stop_epsilon = 0.0;  // 0 disables early stopping
  RegressorKind regressor = RegressorKind::extra_trees;
  ml::TreeEnsembleParams tree_params = default_tree_params();
  ml::MLPConfig net_params;
  int net_epochs_per_iteration = 8;
  int net_batch_size = 256;
  double probe_fraction = 0.01;  // fixed probe set for the convergence trace
  std::size_t probe_min = 100;
  std::size_t probe_max = 20000;
  std::uint64_t seed = 1;

  static ml::TreeEnsembleParams default_tree_params() {
    ml::TreeEnsembleParams p;
    p.n_trees = 50;
    p.min_leaf = 20;
    p.task = ml::TreeTask::regression;
    return p;
  }

  void validate() const;
};

struct ConvergenceTrace {
  std::vector<double> mean_abs_delta_q;  // per iteration, on the probe set
  std::vector<double> wall_ms;           // per iteration
};

struct FqiResult {
  QFunction q;
  ConvergenceTrace trace;
};

/// Fitted Q-iteration with per-iteration subset sampling. Tree regressors
/// are refit from scratch every iteration; networks warm-start from the
/// previous iteration's weights.
FqiResult fqi_train(std::span<const mdp::Transition> transitions, const FqiConfig& cfg,
                    int threads = 1);

struct QLearningConfig {
  double alpha = 1e-3;
  double gamma = 0.99;
  ml::MLPConfig net_params = default_net_params();
  double probe_fraction = 0.01;
  std::size_t probe_min = 100;
  std::size_t probe_max = 20000;
  std::uint64_t seed = 1;

  // the incremental TD update is realized as plain per-transition gradient
  // steps; adam is selectable through net_params.optimizer
  static ml::MLPConfig default_net_params() {
    ml::MLPConfig c;
    c.optimizer = ml::MLPOptimizer::sgd;
    return c;
  }

  void validate() const;
};

struct QLearningResult {
  QFunction q;
  std::vector<double> per_episode_delta;  // mean |dQ| on the probe set
};

/// Incremental Q-learning baseline: one network update per transition, in
/// the given admission order; the trace has one entry per admission.
QLearningResult q_learning_train(std::span<const mdp::Transition> transitions,
                                 const QLearningConfig& cfg);

void save_qfunction(const std::string& path, const QFunction& q);
QFunction load_qfunction(const std::string& path);

}  // namespace ventrl::fqi
