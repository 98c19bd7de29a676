#include "ventrl/fqi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "model_json.hpp"

namespace ventrl::fqi {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<double> flat_encodings(std::span<const mdp::Transition> transitions,
                                   std::span<const std::size_t> idx) {
  std::vector<double> X(idx.size() * kEncodingDim);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& tr = transitions[idx[r]];
    const Encoding e = encode(tr.state, tr.action);
    std::copy(e.begin(), e.end(), X.begin() + static_cast<std::ptrdiff_t>(r * kEncodingDim));
  }
  return X;
}

Eigen::MatrixXd encoding_matrix(std::span<const Encoding> pairs) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(pairs.size()),
                    static_cast<Eigen::Index>(kEncodingDim));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = 0; j < kEncodingDim; ++j) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pairs[i][j];
    }
  }
  return X;
}

// max_a Q(s', a) for a set of transitions, batched per regressor kind
std::vector<double> next_state_max(const QFunction& q,
                                   std::span<const mdp::Transition> transitions,
                                   std::span<const std::size_t> idx, int threads) {
  std::vector<double> out(idx.size(), 0.0);
  if (const auto* trees = std::get_if<ml::TreeEnsemble>(&q.regressor)) {
    parallel_for(idx.size(), threads, [&](std::size_t r) {
      const auto& tr = transitions[idx[r]];
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp::kNumActions; ++a) {
        const Encoding e = encode(tr.next_state, mdp::action_from_index(a));
        best = std::max(best, trees->predict(e));
      }
      out[r] = best;
    });
    return out;
  }
  const auto& net = std::get<ml::MLPModel>(q.regressor);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size() * mdp::kNumActions),
                    static_cast<Eigen::Index>(kEncodingDim));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (int a = 0; a < mdp::kNumActions; ++a) {
      const Encoding e = encode(transitions[idx[r]].next_state, mdp::action_from_index(a));
      for (std::size_t j = 0; j < kEncodingDim; ++j) {
        X(static_cast<Eigen::Index>(r * mdp::kNumActions + a), static_cast<Eigen::Index>(j)) = e[j];
      }
    }
  }
  const Eigen::VectorXd pred = net.predict_batch(X);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp::kNumActions; ++a) {
      best = std::max(best, pred[static_cast<Eigen::Index>(r * mdp::kNumActions + a)]);
    }
    out[r] = best;
  }
  return out;
}

std::vector<double> targets_for(const QFunction* q_prev,
                                std::span<const mdp::Transition> transitions,
                                std::span<const std::size_t> idx, int threads) {
  std::vector<double> targets(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) targets[r] = transitions[idx[r]].reward;
  if (q_prev == nullptr || !q_prev->fitted()) return targets;

  std::vector<std::size_t> live;
  live.reserve(idx.size());
  std::vector<std::size_t> live_pos;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (!transitions[idx[r]].terminal) {
      live.push_back(idx[r]);
      live_pos.push_back(r);
    }
  }
  const std::vector<double> maxq = next_state_max(*q_prev, transitions, live, threads);
  for (std::size_t k = 0; k < live.size(); ++k) {
    targets[live_pos[k]] += q_prev->gamma * maxq[k];
  }
  return targets;
}

void set_input_normalization(ml::MLPModel& net,
                             std::span<const mdp::Transition> transitions) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kEncodingDim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(kEncodingDim);
  for (const auto& tr : transitions) {
    const Encoding e = encode(tr.state, tr.action);
    for (std::size_t j = 0; j < kEncodingDim; ++j) {
      mean[static_cast<Eigen::Index>(j)] += e[j];
      sq[static_cast<Eigen::Index>(j)] += e[j] * e[j];
    }
  }
  const double n = static_cast<double>(transitions.size());
  mean /= n;
  Eigen::VectorXd sd(kEncodingDim);
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    const double var = std::max(0.0, sq[j] / n - mean[j] * mean[j]);
    sd[j] = std::sqrt(var);
  }
  net.set_normalization(std::move(mean), std::move(sd));
}

std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t>& pool,
                                                    std::size_t k, Rng& rng) {
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t pick = j + rng.uniform_index(pool.size() - j);
    std::swap(pool[j], pool[pick]);
  }
  return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace

std::string_view regressor_kind_name(RegressorKind k) {
  return k == RegressorKind::extra_trees ? "extra_trees" : "neural_net";
}

RegressorKind regressor_kind_from_name(std::string_view name) {
  if (name == "extra_trees") return RegressorKind::extra_trees;
  if (name == "neural_net") return RegressorKind::neural_net;
  throw ParseError("unknown regressor kind '" + std::string(name) + "'");
}

RegressorKind QFunction::kind() const {
  if (std::holds_alternative<ml::MLPModel>(regressor)) return RegressorKind::neural_net;
  return RegressorKind::extra_trees;
}

double QFunction::value(const mdp::StateVector& s, const mdp::Action& a) const {
  const Encoding e = encode(s, a);
  if (const auto* trees = std::get_if<ml::TreeEnsemble>(&regressor)) {
    return trees->predict(e);
  }
  if (const auto* net = std::get_if<ml::MLPModel>(&regressor)) {
    return net->predict(e);
  }
  return 0.0;
}

double QFunction::max_value(const mdp::StateVector& s) const {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < mdp::kNumActions; ++a) {
    best = std::max(best, value(s, mdp::action_from_index(a)));
  }
  return best;
}

std::vector<double> QFunction::values(std::span<const Encoding> pairs, int threads) const {
  std::vector<double> out(pairs.size(), 0.0);
  if (const auto* trees = std::get_if<ml::TreeEnsemble>(&regressor)) {
    parallel_for(pairs.size(), threads,
                 [&](std::size_t i) { out[i] = trees->predict(pairs[i]); });
  } else if (const auto* net = std::get_if<ml::MLPModel>(&regressor)) {
    const Eigen::VectorXd pred = net->predict_batch(encoding_matrix(pairs));
    for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = pred[static_cast<Eigen::Index>(i)];
  }
  return out;
}

mdp::Action greedy_action(const QFunction& q, const mdp::StateVector& s) {
  mdp::Action best_action{0, 0};
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < mdp::kNumActions; ++a) {
    const mdp::Action action = mdp::action_from_index(a);
    const double v = q.value(s, action);
    if (v > best) {
      best = v;
      best_action = action;
    }
  }
  return best_action;
}

std::vector<double> bellman_targets(const QFunction* q_prev,
                                    std::span<const mdp::Transition> batch, int threads) {
  if (batch.empty()) throw ValidationError("bellman_targets: empty batch");
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  return targets_for(q_prev, batch, idx, threads);
}

void FqiConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw ConfigError("subset_fraction must be in (0, 1]");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (early_stop_epsilon < 0.0) throw ConfigError("early_stop_epsilon must be >= 0");
  if (net_epochs_per_iteration < 1) throw ConfigError("net_epochs_per_iteration must be >= 1");
  if (!(probe_fraction > 0.0 && probe_fraction <= 1.0)) {
    throw ConfigError("probe_fraction must be in (0, 1]");
  }
}

FqiResult fqi_train(std::span<const mdp::Transition> transitions, const FqiConfig& cfg,
                    int threads) {
  cfg.validate();
  const std::size_t N = transitions.size();
  if (N == 0) throw ValidationError("fqi_train: need at least one transition");

  Rng rng(mix_seed(cfg.seed, 0xf91));

  // fixed probe set for the convergence trace
  std::size_t n_probe = static_cast<std::size_t>(
      std::lround(cfg.probe_fraction * static_cast<double>(N)));
  n_probe = std::clamp(n_probe, std::min(cfg.probe_min, N), std::min(cfg.probe_max, N));
  std::vector<std::size_t> pool(N);
  std::iota(pool.begin(), pool.end(), 0);
  const std::vector<std::size_t> probe_idx = sample_without_replacement(pool, n_probe, rng);
  std::vector<Encoding> probe;
  probe.reserve(n_probe);
  for (std::size_t i : probe_idx) {
    probe.push_back(encode(transitions[i].state, transitions[i].action));
  }

  FqiResult result;
  result.q.gamma = cfg.gamma;

  ml::MLPModel net;
  if (cfg.regressor == RegressorKind::neural_net) {
    ml::MLPConfig nc = cfg.net_params;
    nc.seed = mix_seed(cfg.seed, 0x9e7);
    net = ml::MLPModel(static_cast<int>(kEncodingDim), nc);
    set_input_normalization(net, transitions);
  }

  std::vector<double> prev_probe(n_probe, 0.0);  // Q_0 = 0
  const std::size_t n_subset = cfg.subset_fraction >= 1.0
                                   ? N
                                   : std::max<std::size_t>(
                                         1, static_cast<std::size_t>(std::lround(
                                                cfg.subset_fraction * static_cast<double>(N))));

  for (int k = 1; k <= cfg.iterations; ++k) {
    const auto t0 = Clock::now();

    std::vector<std::size_t> subset;
    if (n_subset == N) {
      subset.resize(N);
      std::iota(subset.begin(), subset.end(), 0);
    } else {
      std::iota(pool.begin(), pool.end(), 0);
      subset = sample_without_replacement(pool, n_subset, rng);
    }

    const std::vector<double> targets =
        targets_for(k == 1 ? nullptr : &result.q, transitions, subset, threads);

    if (cfg.regressor == RegressorKind::extra_trees) {
      ml::TreeEnsembleParams tp = cfg.tree_params;
      tp.task = ml::TreeTask::regression;
      tp.seed = mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(k));
      const std::vector<double> X = flat_encodings(transitions, subset);
      result.q.regressor = ml::et_fit(X, subset.size(), kEncodingDim, targets, tp, threads);
    } else {
      Eigen::MatrixXd X(static_cast<Eigen::Index>(subset.size()),
                        static_cast<Eigen::Index>(kEncodingDim));
      Eigen::VectorXd y(static_cast<Eigen::Index>(subset.size()));
      std::vector<std::size_t> order(subset.size());
      for (int e = 0; e < cfg.net_epochs_per_iteration; ++e) {
        std::iota(order.begin(), order.end(), 0);
        Rng erng(mix_seed(cfg.seed, 7919 * static_cast<std::uint64_t>(k) +
                                        static_cast<std::uint64_t>(e)));
        erng.shuffle(order);
        for (std::size_t r = 0; r < order.size(); ++r) {
          const auto& tr = transitions[subset[order[r]]];
          const Encoding enc = encode(tr.state, tr.action);
          for (std::size_t j = 0; j < kEncodingDim; ++j) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = enc[j];
          }
          y[static_cast<Eigen::Index>(r)] = targets[order[r]];
        }
        net.fit_epoch(X, y, cfg.net_batch_size);
      }
      result.q.regressor = net;
    }

    const std::vector<double> cur = result.q.values(probe, threads);
    double delta = 0.0;
    for (std::size_t i = 0; i < n_probe; ++i) delta += std::abs(cur[i] - prev_probe[i]);
    delta /= static_cast<double>(n_probe);
    prev_probe = cur;

    result.trace.mean_abs_delta_q.push_back(delta);
    result.trace.wall_ms.push_back(ms_since(t0));

    if (cfg.early_stop_epsilon > 0.0 && delta <= cfg.early_stop_epsilon) break;
  }
  return result;
}

void QLearningConfig::validate() const {
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!(probe_fraction > 0.0 && probe_fraction <= 1.0)) {
    throw ConfigError("probe_fraction must be in (0, 1]");
  }
}

QLearningResult q_learning_train(std::span<const mdp::Transition> transitions,
                                 const QLearningConfig& cfg) {
  cfg.validate();
  const std::size_t N = transitions.size();
  if (N == 0) throw ValidationError("q_learning_train: need at least one transition");

  Rng rng(mix_seed(cfg.seed, 0x41a));
  std::size_t n_probe = static_cast<std::size_t>(
      std::lround(cfg.probe_fraction * static_cast<double>(N)));
  n_probe = std::clamp(n_probe, std::min(cfg.probe_min, N), std::min(cfg.probe_max, N));
  std::vector<std::size_t> pool(N);
  std::iota(pool.begin(), pool.end(), 0);
  const std::vector<std::size_t> probe_idx = sample_without_replacement(pool, n_probe, rng);
  std::vector<Encoding> probe;
  probe.reserve(n_probe);
  for (std::size_t i : probe_idx) {
    probe.push_back(encode(transitions[i].state, transitions[i].action));
  }

  ml::MLPConfig nc = cfg.net_params;
  nc.seed = mix_seed(cfg.seed, 0x9e8);
  nc.learning_rate = cfg.alpha;
  ml::MLPModel net(static_cast<int>(kEncodingDim), nc);
  set_input_normalization(net, transitions);

  QLearningResult result;
  result.q.gamma = cfg.gamma;
  result.q.regressor = net;
  std::vector<double> prev_probe = result.q.values(probe);

  Eigen::MatrixXd X1(1, static_cast<Eigen::Index>(kEncodingDim));
  Eigen::VectorXd y1(1);
  for (std::size_t i = 0; i < N; ++i) {
    const auto& tr = transitions[i];
    double target = tr.reward;
    if (!tr.terminal) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp::kNumActions; ++a) {
        best = std::max(best, net.predict(encode(tr.next_state, mdp::action_from_index(a))));
      }
      target += cfg.gamma * best;
    }
    const Encoding enc = encode(tr.state, tr.action);
    if (nc.optimizer == ml::MLPOptimizer::sgd) {
      net.sgd_step(enc, target, cfg.alpha);
    } else {
      for (std::size_t j = 0; j < kEncodingDim; ++j) {
        X1(0, static_cast<Eigen::Index>(j)) = enc[j];
      }
      y1[0] = target;
      net.fit_epoch(X1, y1, 1);
    }

    const bool episode_end =
        i + 1 == N || transitions[i + 1].admission_id != tr.admission_id;
    if (episode_end) {
      result.q.regressor = net;
      const std::vector<double> cur = result.q.values(probe);
      double delta = 0.0;
      for (std::size_t p = 0; p < n_probe; ++p) delta += std::abs(cur[p] - prev_probe[p]);
      result.per_episode_delta.push_back(delta / static_cast<double>(n_probe));
      prev_probe = cur;
    }
  }
  result.q.regressor = net;
  return result;
}

// --- serialization ----------------------------------------------------------

namespace {

json tree_to_json(const ml::Tree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    json jn = {n.feature, n.threshold, n.left, n.right, n.leaf_value,
               n.impurity_decrease, n.n_samples};
    if (!n.class_counts.empty()) jn.push_back(n.class_counts);
    nodes.push_back(std::move(jn));
  }
  return nodes;
}

ml::Tree tree_from_json(const json& jt) {
  ml::Tree tree;
  for (const auto& jn : jt) {
    ml::TreeNode n;
    n.feature = jn.at(0).get<std::int32_t>();
    n.threshold = jn.at(1).get<double>();
    n.left = jn.at(2).get<std::int32_t>();
    n.right = jn.at(3).get<std::int32_t>();
    n.leaf_value = jn.at(4).get<double>();
    n.impurity_decrease = jn.at(5).get<double>();
    n.n_samples = jn.at(6).get<std::int32_t>();
    if (jn.size() > 7) n.class_counts = jn.at(7).get<std::vector<double>>();
    tree.nodes.push_back(std::move(n));
  }
  return tree;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

json ensemble_to_json(const ml::TreeEnsemble& ens) {
  const auto& p = ens.params();
  json jp = {{"n_trees", p.n_trees},
             {"k_features", p.k_features},
             {"min_leaf", p.min_leaf},
             {"seed", p.seed},
             {"task", p.task == ml::TreeTask::regression ? "regression" : "classification"},
             {"n_classes", p.n_classes}};
  json trees = json::array();
  for (const auto& t : ens.trees()) trees.push_back(tree_to_json(t));
  return {{"params", jp},
          {"n_features", ens.n_features()},
          {"n_classes", ens.n_classes()},
          {"trees", trees}};
}

ml::TreeEnsemble ensemble_from_json(const json& j) {
  ml::TreeEnsembleParams p;
  const auto& jp = j.at("params");
  p.n_trees = jp.at("n_trees").get<int>();
  p.k_features = jp.at("k_features").get<int>();
  p.min_leaf = jp.at("min_leaf").get<int>();
  p.seed = jp.at("seed").get<std::uint64_t>();
  p.task = jp.at("task").get<std::string>() == "regression" ? ml::TreeTask::regression
                                                            : ml::TreeTask::classification;
  p.n_classes = jp.at("n_classes").get<int>();
  std::vector<ml::Tree> trees;
  for (const auto& jt : j.at("trees")) trees.push_back(tree_from_json(jt));
  return ml::TreeEnsemble::from_parts(p, j.at("n_features").get<std::size_t>(),
                                      j.at("n_classes").get<int>(), std::move(trees));
}

json mlp_to_json(const ml::MLPModel& net) {
  const auto& c = net.config();
  json jc = {{"hidden_sizes", c.hidden_sizes},
             {"learning_rate", c.learning_rate},
             {"l2", c.l2},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"epsilon", c.epsilon},
             {"optimizer", c.optimizer == ml::MLPOptimizer::adam ? "adam" : "sgd"},
             {"seed", c.seed}};
  json weights = json::array();
  for (const auto& w : net.weights()) weights.push_back(matrix_to_json(w));
  json biases = json::array();
  for (const auto& b : net.biases()) biases.push_back(vector_to_json(b));
  json out = {{"config", jc},
              {"input_dim", net.input_dim()},
              {"weights", weights},
              {"biases", biases},
              {"step", net.step_count()}};
  if (net.has_normalization()) {
    out["norm_mean"] = vector_to_json(net.norm_mean());
    out["norm_sd"] = vector_to_json(net.norm_sd());
  }
  return out;
}

ml::MLPModel mlp_from_json(const json& j) {
  ml::MLPConfig c;
  const auto& jc = j.at("config");
  c.hidden_sizes = jc.at("hidden_sizes").get<std::vector<int>>();
  c.learning_rate = jc.at("learning_rate").get<double>();
  c.l2 = jc.at("l2").get<double>();
  c.beta1 = jc.at("beta1").get<double>();
  c.beta2 = jc.at("beta2").get<double>();
  c.epsilon = jc.at("epsilon").get<double>();
  c.optimizer = jc.at("optimizer").get<std::string>() == "adam" ? ml::MLPOptimizer::adam
                                                                : ml::MLPOptimizer::sgd;
  c.seed = jc.at("seed").get<std::uint64_t>();
  ml::MLPModel net(j.at("input_dim").get<int>(), c);
  auto& w = net.mutable_weights();
  auto& b = net.mutable_biases();
  const auto& jw = j.at("weights");
  const auto& jb = j.at("biases");
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] = matrix_from_json(jw.at(l));
    b[l] = vector_from_json(jb.at(l));
  }
  if (j.contains("norm_mean")) {
    net.set_normalization(vector_from_json(j.at("norm_mean")),
                          vector_from_json(j.at("norm_sd")));
  }
  net.set_step_count(j.at("step").get<std::int64_t>());
  return net;
}

void save_qfunction(const std::string& path, const QFunction& q) {
  json j;
  j["schema"] = "ventrl.qfunction";
  j["schema_version"] = 1;
  j["encoding_version"] = q.encoding_version;
  j["gamma"] = q.gamma;
  j["reward_hash"] = hash_hex(q.reward_hash);
  if (const auto* trees = std::get_if<ml::TreeEnsemble>(&q.regressor)) {
    j["kind"] = "extra_trees";
    j["regressor"] = ensemble_to_json(*trees);
  } else if (const auto* net = std::get_if<ml::MLPModel>(&q.regressor)) {
    j["kind"] = "neural_net";
    j["regressor"] = mlp_to_json(*net);
  } else {
    throw ValidationError("cannot save an unfitted Q-function");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

QFunction load_qfunction(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed model file '" + path + "': " + e.what());
  }
  if (j.value("schema", "") != "ventrl.qfunction" || j.value("schema_version", 0) != 1) {
    throw ConfigError("schema-version mismatch in '" + path + "'");
  }
  QFunction q;
  q.encoding_version = j.at("encoding_version").get<int>();
  if (q.encoding_version != kEncodingVersion) {
    throw ConfigError("encoding-version mismatch in '" + path + "'");
  }
  q.gamma = j.at("gamma").get<double>();
  q.reward_hash = std::stoull(j.at("reward_hash").get<std::string>(), nullptr, 16);
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "extra_trees") {
    q.regressor = ensemble_from_json(j.at("regressor"));
  } else if (kind == "neural_net") {
    q.regressor = mlp_from_json(j.at("regressor"));
  } else {
    throw ParseError("unknown regressor kind in '" + path + "'");
  }
  return q;
}

}  // namespace ventrl::fqi
