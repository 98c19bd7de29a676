#include "ventrl/policy.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "model_json.hpp"

namespace ventrl::policy {

using json = nlohmann::json;

PolicyModel extract_policy(const fqi::QFunction& q,
                           std::span<const mdp::StateVector> states,
                           const PolicyParams& params, int threads,
                           std::string provenance) {
  if (states.empty()) throw ValidationError("extract_policy: no states");
  if (!q.fitted()) throw ValidationError("extract_policy: unfitted Q-function");

  std::vector<double> labels(states.size());
  parallel_for(states.size(), threads, [&](std::size_t i) {
    labels[i] = mdp::action_index(fqi::greedy_action(q, states[i]));
  });

  const bool single_class =
      std::all_of(labels.begin(), labels.end(), [&](double l) { return l == labels[0]; });
  if (single_class) {
    std::cerr << "note: policy labels collapse to a single action; fitting a constant policy\n";
  }

  std::vector<double> X(states.size() * mdp::kStateDim);
  for (std::size_t i = 0; i < states.size(); ++i) {
    std::copy(states[i].begin(), states[i].end(),
              X.begin() + static_cast<std::ptrdiff_t>(i * mdp::kStateDim));
  }
  ml::TreeEnsembleParams tp;
  tp.n_trees = params.n_trees;
  tp.min_leaf = params.min_leaf;
  tp.k_features = params.k_features;
  tp.seed = params.seed;
  tp.task = ml::TreeTask::classification;
  tp.n_classes = mdp::kNumActions;

  PolicyModel model;
  model.classifier = ml::et_fit(X, states.size(), mdp::kStateDim, labels, tp, threads);
  model.importances = ml::gini_importance(model.classifier);
  model.provenance = std::move(provenance);
  model.reward_hash = q.reward_hash;
  return model;
}

Recommendation recommend(const PolicyModel& policy, const mdp::StateVector& s) {
  const std::vector<double> probs = policy.classifier.predict_proba(s);
  Recommendation rec;
  std::copy(probs.begin(), probs.end(), rec.probabilities.begin());
  int best = 0;
  for (int c = 1; c < mdp::kNumActions; ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  rec.action = mdp::action_from_index(best);
  return rec;
}

std::vector<std::pair<std::string_view, double>> feature_importances(
    const PolicyModel& policy) {
  const auto& names = mdp::feature_names();
  std::vector<std::pair<std::string_view, double>> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    out.emplace_back(names[i], policy.importances[i]);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

void save_policy(const std::string& path, const PolicyModel& policy) {
  json j;
  j["schema"] = "ventrl.policy";
  j["schema_version"] = 1;
  j["provenance"] = policy.provenance;
  j["reward_hash"] = hash_hex(policy.reward_hash);
  j["importances"] = policy.importances;
  j["classifier"] = fqi::ensemble_to_json(policy.classifier);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

PolicyModel load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed policy file '" + path + "': " + e.what());
  }
  if (j.value("schema", "") != "ventrl.policy" || j.value("schema_version", 0) != 1) {
    throw ConfigError("schema-version mismatch in '" + path + "'");
  }
  PolicyModel model;
  model.provenance = j.at("provenance").get<std::string>();
  model.reward_hash = std::stoull(j.at("reward_hash").get<std::string>(), nullptr, 16);
  model.importances = j.at("importances").get<std::vector<double>>();
  model.classifier = fqi::ensemble_from_json(j.at("classifier"));
  return model;
}

}  // namespace ventrl::policy
