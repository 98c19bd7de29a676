#include "ventrl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ventrl::config {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
    }
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_signal_process(const json& j, const std::string& name,
                          cohort::SignalProcessConfig& p) {
  check_keys(j, "sim.signals." + name,
             {"sick_mean", "healthy_mean", "baseline_sd", "reversion_rate", "noise_sd",
              "sedation_shift", "meas_interval_mean", "meas_noise_sd", "clip_lo",
              "clip_hi", "off_vent_mean"});
  maybe(j, "sick_mean", p.sick_mean);
  maybe(j, "healthy_mean", p.healthy_mean);
  maybe(j, "baseline_sd", p.baseline_sd);
  maybe(j, "reversion_rate", p.reversion_rate);
  maybe(j, "noise_sd", p.noise_sd);
  maybe(j, "sedation_shift", p.sedation_shift);
  maybe(j, "meas_interval_mean", p.meas_interval_mean);
  maybe(j, "meas_noise_sd", p.meas_noise_sd);
  maybe(j, "clip_lo", p.clip_lo);
  maybe(j, "clip_hi", p.clip_hi);
  maybe(j, "off_vent_mean", p.off_vent_mean);
}

void parse_sim(const json& j, cohort::SimConfig& sim) {
  check_keys(j, "sim",
             {"n_patients", "recovery_log_mean", "recovery_log_sd", "recovery_min",
              "recovery_max", "extubation_delay_mean", "premature_prob",
              "premature_gap_mean", "premature_gap_sd", "premature_gap_max",
              "reintubation_risk_steepness", "reintubation_delay_mean",
              "reintubation_delay_floor", "distress_recovery_factor", "setback_fraction_lo",
              "setback_fraction_hi",
              "sedation_reeval_mean", "sedation_explore_prob", "bolus_prob",
              "post_extubation_stay_mean", "post_extubation_stay_floor",
              "not_alive_prob", "max_minutes", "max_intubations",
              "rass_meas_interval_mean", "vent_mode_meas_interval_mean", "signals"});
  maybe(j, "n_patients", sim.n_patients);
  maybe(j, "recovery_log_mean", sim.recovery_log_mean);
  maybe(j, "recovery_log_sd", sim.recovery_log_sd);
  maybe(j, "recovery_min", sim.recovery_min);
  maybe(j, "recovery_max", sim.recovery_max);
  maybe(j, "extubation_delay_mean", sim.extubation_delay_mean);
  maybe(j, "premature_prob", sim.premature_prob);
  maybe(j, "premature_gap_mean", sim.premature_gap_mean);
  maybe(j, "premature_gap_sd", sim.premature_gap_sd);
  maybe(j, "premature_gap_max", sim.premature_gap_max);
  maybe(j, "reintubation_risk_steepness", sim.reintubation_risk_steepness);
  maybe(j, "reintubation_delay_mean", sim.reintubation_delay_mean);
  maybe(j, "reintubation_delay_floor", sim.reintubation_delay_floor);
  maybe(j, "distress_recovery_factor", sim.distress_recovery_factor);
  maybe(j, "setback_fraction_lo", sim.setback_fraction_lo);
  maybe(j, "setback_fraction_hi", sim.setback_fraction_hi);
  maybe(j, "sedation_reeval_mean", sim.sedation_reeval_mean);
  maybe(j, "sedation_explore_prob", sim.sedation_explore_prob);
  maybe(j, "bolus_prob", sim.bolus_prob);
  maybe(j, "post_extubation_stay_mean", sim.post_extubation_stay_mean);
  maybe(j, "post_extubation_stay_floor", sim.post_extubation_stay_floor);
  maybe(j, "not_alive_prob", sim.not_alive_prob);
  maybe(j, "max_minutes", sim.max_minutes);
  maybe(j, "max_intubations", sim.max_intubations);
  maybe(j, "rass_meas_interval_mean", sim.rass_meas_interval_mean);
  maybe(j, "vent_mode_meas_interval_mean", sim.vent_mode_meas_interval_mean);
  if (j.contains("signals")) {
    for (const auto& [name, spec] : j.at("signals").items()) {
      const Signal sig = signal_from_name(name);
      if (!is_continuous(sig)) {
        throw ConfigError("sim.signals: '" + name + "' is not a continuous signal");
      }
      parse_signal_process(spec, name, sim.signals[static_cast<std::size_t>(sig)]);
    }
  }
}

void parse_ranges(const json& j, const std::string& section,
                  std::vector<mdp::VitalRange>& ranges) {
  ranges.clear();
  for (const auto& [name, bounds] : j.items()) {
    mdp::VitalRange r;
    r.signal = signal_from_name(name);
    if (!bounds.is_array() || bounds.size() != 2) {
      throw ConfigError(section + "." + name + " must be [min, max]");
    }
    r.min = bounds.at(0).get<double>();
    r.max = bounds.at(1).get<double>();
    ranges.push_back(r);
  }
}

void parse_reward(const json& j, mdp::RewardConfig& r) {
  check_keys(j, "reward",
             {"c1", "c2", "c3", "c4", "c5", "c6", "c7", "fluctuation_threshold", "gamma",
              "stability_vitals", "extubation_criteria"});
  maybe(j, "c1", r.c1);
  maybe(j, "c2", r.c2);
  maybe(j, "c3", r.c3);
  maybe(j, "c4", r.c4);
  maybe(j, "c5", r.c5);
  maybe(j, "c6", r.c6);
  maybe(j, "c7", r.c7);
  maybe(j, "fluctuation_threshold", r.fluctuation_threshold);
  maybe(j, "gamma", r.gamma);
  if (j.contains("stability_vitals")) {
    parse_ranges(j.at("stability_vitals"), "reward.stability_vitals", r.stability_vitals);
  }
  if (j.contains("extubation_criteria")) {
    parse_ranges(j.at("extubation_criteria"), "reward.extubation_criteria",
                 r.extubation_criteria);
  }
  r.validate();
}

void parse_gp(const json& j, gp::FitConfig& g) {
  check_keys(j, "gp", {"max_iters", "obs_cap", "noise_floor", "n_mixtures", "init_step"});
  maybe(j, "max_iters", g.max_iters);
  maybe(j, "obs_cap", g.obs_cap);
  maybe(j, "noise_floor", g.noise_floor);
  maybe(j, "n_mixtures", g.n_mixtures);
  maybe(j, "init_step", g.init_step);
}

void parse_tree(const json& j, const std::string& section, ml::TreeEnsembleParams& t) {
  check_keys(j, section, {"n_trees", "k_features", "min_leaf"});
  maybe(j, "n_trees", t.n_trees);
  maybe(j, "k_features", t.k_features);
  maybe(j, "min_leaf", t.min_leaf);
}

void parse_net(const json& j, const std::string& section, ml::MLPConfig& n) {
  check_keys(j, section,
             {"hidden_sizes", "learning_rate", "l2", "beta1", "beta2", "epsilon",
              "optimizer"});
  maybe(j, "hidden_sizes", n.hidden_sizes);
  maybe(j, "learning_rate", n.learning_rate);
  maybe(j, "l2", n.l2);
  maybe(j, "beta1", n.beta1);
  maybe(j, "beta2", n.beta2);
  maybe(j, "epsilon", n.epsilon);
  if (j.contains("optimizer")) {
    const std::string o = j.at("optimizer").get<std::string>();
    if (o == "adam") {
      n.optimizer = ml::MLPOptimizer::adam;
    } else if (o == "sgd") {
      n.optimizer = ml::MLPOptimizer::sgd;
    } else {
      throw ConfigError(section + ".optimizer must be adam or sgd");
    }
  }
}

void parse_fqi(const json& j, fqi::FqiConfig& f) {
  check_keys(j, "fqi",
             {"iterations", "subset_fraction", "gamma", "early_stop_epsilon",
              "net_epochs_per_iteration", "net_batch_size", "probe_fraction",
              "probe_min", "probe_max", "tree", "net"});
  maybe(j, "iterations", f.iterations);
  maybe(j, "subset_fraction", f.subset_fraction);
  maybe(j, "gamma", f.gamma);
  maybe(j, "early_stop_epsilon", f.early_stop_epsilon);
  maybe(j, "net_epochs_per_iteration", f.net_epochs_per_iteration);
  maybe(j, "net_batch_size", f.net_batch_size);
  maybe(j, "probe_fraction", f.probe_fraction);
  maybe(j, "probe_min", f.probe_min);
  maybe(j, "probe_max", f.probe_max);
  if (j.contains("tree")) parse_tree(j.at("tree"), "fqi.tree", f.tree_params);
  if (j.contains("net")) parse_net(j.at("net"), "fqi.net", f.net_params);
}

void parse_qlearn(const json& j, fqi::QLearningConfig& q) {
  check_keys(j, "qlearn", {"alpha", "gamma", "probe_fraction", "net"});
  maybe(j, "alpha", q.alpha);
  maybe(j, "gamma", q.gamma);
  maybe(j, "probe_fraction", q.probe_fraction);
  if (j.contains("net")) parse_net(j.at("net"), "qlearn.net", q.net_params);
}

void parse_policy(const json& j, policy::PolicyParams& p) {
  check_keys(j, "policy", {"n_trees", "k_features", "min_leaf"});
  maybe(j, "n_trees", p.n_trees);
  maybe(j, "k_features", p.k_features);
  maybe(j, "min_leaf", p.min_leaf);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path, std::uint64_t seed_override,
                               bool has_seed_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_text(ss.str(), seed_override, has_seed_override);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (in " + path + ")");
  }
}

RunConfig RunConfig::from_json_text(const std::string& text, std::uint64_t seed_override,
                                    bool has_seed_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "<root>",
             {"seed", "test_fraction", "sim", "gp", "reward", "fqi", "qlearn", "policy",
              "train_algo"});

  RunConfig cfg;
  maybe(j, "seed", cfg.seed);
  maybe(j, "test_fraction", cfg.test_fraction);
  if (j.contains("sim")) parse_sim(j.at("sim"), cfg.sim);
  if (j.contains("gp")) parse_gp(j.at("gp"), cfg.gp);
  if (j.contains("reward")) parse_reward(j.at("reward"), cfg.reward);
  if (j.contains("fqi")) parse_fqi(j.at("fqi"), cfg.fqi);
  if (j.contains("qlearn")) parse_qlearn(j.at("qlearn"), cfg.qlearn);
  if (j.contains("policy")) parse_policy(j.at("policy"), cfg.policy);
  maybe(j, "train_algo", cfg.train_algo);
  if (cfg.train_algo != "fqit" && cfg.train_algo != "nfq" && cfg.train_algo != "qlearn") {
    throw ConfigError("train_algo must be one of fqit, nfq, qlearn");
  }
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0, 1)");
  }

  if (has_seed_override) cfg.seed = seed_override;
  cfg.derive_seeds();
  cfg.sim.validate();
  cfg.reward.validate();
  cfg.fqi.validate();
  cfg.qlearn.validate();
  return cfg;
}

std::uint64_t RunConfig::cohort_hash() const {
  return fnv1a("seed=" + std::to_string(seed) + ";test_fraction=" +
               format_double(test_fraction) + ";" + sim.canonical_string());
}

std::uint64_t RunConfig::impute_hash() const {
  return fnv1a(hash_hex(cohort_hash()) + "|" + gp.canonical_string());
}

void RunConfig::derive_seeds() {
  sim.seed = seed;
  split_seed = mix_seed(seed, 1);
  fqi.seed = mix_seed(seed, 2);
  qlearn.seed = mix_seed(seed, 3);
  policy.seed = mix_seed(seed, 4);
}

}  // namespace ventrl::config
