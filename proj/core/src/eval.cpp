#include "ventrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "ventrl/csv.hpp"

namespace ventrl::eval {

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

std::vector<double> ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double agreement_fraction(const policy::PolicyModel& policy,
                          std::span<const mdp::Transition> episode_transitions) {
  if (episode_transitions.empty()) {
    throw ValidationError("agreement_fraction: no transitions");
  }
  std::size_t matches = 0;
  for (const auto& tr : episode_transitions) {
    if (recommend(policy, tr.state).action == tr.action) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(episode_transitions.size());
}

int deviation_group(double agreement) {
  const double deviation = 1.0 - agreement;
  if (deviation <= 0.0) return 0;
  if (deviation <= 0.2) return 1;
  if (deviation <= 0.4) return 2;
  if (deviation <= 0.6) return 3;
  if (deviation <= 0.8) return 4;
  return 5;
}

int count_reintubations(const cohort::PatientEpisode& episode) {
  return std::max(0, static_cast<int>(episode.vent_intervals.size()) - 1);
}

double accumulated_reward(std::span<const mdp::Transition> episode_transitions) {
  if (episode_transitions.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& tr : episode_transitions) sum += tr.reward;
  return sum / static_cast<double>(episode_transitions.size());
}

double action_accuracy(const policy::PolicyModel& policy,
                       std::span<const mdp::Transition> transitions,
                       ActionComponent component) {
  if (transitions.empty()) return 0.0;
  std::size_t matches = 0;
  for (const auto& tr : transitions) {
    const mdp::Action rec = recommend(policy, tr.state).action;
    const bool match = component == ActionComponent::ventilation
                           ? rec.vent_bit == tr.action.vent_bit
                           : rec.sed_level == tr.action.sed_level;
    if (match) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(transitions.size());
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  double mean = 0.5 * static_cast<double>(n + 1);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

Report evaluate_policy(const policy::PolicyModel& policy,
                       std::span<const mdp::Transition> transitions,
                       std::span<const cohort::PatientEpisode> episodes, int threads) {
  if (transitions.empty() || episodes.empty()) {
    throw ValidationError("no admissions to evaluate");
  }

  // admission-contiguous slices
  std::vector<std::pair<std::size_t, std::size_t>> slices;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= transitions.size(); ++i) {
    if (i == transitions.size() || transitions[i].admission_id != transitions[begin].admission_id) {
      slices.emplace_back(begin, i);
      begin = i;
    }
  }

  std::map<std::string, const cohort::PatientEpisode*> by_id;
  for (const auto& ep : episodes) by_id[ep.admission_id] = &ep;

  Report report;
  report.admissions.resize(slices.size());
  parallel_for(slices.size(), threads, [&](std::size_t s) {
    const auto [lo, hi] = slices[s];
    const std::span<const mdp::Transition> ep_tr = transitions.subspan(lo, hi - lo);
    AdmissionMetrics m;
    m.admission_id = ep_tr.front().admission_id;
    m.agreement_fraction = agreement_fraction(policy, ep_tr);
    m.vent_accuracy = action_accuracy(policy, ep_tr, ActionComponent::ventilation);
    m.sed_accuracy = action_accuracy(policy, ep_tr, ActionComponent::sedation);
    m.mean_accumulated_reward = accumulated_reward(ep_tr);
    m.group = deviation_group(m.agreement_fraction);
    const auto it = by_id.find(m.admission_id);
    if (it == by_id.end()) {
      throw ValidationError("transitions reference unknown admission " + m.admission_id);
    }
    m.reintubation_count = count_reintubations(*it->second);
    report.admissions[s] = std::move(m);
  });

  report.ventilation_accuracy = action_accuracy(policy, transitions, ActionComponent::ventilation);
  report.sedation_accuracy = action_accuracy(policy, transitions, ActionComponent::sedation);

  std::vector<double> group_idx, group_mean_reint;
  for (int g = 0; g <= 5; ++g) {
    std::vector<double> reints, rewards;
    for (const auto& m : report.admissions) {
      if (m.group == g) {
        reints.push_back(m.reintubation_count);
        rewards.push_back(m.mean_accumulated_reward);
      }
    }
    if (reints.empty()) continue;
    GroupSummary gs;
    gs.group = g;
    gs.count = static_cast<int>(reints.size());
    gs.mean_reintubations = std::accumulate(reints.begin(), reints.end(), 0.0) /
                            static_cast<double>(reints.size());
    gs.p25_reintubations = quantile(reints, 0.25);
    gs.p50_reintubations = quantile(reints, 0.50);
    gs.p75_reintubations = quantile(reints, 0.75);
    gs.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                     static_cast<double>(rewards.size());
    gs.p25_reward = quantile(rewards, 0.25);
    gs.p50_reward = quantile(rewards, 0.50);
    gs.p75_reward = quantile(rewards, 0.75);
    report.groups.push_back(gs);
    group_idx.push_back(g);
    group_mean_reint.push_back(gs.mean_reintubations);
  }
  report.spearman_group_reintubations = spearman(group_idx, group_mean_reint);
  return report;
}

void write_report(const Report& report, const policy::PolicyModel& policy,
                  const std::string& out_dir,
                  const std::map<std::string, double>& timings) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create report directory '" + out_dir + "'");

  {
    csv::Writer w(out_dir + "/admission_metrics.csv", "admission_metrics");
    w.header({"admission_id", "agreement_fraction", "vent_accuracy", "sed_accuracy",
              "reintubation_count", "mean_accumulated_reward", "group"});
    for (const auto& m : report.admissions) {
      w.row({m.admission_id, format_double(m.agreement_fraction),
             format_double(m.vent_accuracy), format_double(m.sed_accuracy),
             std::to_string(m.reintubation_count),
             format_double(m.mean_accumulated_reward), std::to_string(m.group)});
    }
  }
  {
    csv::Writer w(out_dir + "/group_summary.csv", "group_summary");
    w.header({"group", "count", "mean_reintubations", "p25_reintubations",
              "p50_reintubations", "p75_reintubations", "mean_reward", "p25_reward",
              "p50_reward", "p75_reward"});
    for (const auto& g : report.groups) {
      w.row({std::to_string(g.group), std::to_string(g.count),
             format_double(g.mean_reintubations), format_double(g.p25_reintubations),
             format_double(g.p50_reintubations), format_double(g.p75_reintubations),
             format_double(g.mean_reward), format_double(g.p25_reward),
             format_double(g.p50_reward), format_double(g.p75_reward)});
    }
  }
  {
    csv::Writer w(out_dir + "/importances.csv", "importances");
    w.header({"feature", "weight"});
    for (const auto& [name, weight] : feature_importances(policy)) {
      w.row({std::string(name), format_double(weight)});
    }
  }
  {
    nlohmann::json j;
    j["ventilation_accuracy"] = report.ventilation_accuracy;
    j["sedation_accuracy"] = report.sedation_accuracy;
    j["spearman_group_reintubations"] = report.spearman_group_reintubations;
    j["n_test_admissions"] = report.admissions.size();
    j["policy_provenance"] = policy.provenance;
    std::ofstream out(out_dir + "/accuracy.json", std::ios::binary);
    if (!out) throw IoError("cannot write accuracy.json");
    out << j.dump(2) << "\n";
  }
  if (!timings.empty()) {
    nlohmann::json j(timings);
    std::ofstream out(out_dir + "/timings.json", std::ios::binary);
    if (!out) throw IoError("cannot write timings.json");
    out << j.dump(2) << "\n";
  }
}

Report build_report(const policy::PolicyModel& policy,
                    std::span<const mdp::Transition> transitions,
                    std::span<const cohort::PatientEpisode> episodes,
                    const std::string& out_dir,
                    const std::map<std::string, double>& timings, int threads) {
  Report report = evaluate_policy(policy, transitions, episodes, threads);
  write_report(report, policy, out_dir, timings);
  return report;
}

mdp::StateVector observed_state(const cohort::EpisodeSimulator& sim) {
  const auto& obs = sim.observe();
  mdp::StateVector s{};
  auto put = [&](mdp::Feature f, double v) { s[static_cast<std::size_t>(f)] = v; };
  put(mdp::Feature::age, sim.age());
  put(mdp::Feature::weight, sim.weight());
  put(mdp::Feature::gender_flag, sim.gender_flag());
  put(mdp::Feature::emergency_flag, sim.emergency_flag());
  put(mdp::Feature::white_flag, sim.white_flag());
  for (std::size_t d = 0; d < kNumContinuousSignals; ++d) {
    s[mdp::signal_feature_index(static_cast<Signal>(d))] = obs.vitals[d];
  }
  put(mdp::Feature::rass, obs.rass);
  put(mdp::Feature::vent_mode_code, obs.vent_mode);
  for (std::size_t d = 0; d < kNumDrugs; ++d) {
    s[static_cast<std::size_t>(mdp::Feature::dose_propofol) + d] =
        obs.drug_rates[d] / sim.weight();
  }
  put(mdp::Feature::sed_level_current, obs.sed_level);
  put(mdp::Feature::vent_on_flag, obs.on_vent ? 1.0 : 0.0);
  put(mdp::Feature::minutes_into_current_ventilation,
      obs.on_vent ? obs.t_min - obs.current_vent_start : 0.0);
  put(mdp::Feature::num_intubations_so_far, obs.intubation_count);
  put(mdp::Feature::minutes_since_admission, obs.t_min);
  put(mdp::Feature::minutes_since_last_vitals_alarm,
      obs.last_alarm_min >= 0.0 ? obs.t_min - obs.last_alarm_min : obs.t_min);
  put(mdp::Feature::minutes_off_ventilation,
      obs.on_vent ? 0.0 : obs.t_min - std::max(obs.last_extubation_min, 0.0));
  return s;
}

ReplayStats replay(const cohort::SimConfig& cfg, const DriverFactory& make_driver,
                   int n_episodes, std::uint64_t seed, const mdp::RewardConfig& reward_cfg,
                   int threads) {
  if (n_episodes < 1) throw ConfigError("replay: n_episodes must be >= 1");
  std::vector<double> reints(static_cast<std::size_t>(n_episodes), 0.0);
  std::vector<double> rewards(static_cast<std::size_t>(n_episodes), 0.0);

  parallel_for(static_cast<std::size_t>(n_episodes), threads, [&](std::size_t i) {
    const std::uint64_t patient_seed = mix_seed(seed, i);
    char id[32];
    std::snprintf(id, sizeof(id), "replay-%06zu", i + 1);
    cohort::EpisodeSimulator sim(cfg, patient_seed, id);
    DecideFn decide = make_driver(patient_seed);

    mdp::StateVector prev = observed_state(sim);
    double total = 0.0;
    std::size_t steps = 0;
    while (!sim.done()) {
      const mdp::Action a = decide(sim);
      sim.apply(a.vent_bit != 0, a.sed_level);
      const mdp::StateVector next = observed_state(sim);
      total += mdp::reward(prev, a, next, reward_cfg);
      prev = next;
      ++steps;
    }
    reints[i] = std::max(0, sim.observe().intubation_count - 1);
    rewards[i] = steps > 0 ? total / static_cast<double>(steps) : 0.0;
  });

  ReplayStats stats;
  stats.episodes = n_episodes;
  stats.mean_reintubations = std::accumulate(reints.begin(), reints.end(), 0.0) /
                             static_cast<double>(n_episodes);
  stats.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                      static_cast<double>(n_episodes);
  return stats;
}

DriverFactory policy_driver(const policy::PolicyModel& policy) {
  return [&policy](std::uint64_t) -> DecideFn {
    return [&policy](const cohort::EpisodeSimulator& sim) {
      return recommend(policy, observed_state(sim)).action;
    };
  };
}

DriverFactory behavior_driver(const cohort::SimConfig& cfg) {
  return [cfg](std::uint64_t episode_seed) -> DecideFn {
    auto bp = std::make_shared<cohort::BehaviorPolicy>(
        cfg, Rng::seeded(mix_seed(episode_seed, 0x5ed)));
    return [bp](const cohort::EpisodeSimulator& sim) {
      auto [vent_on, sed] = bp->decide(sim);
      return mdp::Action{vent_on ? 1 : 0, sed};
    };
  };
}

}  // namespace ventrl::eval
