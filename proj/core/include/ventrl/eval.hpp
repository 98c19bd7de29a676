#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ventrl/mdp.hpp"
#include "ventrl/policy.hpp"
#include "ventrl/simulator.hpp"

namespace ventrl::eval {

struct AdmissionMetrics {
  std::string admission_id;
  double agreement_fraction = 0.0;
  double vent_accuracy = 0.0;
  double sed_accuracy = 0.0;
  int reintubation_count = 0;
  double mean_accumulated_reward = 0.0;
  int group = 0;  // 0..5
};

/// Fraction of steps where the recommendation equals the logged joint action.
double agreement_fraction(const policy::PolicyModel& policy,
                          std::span<const mdp::Transition> episode_transitions);

/// Group 0 is exact agreement; deviations bin into five equal widths.
int deviation_group(double agreement);

int count_reintubations(const cohort::PatientEpisode& episode);

/// Mean per-step reward over an admission (undiscounted).
double accumulated_reward(std::span<const mdp::Transition> episode_transitions);

enum class ActionComponent : int { ventilation = 0, sedation = 1 };

double action_accuracy(const policy::PolicyModel& policy,
                       std::span<const mdp::Transition> transitions,
                       ActionComponent component);

/// Spearman rank correlation with average ranks for ties; 0 when fewer than
/// two points.
double spearman(std::span<const double> a, std::span<const double> b);

struct GroupSummary {
  int group = 0;
  int count = 0;
  double mean_reintubations = 0.0;
  double p25_reintubations = 0.0, p50_reintubations = 0.0, p75_reintubations = 0.0;
  double mean_reward = 0.0;
  double p25_reward = 0.0, p50_reward = 0.0, p75_reward = 0.0;
};

struct Report {
  std::vector<AdmissionMetrics> admissions;
  std::vector<GroupSummary> groups;  // non-empty groups only, ascending
  double ventilation_accuracy = 0.0;
  double sedation_accuracy = 0.0;
  double spearman_group_reintubations = 0.0;
};

/// Scores a policy on logged test data. Transitions must be grouped
/// contiguously by admission; episodes supply the reintubation counts.
Report evaluate_policy(const policy::PolicyModel& policy,
                       std::span<const mdp::Transition> transitions,
                       std::span<const cohort::PatientEpisode> episodes,
                       int threads = 1);

/// Writes admission_metrics.csv, group_summary.csv, accuracy.json and
/// importances.csv under out_dir; timings, when non-empty, land in
/// timings.json.
void write_report(const Report& report, const policy::PolicyModel& policy,
                  const std::string& out_dir,
                  const std::map<std::string, double>& timings = {});

/// evaluate + write in one step.
Report build_report(const policy::PolicyModel& policy,
                    std::span<const mdp::Transition> transitions,
                    std::span<const cohort::PatientEpisode> episodes,
                    const std::string& out_dir,
                    const std::map<std::string, double>& timings = {}, int threads = 1);

// --- simulator replay -------------------------------------------------------

/// State the policy sees when driving the simulator directly (no imputation;
/// true grid-time values).
mdp::StateVector observed_state(const cohort::EpisodeSimulator& sim);

using DecideFn = std::function<mdp::Action(const cohort::EpisodeSimulator&)>;

/// Builds one per-episode decision function; drivers may carry per-episode
/// state (the historical clinician plans ahead).
using DriverFactory = std::function<DecideFn(std::uint64_t episode_seed)>;

struct ReplayStats {
  int episodes = 0;
  double mean_reintubations = 0.0;
  double mean_reward = 0.0;  // per-step mean, averaged over episodes
};

/// Replays n_episodes fresh simulated admissions under the driver, computing
/// rewards with the given config. Patient seeds derive from `seed` the same
/// way simulate_cohort derives them, so a behavior-driven replay with the
/// cohort seed reproduces the logged cohort and two drivers compared under
/// one seed face identical latent patients.
ReplayStats replay(const cohort::SimConfig& cfg, const DriverFactory& make_driver,
                   int n_episodes, std::uint64_t seed, const mdp::RewardConfig& reward_cfg,
                   int threads = 1);

DriverFactory policy_driver(const policy::PolicyModel& policy);
DriverFactory behavior_driver(const cohort::SimConfig& cfg);

}  // namespace ventrl::eval
