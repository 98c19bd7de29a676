#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ventrl/cohort.hpp"
#include "ventrl/common.hpp"
#include "ventrl/gp.hpp"
#include "ventrl/signals.hpp"

namespace ventrl::mdp {

inline constexpr std::size_t kStateDim = 32;

// Fixed feature order of the state vector. Imputed signals occupy slots
// 5..16 in Signal order; the six dosage slots follow Drug order.
enum class Feature : int {
  age = 0,
  weight,
  gender_flag,
  emergency_flag,
  white_flag,
  heart_rate,
  respiratory_rate,
  spo2,
  arterial_ph,
  pao2,
  paco2,
  fio2,
  o2_flow,
  peep_set,
  tidal_volume,
  mean_bp,
  temperature,
  rass,
  vent_mode_code,
  dose_propofol,
  dose_fentanyl,
  dose_midazolam,
  dose_dexmedetomidine,
  dose_morphine,
  dose_hydromorphone,
  sed_level_current,
  vent_on_flag,
  minutes_into_current_ventilation,
  num_intubations_so_far,
  minutes_since_admission,
  minutes_since_last_vitals_alarm,
  minutes_off_ventilation,
};

using StateVector = std::array<double, kStateDim>;

const std::array<std::string_view, kStateDim>& feature_names();

inline double get(const StateVector& s, Feature f) {
  return s[static_cast<std::size_t>(f)];
}
inline constexpr std::size_t signal_feature_index(Signal s) {
  return 5 + static_cast<std::size_t>(s);
}

struct Action {
  int vent_bit = 0;   // 0 = off, 1 = on
  int sed_level = 0;  // 0..3

  friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr int kNumActions = 8;

inline int action_index(const Action& a) { return a.vent_bit * 4 + a.sed_level; }
inline Action action_from_index(int idx) { return {idx / 4, idx % 4}; }

struct VitalRange {
  Signal signal = Signal::heart_rate;
  double min = 0.0;
  double max = 0.0;
};

/// Reward shaping weights and guideline ranges. One-sided guideline bounds
/// are embedded as two-sided ranges with far sentinel opposite limits.
struct RewardConfig {
  double c1 = 0.1;   // stability bracket weight
  double c2 = 0.2;   // fluctuation penalty weight
  double c3 = 10.0;  // extubation bonus
  double c4 = 0.02;  // staying-off bonus
  double c5 = 2.5;   // per violated extubation criterion
  double c6 = 0.1;   // per-step on-ventilator cost (applied negatively)
  double c7 = 10.0;  // reintubation penalty
  std::vector<VitalRange> stability_vitals = default_stability_vitals();
  std::vector<VitalRange> extubation_criteria = default_extubation_criteria();
  double fluctuation_threshold = 0.2;
  double gamma = 0.99;

  static std::vector<VitalRange> default_stability_vitals();
  static std::vector<VitalRange> default_extubation_criteria();

  void validate() const;
  std::string canonical_string() const;
  std::uint64_t hash() const { return fnv1a(canonical_string()); }
};

struct Transition {
  std::string admission_id;
  int step_index = 0;
  StateVector state{};
  Action action{};
  StateVector next_state{};
  double reward = 0.0;
  bool terminal = false;
};

/// Weight-normalized equivalent dose thresholded into 4 levels; 0 = none.
int map_sedation_level(Drug drug, double dose_rate, double weight);

struct ImputedEpisode {
  cohort::PatientEpisode episode;
  gp::RegularSeries series;
};

StateVector build_state(const gp::RegularSeries& series,
                        const cohort::PatientEpisode& episode, std::size_t t_index);

/// Logged action over [t, t+10): ventilation setting for the coming interval
/// and the highest mapped sedation level among drugs active in it.
Action extract_action(const cohort::PatientEpisode& episode, std::size_t t_index,
                      double grid_step_min = 10.0);

struct RewardBreakdown {
  double vitals = 0.0;
  double vent_off = 0.0;
  double vent_on = 0.0;

  double total() const { return vitals + vent_off + vent_on; }
};

RewardBreakdown reward_components(const StateVector& s, const Action& a,
                                  const StateVector& s_next, const RewardConfig& cfg);

double reward(const StateVector& s, const Action& a, const StateVector& s_next,
              const RewardConfig& cfg);

std::vector<Transition> build_transitions(std::span<const ImputedEpisode> episodes,
                                          const RewardConfig& cfg);

}  // namespace ventrl::mdp
