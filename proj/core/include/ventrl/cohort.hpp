#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ventrl/common.hpp"
#include "ventrl/signals.hpp"

namespace ventrl::cohort {

struct VitalsSample {
  Signal signal;
  double time_min = 0.0;
  double value = 0.0;

  friend bool operator==(const VitalsSample&, const VitalsSample&) = default;
};

enum class EndReason : int {
  extubated = 0,
  sbt_failed,
  censored_at_discharge,
};

std::string_view end_reason_name(EndReason r);
EndReason end_reason_from_name(std::string_view name);

struct VentilationInterval {
  double start_min = 0.0;
  double end_min = 0.0;
  EndReason end_reason = EndReason::extubated;

  friend bool operator==(const VentilationInterval&, const VentilationInterval&) = default;
};

enum class SedationRoute : int {
  continuous_rate = 0,
  bolus,
};

std::string_view route_name(SedationRoute r);
SedationRoute route_from_name(std::string_view name);

struct SedationEvent {
  Drug drug = Drug::propofol;
  double dose = 0.0;  // units/hr for continuous_rate, units for bolus
  SedationRoute route = SedationRoute::continuous_rate;
  double start_min = 0.0;
  double end_min = 0.0;  // == start_min for boluses

  friend bool operator==(const SedationEvent&, const SedationEvent&) = default;
};

struct PatientEpisode {
  std::string admission_id;
  double age = 0.0;     // years
  double weight = 0.0;  // kg
  int gender_flag = 0;
  int emergency_flag = 0;
  int white_flag = 0;
  std::vector<VitalsSample> samples;
  std::vector<VentilationInterval> vent_intervals;
  std::vector<SedationEvent> sedation_events;
  bool discharged_alive = true;
  double discharge_min = 0.0;

  double total_ventilated_minutes() const;
  /// Throws ValidationError on the first violated invariant.
  void validate() const;

  friend bool operator==(const PatientEpisode&, const PatientEpisode&) = default;
};

/// Mean-reverting process parameters for one simulated continuous signal.
/// The long-run mean interpolates sick -> healthy with latent recovery.
struct SignalProcessConfig {
  double sick_mean = 0.0;
  double healthy_mean = 0.0;
  double baseline_sd = 0.0;      // per-patient offset of both means
  double reversion_rate = 0.02;  // per minute
  double noise_sd = 1.0;         // diffusion scale
  double sedation_shift = 0.0;   // added to mean per sedation level
  double meas_interval_mean = 60.0;  // exponential inter-arrival, minutes
  double meas_noise_sd = 0.0;
  double clip_lo = -1e30;
  double clip_hi = 1e30;
  double off_vent_mean = std::nan("");  // overrides means off-vent (vent settings)
};

struct SimConfig {
  int n_patients = 100;
  std::uint64_t seed = 1;

  // latent minutes-to-readiness, lognormal, clipped
  double recovery_log_mean = 7.78;  // ~2400 min
  double recovery_log_sd = 0.30;
  double recovery_min = 1500.0;
  double recovery_max = 7000.0;

  // behavior policy: extubation attempt at readiness + Exp(delay) or, with
  // premature_prob, readiness - gap with gap ~ N(mean, sd) truncated at 0
  double extubation_delay_mean = 240.0;
  double premature_prob = 0.2;
  double premature_gap_mean = 300.0;
  double premature_gap_sd = 120.0;
  double premature_gap_max = 0.0;  // 0 = uncapped

  // failed extubation: P(reintubation) = 1 - exp(-steepness * gap), with
  // rapid decompensation until support resumes
  double reintubation_risk_steepness = 1.0 / 260.0;
  double reintubation_delay_mean = 40.0;
  double reintubation_delay_floor = 20.0;
  double distress_recovery_factor = 0.6;  // effective recovery while decompensating
  double setback_fraction_lo = 0.2;
  double setback_fraction_hi = 0.5;

  double sedation_reeval_mean = 180.0;
  double sedation_explore_prob = 0.15;
  double bolus_prob = 0.15;

  double post_extubation_stay_mean = 480.0;
  double post_extubation_stay_floor = 120.0;
  double not_alive_prob = 0.0;
  double max_minutes = 20160.0;
  int max_intubations = 8;

  double rass_meas_interval_mean = 240.0;
  double vent_mode_meas_interval_mean = 240.0;

  std::array<SignalProcessConfig, kNumContinuousSignals> signals =
      default_signal_processes();

  static std::array<SignalProcessConfig, kNumContinuousSignals>
  default_signal_processes();

  /// Closed-form per-attempt reintubation probability for a premature
  /// extubation `gap` minutes before readiness.
  double reintubation_risk(double gap_min) const {
    return 1.0 - std::exp(-reintubation_risk_steepness * std::max(0.0, gap_min));
  }

  std::string canonical_string() const;  // for artifact fingerprints

  void validate() const;  // throws ConfigError
};

std::vector<PatientEpisode> simulate_cohort(const SimConfig& config);

/// Keeps admissions ventilated > 24 h total and discharged alive.
std::vector<PatientEpisode> filter_admissions(std::vector<PatientEpisode> episodes);

/// Disjoint split at admission granularity, deterministic per seed.
std::pair<std::vector<PatientEpisode>, std::vector<PatientEpisode>>
split_train_test(std::vector<PatientEpisode> episodes, double test_fraction,
                 std::uint64_t seed);

}  // namespace ventrl::cohort
