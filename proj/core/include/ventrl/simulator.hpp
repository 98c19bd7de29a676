#pragma once

#include <array>
#include <optional>
#include <string>

#include "ventrl/cohort.hpp"
#include "ventrl/common.hpp"

namespace ventrl::cohort {

/// True patient state at a grid time, as seen by a bedside policy. Replay
/// builds MDP states from these snapshots directly, without imputation.
struct SimObservation {
  double t_min = 0.0;
  std::array<double, kNumContinuousSignals> vitals{};
  double rass = 0.0;
  double vent_mode = 0.0;
  std::array<double, kNumDrugs> drug_rates{};  // units/hr currently infusing
  int sed_level = 0;
  bool on_vent = false;
  double current_vent_start = 0.0;  // valid while on_vent
  int intubation_count = 0;
  double last_extubation_min = -1.0;
  double last_alarm_min = -1.0;  // stability bound violation (Table-1 ranges)
};

/// One admission's latent dynamics, advanced 10 minutes at a time under
/// externally chosen actions. The historical clinician and a learned policy
/// both drive episodes through this same stepper, so replayed outcomes are
/// directly comparable to logged ones.
class EpisodeSimulator {
 public:
  EpisodeSimulator(const SimConfig& cfg, std::uint64_t patient_seed,
                   std::string admission_id);

  const SimObservation& observe() const { return obs_; }
  bool done() const { return done_; }

  double age() const { return age_; }
  double weight() const { return weight_; }
  int gender_flag() const { return gender_flag_; }
  int emergency_flag() const { return emergency_flag_; }
  int white_flag() const { return white_flag_; }

  /// Latent recovery progress in [0, 1].
  double recovery() const { return recovery_; }
  /// Projected time at which recovery completes, given current progress.
  double readiness_min() const;
  bool reintubation_pending() const { return pending_reintubation_min_ >= 0.0; }

  /// Advances one 10-minute step under the requested action. A pending
  /// forced reintubation overrides vent_on = false. Calling after done()
  /// throws.
  void apply(bool vent_on, int sed_level);

  /// Assembles the logged episode (irregular samples, intervals, events).
  PatientEpisode to_episode() const;

  static constexpr double kGridStepMin = 10.0;

 private:
  void advance_processes(double dt);
  void emit_due_measurements();
  void set_sedation(int level);
  void start_ventilation();
  void stop_ventilation();
  void check_alarm();

  SimConfig cfg_;
  Rng rng_;
  std::string admission_id_;

  double age_ = 0.0, weight_ = 0.0;
  int gender_flag_ = 0, emergency_flag_ = 0, white_flag_ = 0;
  Drug primary_drug_ = Drug::propofol;

  double recovery_duration_ = 0.0;  // minutes of recovery needed at full rate
  double recovery_ = 0.0;
  bool not_alive_ = false;
  double death_recovery_frac_ = 1.0;

  std::array<double, kNumContinuousSignals> baseline_shift_{};
  std::array<double, kNumContinuousSignals> values_{};
  std::array<double, kNumSignals> next_meas_min_{};

  SimObservation obs_;
  bool done_ = false;
  bool discharged_alive_ = true;

  double pending_reintubation_min_ = -1.0;
  double post_stay_tail_ = 0.0;

  // episode record
  std::vector<VitalsSample> samples_;
  std::vector<VentilationInterval> intervals_;
  std::vector<SedationEvent> events_;
  std::optional<std::size_t> open_event_;  // index into events_
};

/// The historical clinician: extubates at readiness plus a sampled delay, or
/// occasionally early; tapers sedation as the patient recovers.
class BehaviorPolicy {
 public:
  BehaviorPolicy(const SimConfig& cfg, Rng rng);

  /// Action for the next 10-minute step.
  std::pair<bool, int> decide(const EpisodeSimulator& sim);

 private:
  double draw_attempt_time(const EpisodeSimulator& sim);
  int protocol_level(double recovery, bool on_vent) const;

  SimConfig cfg_;
  Rng rng_;
  int planned_for_intubation_ = -1;
  double attempt_min_ = 0.0;
  double next_sed_review_min_ = 0.0;
  int current_level_ = 3;
};

/// Runs one full episode under the built-in behavior policy.
PatientEpisode simulate_episode(const SimConfig& cfg, std::uint64_t patient_seed,
                                std::string admission_id);

}  // namespace ventrl::cohort
