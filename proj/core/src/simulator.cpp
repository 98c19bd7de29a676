#include "ventrl/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace ventrl::cohort {

namespace {

constexpr double kSubStepMin = 2.5;

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Mid-bin sedation intensity for a target level, jittered within the bin.
double intensity_for_level(int level, Rng& rng) {
  if (level <= 0) return 0.0;
  static constexpr double base[3] = {0.7, 2.3, 4.5};
  static constexpr double lo[3] = {0.1, kSedationLevel2Threshold, kSedationLevel3Threshold};
  static constexpr double hi[3] = {kSedationLevel2Threshold * 0.95,
                                   kSedationLevel3Threshold * 0.95, 6.0};
  const double v = base[level - 1] * (1.0 + 0.12 * rng.normal());
  return clamp(v, lo[level - 1], hi[level - 1]);
}

}  // namespace

EpisodeSimulator::EpisodeSimulator(const SimConfig& cfg, std::uint64_t patient_seed,
                                   std::string admission_id)
    : cfg_(cfg), rng_(Rng::seeded(patient_seed)), admission_id_(std::move(admission_id)) {
  age_ = std::floor(rng_.uniform(32.0, 88.0));
  weight_ = clamp(rng_.normal(80.0, 16.0), 45.0, 150.0);
  gender_flag_ = rng_.bernoulli(0.45) ? 1 : 0;
  emergency_flag_ = rng_.bernoulli(0.6) ? 1 : 0;
  white_flag_ = rng_.bernoulli(0.7) ? 1 : 0;
  primary_drug_ = static_cast<Drug>(rng_.uniform_index(kNumDrugs));

  recovery_duration_ = clamp(rng_.lognormal(cfg_.recovery_log_mean, cfg_.recovery_log_sd),
                             cfg_.recovery_min, cfg_.recovery_max);
  not_alive_ = rng_.bernoulli(cfg_.not_alive_prob);
  death_recovery_frac_ = not_alive_ ? rng_.uniform(0.25, 0.75) : 2.0;
  post_stay_tail_ = cfg_.post_extubation_stay_floor +
                    rng_.exponential(cfg_.post_extubation_stay_mean);

  for (std::size_t s = 0; s < kNumContinuousSignals; ++s) {
    const auto& p = cfg_.signals[s];
    baseline_shift_[s] = rng_.normal(0.0, p.baseline_sd);
    values_[s] = clamp(p.sick_mean + baseline_shift_[s] + rng_.normal(0.0, p.noise_sd),
                       p.clip_lo, p.clip_hi);
  }
  next_meas_min_.fill(0.0);

  obs_.t_min = 0.0;
  obs_.sed_level = 0;
  obs_.last_extubation_min = -1.0;
  obs_.last_alarm_min = -1.0;
  start_ventilation();
  obs_.rass = 0.0;
  obs_.vent_mode = 1.0;
  emit_due_measurements();
  check_alarm();
  for (std::size_t s = 0; s < kNumContinuousSignals; ++s) obs_.vitals[s] = values_[s];
}

double EpisodeSimulator::readiness_min() const {
  return obs_.t_min + (1.0 - recovery_) * recovery_duration_;
}

void EpisodeSimulator::start_ventilation() {
  if (obs_.on_vent) return;
  obs_.on_vent = true;
  obs_.current_vent_start = obs_.t_min;
  obs_.intubation_count += 1;
  pending_reintubation_min_ = -1.0;
  intervals_.push_back({obs_.t_min, obs_.t_min, EndReason::censored_at_discharge});
  if (obs_.t_min > 0.0) {
    samples_.push_back({Signal::vent_mode, obs_.t_min, 1.0});
  }
}

void EpisodeSimulator::stop_ventilation() {
  if (!obs_.on_vent) return;
  obs_.on_vent = false;
  obs_.last_extubation_min = obs_.t_min;
  intervals_.back().end_min = obs_.t_min;
  intervals_.back().end_reason = EndReason::extubated;
  samples_.push_back({Signal::vent_mode, obs_.t_min, 0.0});

  // premature liberation risks decompensation and a forced reintubation;
  // sub-millisecond gaps from progress rounding count as ready
  const double gap = std::max(0.0, (1.0 - recovery_) * recovery_duration_);
  if (gap > 1e-6 && obs_.intubation_count < cfg_.max_intubations &&
      rng_.bernoulli(cfg_.reintubation_risk(gap))) {
    pending_reintubation_min_ =
        obs_.t_min + std::max(cfg_.reintubation_delay_floor,
                              rng_.exponential(cfg_.reintubation_delay_mean));
    recovery_ *= 1.0 - rng_.uniform(cfg_.setback_fraction_lo, cfg_.setback_fraction_hi);
  }
}

void EpisodeSimulator::set_sedation(int level) {
  level = std::clamp(level, 0, 3);
  if (level == obs_.sed_level && obs_.t_min > 0.0) return;
  if (open_event_) {
    events_[*open_event_].end_min = obs_.t_min;
    open_event_.reset();
  }
  const int prev = obs_.sed_level;
  obs_.sed_level = level;
  obs_.drug_rates.fill(0.0);
  if (level > 0) {
    const double intensity = intensity_for_level(level, rng_);
    const double rate = intensity * weight_ /
                        kDrugEquivalenceFactor[static_cast<std::size_t>(primary_drug_)];
    obs_.drug_rates[static_cast<std::size_t>(primary_drug_)] = rate;
    events_.push_back({primary_drug_, rate, SedationRoute::continuous_rate,
                       obs_.t_min, obs_.t_min});
    open_event_ = events_.size() - 1;
    if (level > prev && rng_.bernoulli(cfg_.bolus_prob)) {
      // loading bolus worth ~30 min of the new rate
      events_.push_back({primary_drug_, rate * 0.5, SedationRoute::bolus,
                         obs_.t_min, obs_.t_min});
      std::swap(events_[events_.size() - 2], events_[events_.size() - 1]);
      open_event_ = events_.size() - 1;
    }
  }
  // sedation changes prompt a consciousness chart entry
  if (obs_.t_min > 0.0) {
    samples_.push_back({Signal::rass, obs_.t_min, obs_.rass});
  }
}

void EpisodeSimulator::advance_processes(double dt) {
  // a failed liberation drags the physiology back toward the sick profile
  const double effective_recovery = pending_reintubation_min_ >= 0.0
                                        ? recovery_ * cfg_.distress_recovery_factor
                                        : recovery_;
  for (std::size_t s = 0; s < kNumContinuousSignals; ++s) {
    const auto& p = cfg_.signals[s];
    double mean;
    if (!obs_.on_vent && !std::isnan(p.off_vent_mean)) {
      mean = p.off_vent_mean;
    } else {
      mean = p.sick_mean + (p.healthy_mean - p.sick_mean) * effective_recovery +
             baseline_shift_[s];
      mean += p.sedation_shift * obs_.sed_level;
    }
    const double decay = std::exp(-p.reversion_rate * dt);
    const double sd = p.noise_sd * std::sqrt(std::max(0.0, 1.0 - decay * decay));
    values_[s] = clamp(mean + (values_[s] - mean) * decay + sd * rng_.normal(),
                       p.clip_lo, p.clip_hi);
  }
}

void EpisodeSimulator::emit_due_measurements() {
  const double t = obs_.t_min;
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    double interval_mean;
    if (s < kNumContinuousSignals) {
      interval_mean = cfg_.signals[s].meas_interval_mean;
    } else if (static_cast<Signal>(s) == Signal::rass) {
      interval_mean = cfg_.rass_meas_interval_mean;
    } else {
      interval_mean = cfg_.vent_mode_meas_interval_mean;
    }
    while (next_meas_min_[s] <= t) {
      double value;
      if (s < kNumContinuousSignals) {
        const auto& p = cfg_.signals[s];
        value = clamp(values_[s] + rng_.normal(0.0, p.meas_noise_sd), p.clip_lo, p.clip_hi);
      } else if (static_cast<Signal>(s) == Signal::rass) {
        value = obs_.rass;
      } else {
        value = obs_.vent_mode;
      }
      samples_.push_back({static_cast<Signal>(s), next_meas_min_[s], value});
      next_meas_min_[s] += std::max(1.0, rng_.exponential(interval_mean));
    }
  }
}

void EpisodeSimulator::check_alarm() {
  const double hr = values_[static_cast<std::size_t>(Signal::heart_rate)];
  const double rr = values_[static_cast<std::size_t>(Signal::respiratory_rate)];
  const double ph = values_[static_cast<std::size_t>(Signal::arterial_ph)];
  if (rr > kStabilityRespRateMax || hr > kStabilityHeartRateMax ||
      ph < kStabilityArterialPhMin) {
    obs_.last_alarm_min = obs_.t_min;
  }
}

void EpisodeSimulator::apply(bool vent_on, int sed_level) {
  if (done_) throw Error("EpisodeSimulator::apply called after discharge");

  if (pending_reintubation_min_ >= 0.0 && obs_.t_min >= pending_reintubation_min_ &&
      !obs_.on_vent) {
    vent_on = true;  // clinical override: the patient has decompensated
  }
  if (vent_on && !obs_.on_vent) {
    start_ventilation();
  } else if (!vent_on && obs_.on_vent) {
    stop_ventilation();
  }
  set_sedation(sed_level);

  const bool recovery_frozen = pending_reintubation_min_ >= 0.0;
  const int substeps = static_cast<int>(kGridStepMin / kSubStepMin);
  for (int k = 0; k < substeps; ++k) {
    if (!recovery_frozen) {
      recovery_ = std::min(1.0, recovery_ + kSubStepMin / recovery_duration_);
    }
    advance_processes(kSubStepMin);
    obs_.t_min += kSubStepMin;
    obs_.rass = clamp(std::round(0.8 * recovery_ - 1.25 * obs_.sed_level +
                                 0.25 * rng_.normal()),
                      -5.0, 1.0);
    obs_.vent_mode = !obs_.on_vent ? 0.0 : (recovery_ >= 0.8 ? 3.0 : (recovery_ >= 0.5 ? 2.0 : 1.0));
    emit_due_measurements();
  }
  for (std::size_t s = 0; s < kNumContinuousSignals; ++s) obs_.vitals[s] = values_[s];
  check_alarm();

  // discharge logic
  if (not_alive_ && recovery_ >= death_recovery_frac_) {
    done_ = true;
    discharged_alive_ = false;
  } else if (!obs_.on_vent && recovery_ >= 1.0 && obs_.last_extubation_min >= 0.0 &&
             obs_.t_min - obs_.last_extubation_min >= post_stay_tail_ &&
             pending_reintubation_min_ < 0.0) {
    done_ = true;
  } else if (obs_.t_min >= cfg_.max_minutes) {
    done_ = true;
  }
  if (done_ && obs_.on_vent) {
    intervals_.back().end_min = obs_.t_min;
    intervals_.back().end_reason = EndReason::censored_at_discharge;
    obs_.on_vent = false;
  }
}

PatientEpisode EpisodeSimulator::to_episode() const {
  if (!done_) throw Error("episode still in progress");
  PatientEpisode ep;
  ep.admission_id = admission_id_;
  ep.age = age_;
  ep.weight = weight_;
  ep.gender_flag = gender_flag_;
  ep.emergency_flag = emergency_flag_;
  ep.white_flag = white_flag_;
  ep.samples = samples_;
  ep.vent_intervals = intervals_;
  ep.sedation_events = events_;
  ep.discharged_alive = discharged_alive_;
  ep.discharge_min = obs_.t_min;
  for (auto& ev : ep.sedation_events) {
    if (ev.route == SedationRoute::continuous_rate && ev.end_min <= ev.start_min) {
      ev.end_min = ep.discharge_min;  // still running at discharge
    }
  }
  return ep;
}

BehaviorPolicy::BehaviorPolicy(const SimConfig& cfg, Rng rng)
    : cfg_(cfg), rng_(std::move(rng)) {}

double BehaviorPolicy::draw_attempt_time(const EpisodeSimulator& sim) {
  const double readiness = sim.readiness_min();
  double attempt;
  if (rng_.bernoulli(cfg_.premature_prob)) {
    double gap = std::max(0.0, rng_.normal(cfg_.premature_gap_mean, cfg_.premature_gap_sd));
    if (cfg_.premature_gap_max > 0.0) gap = std::min(gap, cfg_.premature_gap_max);
    attempt = readiness - gap;
  } else {
    attempt = readiness + rng_.exponential(cfg_.extubation_delay_mean);
  }
  return std::max(attempt, sim.observe().t_min + 30.0);
}

int BehaviorPolicy::protocol_level(double recovery, bool on_vent) const {
  if (!on_vent) return 0;
  if (recovery < 0.25) return 3;
  if (recovery < 0.55) return 2;
  return 1;
}

std::pair<bool, int> BehaviorPolicy::decide(const EpisodeSimulator& sim) {
  const auto& obs = sim.observe();
  if (obs.on_vent && obs.intubation_count != planned_for_intubation_) {
    planned_for_intubation_ = obs.intubation_count;
    attempt_min_ = draw_attempt_time(sim);
  }
  const bool vent_on = obs.on_vent ? obs.t_min < attempt_min_ : false;

  int level = current_level_;
  const bool vent_changed = vent_on != obs.on_vent;
  if (obs.t_min >= next_sed_review_min_ || vent_changed || obs.t_min == 0.0) {
    level = protocol_level(sim.recovery(), vent_on);
    if (rng_.bernoulli(cfg_.sedation_explore_prob)) {
      level += rng_.bernoulli(0.5) ? 1 : -1;
    }
    level = std::clamp(level, 0, 3);
    next_sed_review_min_ = obs.t_min + 10.0 + rng_.exponential(cfg_.sedation_reeval_mean);
    current_level_ = level;
  }
  return {vent_on, level};
}

PatientEpisode simulate_episode(const SimConfig& cfg, std::uint64_t patient_seed,
                                std::string admission_id) {
  EpisodeSimulator sim(cfg, patient_seed, std::move(admission_id));
  BehaviorPolicy behavior(cfg, Rng::seeded(mix_seed(patient_seed, 0x5ed)));
  while (!sim.done()) {
    auto [vent_on, sed] = behavior.decide(sim);
    sim.apply(vent_on, sed);
  }
  return sim.to_episode();
}

}  // namespace ventrl::cohort
