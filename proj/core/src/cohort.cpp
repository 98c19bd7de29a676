#include "ventrl/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ventrl/simulator.hpp"

namespace ventrl::cohort {

std::string_view end_reason_name(EndReason r) {
  switch (r) {
    case EndReason::extubated: return "extubated";
    case EndReason::sbt_failed: return "sbt_failed";
    case EndReason::censored_at_discharge: return "censored_at_discharge";
  }
  throw ValidationError("invalid end reason");
}

EndReason end_reason_from_name(std::string_view name) {
  if (name == "extubated") return EndReason::extubated;
  if (name == "sbt_failed") return EndReason::sbt_failed;
  if (name == "censored_at_discharge") return EndReason::censored_at_discharge;
  throw ParseError("unknown end reason '" + std::string(name) + "'");
}

std::string_view route_name(SedationRoute r) {
  return r == SedationRoute::continuous_rate ? "continuous_rate" : "bolus";
}

SedationRoute route_from_name(std::string_view name) {
  if (name == "continuous_rate") return SedationRoute::continuous_rate;
  if (name == "bolus") return SedationRoute::bolus;
  throw ParseError("unknown sedation route '" + std::string(name) + "'");
}

double PatientEpisode::total_ventilated_minutes() const {
  double total = 0.0;
  for (const auto& iv : vent_intervals) total += iv.end_min - iv.start_min;
  return total;
}

void PatientEpisode::validate() const {
  const std::string who = "episode " + admission_id;
  if (admission_id.empty()) throw ValidationError("episode with empty admission_id");
  if (!(age > 0.0) || !std::isfinite(age)) throw ValidationError(who + ": age must be positive");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ValidationError(who + ": weight must be positive");
  for (auto [flag, name] : {std::pair{gender_flag, "gender"}, {emergency_flag, "emergency"}, {white_flag, "white"}}) {
    if (flag != 0 && flag != 1) throw ValidationError(who + ": " + name + " flag must be 0/1");
  }
  if (!(discharge_min > 0.0) || !std::isfinite(discharge_min)) {
    throw ValidationError(who + ": discharge_min must be positive");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string at = who + ", sample " + std::to_string(i);
    if (static_cast<std::size_t>(s.signal) >= kNumSignals) throw ValidationError(at + ": invalid signal id");
    if (!(s.time_min >= 0.0)) throw ValidationError(at + ": negative time");
    if (s.time_min > discharge_min) throw ValidationError(at + ": time past discharge");
    if (!std::isfinite(s.value)) throw ValidationError(at + ": non-finite value");
  }
  if (vent_intervals.empty()) throw ValidationError(who + ": no ventilation interval");
  double prev_end = -1.0;
  for (std::size_t i = 0; i < vent_intervals.size(); ++i) {
    const auto& iv = vent_intervals[i];
    const std::string at = who + ", interval " + std::to_string(i);
    if (!(iv.start_min < iv.end_min)) throw ValidationError(at + ": start must precede end");
    if (iv.start_min < 0.0) throw ValidationError(at + ": negative start");
    if (iv.end_min > discharge_min) throw ValidationError(at + ": ends past discharge");
    if (iv.start_min < prev_end) throw ValidationError(at + ": overlaps previous interval");
    prev_end = iv.end_min;
  }
  for (std::size_t i = 0; i < sedation_events.size(); ++i) {
    const auto& ev = sedation_events[i];
    const std::string at = who + ", sedation event " + std::to_string(i);
    if (static_cast<std::size_t>(ev.drug) >= kNumDrugs) throw ValidationError(at + ": invalid drug id");
    if (!(ev.dose >= 0.0) || !std::isfinite(ev.dose)) throw ValidationError(at + ": dose must be >= 0");
    if (ev.start_min < 0.0) throw ValidationError(at + ": negative start");
    if (ev.route == SedationRoute::continuous_rate) {
      if (!(ev.start_min < ev.end_min)) throw ValidationError(at + ": continuous event needs start < end");
      if (ev.end_min > discharge_min) throw ValidationError(at + ": ends past discharge");
    } else if (ev.start_min > discharge_min) {
      throw ValidationError(at + ": bolus past discharge");
    }
  }
}

void SimConfig::validate() const {
  if (n_patients < 1) throw ConfigError("n_patients must be >= 1");
  if (!(recovery_log_sd >= 0.0)) throw ConfigError("recovery_log_sd must be >= 0");
  if (!(recovery_min > 0.0) || !(recovery_max >= recovery_min)) {
    throw ConfigError("recovery clip range invalid");
  }
  if (extubation_delay_mean < 0.0) throw ConfigError("extubation_delay_mean must be >= 0");
  if (premature_prob < 0.0 || premature_prob > 1.0) throw ConfigError("premature_prob must be in [0,1]");
  if (premature_gap_mean < 0.0 || premature_gap_sd < 0.0) throw ConfigError("premature gap parameters must be >= 0");
  if (reintubation_risk_steepness < 0.0) throw ConfigError("reintubation_risk_steepness must be >= 0");
  if (!(distress_recovery_factor > 0.0 && distress_recovery_factor <= 1.0)) {
    throw ConfigError("distress_recovery_factor must be in (0, 1]");
  }
  if (setback_fraction_lo < 0.0 || setback_fraction_hi > 1.0 || setback_fraction_lo > setback_fraction_hi) {
    throw ConfigError("setback fractions must satisfy 0 <= lo <= hi <= 1");
  }
  if (sedation_explore_prob < 0.0 || sedation_explore_prob > 1.0) throw ConfigError("sedation_explore_prob must be in [0,1]");
  if (not_alive_prob < 0.0 || not_alive_prob > 1.0) throw ConfigError("not_alive_prob must be in [0,1]");
  if (!(max_minutes > 0.0)) throw ConfigError("max_minutes must be positive");
  if (max_intubations < 1) throw ConfigError("max_intubations must be >= 1");
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto& s = signals[i];
    const std::string at = "signal " + std::string(kSignalNames[i]);
    if (!(s.reversion_rate > 0.0)) throw ConfigError(at + ": reversion_rate must be positive");
    if (!(s.noise_sd >= 0.0)) throw ConfigError(at + ": noise_sd must be >= 0");
    if (!(s.baseline_sd >= 0.0)) throw ConfigError(at + ": baseline_sd must be >= 0");
    if (!(s.meas_interval_mean > 0.0)) throw ConfigError(at + ": meas_interval_mean must be positive");
    if (!(s.clip_lo < s.clip_hi)) throw ConfigError(at + ": clip range invalid");
  }
  if (!(rass_meas_interval_mean > 0.0) || !(vent_mode_meas_interval_mean > 0.0)) {
    throw ConfigError("discrete measurement intervals must be positive");
  }
}

std::string SimConfig::canonical_string() const {
  std::string s;
  auto add = [&s](std::string_view key, double v) {
    s += key;
    s += '=';
    s += format_double(v);
    s += ';';
  };
  add("n_patients", n_patients);
  add("seed", static_cast<double>(seed));
  add("recovery_log_mean", recovery_log_mean);
  add("recovery_log_sd", recovery_log_sd);
  add("recovery_min", recovery_min);
  add("recovery_max", recovery_max);
  add("extubation_delay_mean", extubation_delay_mean);
  add("premature_prob", premature_prob);
  add("premature_gap_mean", premature_gap_mean);
  add("premature_gap_sd", premature_gap_sd);
  add("premature_gap_max", premature_gap_max);
  add("reintubation_risk_steepness", reintubation_risk_steepness);
  add("reintubation_delay_mean", reintubation_delay_mean);
  add("reintubation_delay_floor", reintubation_delay_floor);
  add("distress_recovery_factor", distress_recovery_factor);
  add("setback_fraction_lo", setback_fraction_lo);
  add("setback_fraction_hi", setback_fraction_hi);
  add("sedation_reeval_mean", sedation_reeval_mean);
  add("sedation_explore_prob", sedation_explore_prob);
  add("bolus_prob", bolus_prob);
  add("post_extubation_stay_mean", post_extubation_stay_mean);
  add("post_extubation_stay_floor", post_extubation_stay_floor);
  add("not_alive_prob", not_alive_prob);
  add("max_minutes", max_minutes);
  add("max_intubations", max_intubations);
  add("rass_meas_interval_mean", rass_meas_interval_mean);
  add("vent_mode_meas_interval_mean", vent_mode_meas_interval_mean);
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto& p = signals[i];
    s += kSignalNames[i];
    s += ':';
    for (double v : {p.sick_mean, p.healthy_mean, p.baseline_sd, p.reversion_rate,
                     p.noise_sd, p.sedation_shift, p.meas_interval_mean, p.meas_noise_sd,
                     p.clip_lo, p.clip_hi, p.off_vent_mean}) {
      s += std::isnan(v) ? "nan" : format_double(v);
      s += ',';
    }
    s += ';';
  }
  return s;
}

std::array<SignalProcessConfig, kNumContinuousSignals>
SimConfig::default_signal_processes() {
  std::array<SignalProcessConfig, kNumContinuousSignals> p{};
  auto set = [&](Signal s, SignalProcessConfig c) { p[static_cast<std::size_t>(s)] = c; };
  // {sick, healthy, baseline_sd, reversion, stationary_sd, sed_shift,
  //  meas_interval, meas_noise, clip_lo, clip_hi, off_vent_mean}
  set(Signal::heart_rate,       {112.0, 86.0, 6.0, 0.030, 6.0, -2.5, 25.0, 1.5, 30.0, 190.0, std::nan("")});
  set(Signal::respiratory_rate, {33.0, 16.0, 2.0, 0.030, 2.2, -3.0, 25.0, 1.0, 4.0, 60.0, std::nan("")});
  set(Signal::spo2,             {90.0, 97.0, 1.0, 0.040, 1.5, 0.0, 30.0, 0.5, 70.0, 100.0, std::nan("")});
  // pH recovers across the whole course with little noise, so it reads as a
  // continuous readiness meter; FiO2 and PEEP are clinician-weaned settings
  // that cross their guideline limits late in recovery
  set(Signal::arterial_ph,      {7.18, 7.42, 0.012, 0.010, 0.012, 0.0, 300.0, 0.005, 6.9, 7.65, std::nan("")});
  set(Signal::pao2,             {68.0, 95.0, 5.0, 0.010, 6.0, 0.0, 300.0, 2.0, 40.0, 300.0, std::nan("")});
  set(Signal::paco2,            {50.0, 41.0, 2.0, 0.010, 3.0, 0.8, 300.0, 1.0, 20.0, 90.0, std::nan("")});
  set(Signal::fio2,             {72.0, 46.0, 2.5, 0.050, 1.2, 0.0, 60.0, 0.0, 21.0, 100.0, 21.0});
  set(Signal::o2_flow,          {10.0, 3.5, 0.8, 0.050, 0.6, 0.0, 60.0, 0.0, 0.0, 15.0, 2.0});
  set(Signal::peep_set,         {12.5, 7.0, 0.5, 0.050, 0.4, 0.0, 60.0, 0.0, 0.0, 20.0, 0.0});
  set(Signal::tidal_volume,     {430.0, 480.0, 25.0, 0.040, 20.0, 0.0, 60.0, 5.0, 200.0, 800.0, std::nan("")});
  set(Signal::mean_bp,          {68.0, 82.0, 4.0, 0.020, 5.0, -1.5, 35.0, 1.5, 40.0, 140.0, std::nan("")});
  set(Signal::temperature,      {38.3, 36.9, 0.2, 0.005, 0.2, 0.0, 120.0, 0.05, 34.0, 41.0, std::nan("")});
  return p;
}

std::vector<PatientEpisode> simulate_cohort(const SimConfig& config) {
  config.validate();
  std::vector<PatientEpisode> episodes(static_cast<std::size_t>(config.n_patients));
  // independent per-patient streams keep the cohort identical for any thread count
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "sim-%06zu", i + 1);
    episodes[i] = simulate_episode(config, mix_seed(config.seed, i), id);
  }
  return episodes;
}

std::vector<PatientEpisode> filter_admissions(std::vector<PatientEpisode> episodes) {
  std::erase_if(episodes, [](const PatientEpisode& e) {
    return e.total_ventilated_minutes() <= 1440.0 || !e.discharged_alive;
  });
  return episodes;
}

std::pair<std::vector<PatientEpisode>, std::vector<PatientEpisode>>
split_train_test(std::vector<PatientEpisode> episodes, double test_fraction,
                 std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0, 1)");
  }
  if (episodes.size() < 2) {
    throw ValidationError("need at least 2 episodes to split");
  }
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(episodes.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, episodes.size() - 1);

  std::vector<PatientEpisode> train, test;
  train.reserve(episodes.size() - n_test);
  test.reserve(n_test);
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& e = episodes[order[k]];
    if (k < n_test) {
      test.push_back(std::move(e));
    } else {
      train.push_back(std::move(e));
    }
  }
  return {std::move(train), std::move(test)};
}

}  // namespace ventrl::cohort
