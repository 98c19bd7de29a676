#include "ventrl/mdp.hpp"

#include <algorithm>
#include <cmath>

namespace ventrl::mdp {

namespace {

constexpr double kFluctEps = 1e-6;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool on_vent_state(const cohort::PatientEpisode& ep, double t) {
  // closed membership: at the interval end the patient is still intubated
  // and the action taken there is what liberates them
  for (const auto& iv : ep.vent_intervals) {
    if (t >= iv.start_min && t <= iv.end_min) return true;
  }
  return false;
}

bool on_vent_action(const cohort::PatientEpisode& ep, double t) {
  for (const auto& iv : ep.vent_intervals) {
    if (t >= iv.start_min && t < iv.end_min) return true;
  }
  return false;
}

// Instantaneous infusion per drug at time t, units/hr. A bolus is charged
// as an equivalent rate over the 10 minutes following administration.
std::array<double, kNumDrugs> rates_at(const cohort::PatientEpisode& ep, double t) {
  std::array<double, kNumDrugs> rates{};
  for (const auto& ev : ep.sedation_events) {
    const auto d = static_cast<std::size_t>(ev.drug);
    if (ev.route == cohort::SedationRoute::continuous_rate) {
      if (ev.start_min <= t && t < ev.end_min) rates[d] += ev.dose;
    } else if (ev.start_min <= t && t < ev.start_min + 10.0) {
      rates[d] += ev.dose * 6.0;
    }
  }
  return rates;
}

std::array<double, kNumDrugs> rates_in_window(const cohort::PatientEpisode& ep,
                                              double t, double step) {
  std::array<double, kNumDrugs> rates{};
  for (const auto& ev : ep.sedation_events) {
    const auto d = static_cast<std::size_t>(ev.drug);
    if (ev.route == cohort::SedationRoute::continuous_rate) {
      if (ev.start_min < t + step && ev.end_min > t) rates[d] += ev.dose;
    } else if (ev.start_min >= t && ev.start_min < t + step) {
      rates[d] += ev.dose * 6.0;
    }
  }
  return rates;
}

int max_level(const std::array<double, kNumDrugs>& rates, double weight) {
  int level = 0;
  for (std::size_t d = 0; d < kNumDrugs; ++d) {
    if (rates[d] > 0.0) {
      level = std::max(level, map_sedation_level(static_cast<Drug>(d), rates[d], weight));
    }
  }
  return level;
}

bool stability_violated(const gp::RegularSeries& series, std::size_t k) {
  return series.value(Signal::respiratory_rate, k) > kStabilityRespRateMax ||
         series.value(Signal::heart_rate, k) > kStabilityHeartRateMax ||
         series.value(Signal::arterial_ph, k) < kStabilityArterialPhMin;
}

StateVector assemble_state(const gp::RegularSeries& series,
                           const cohort::PatientEpisode& ep, std::size_t k,
                           double alarm_minutes) {
  StateVector s{};
  const double t = series.time_at(k);
  auto put = [&](Feature f, double v) { s[static_cast<std::size_t>(f)] = v; };

  put(Feature::age, ep.age);
  put(Feature::weight, ep.weight);
  put(Feature::gender_flag, ep.gender_flag);
  put(Feature::emergency_flag, ep.emergency_flag);
  put(Feature::white_flag, ep.white_flag);
  for (std::size_t d = 0; d < kNumContinuousSignals; ++d) {
    s[signal_feature_index(static_cast<Signal>(d))] = series.value(static_cast<Signal>(d), k);
  }
  put(Feature::rass, series.value(Signal::rass, k));
  put(Feature::vent_mode_code, series.value(Signal::vent_mode, k));

  const auto rates = rates_at(ep, t);
  for (std::size_t d = 0; d < kNumDrugs; ++d) {
    s[static_cast<std::size_t>(Feature::dose_propofol) + d] = rates[d] / ep.weight;
  }
  put(Feature::sed_level_current, max_level(rates, ep.weight));

  const bool on = on_vent_state(ep, t);
  put(Feature::vent_on_flag, on ? 1.0 : 0.0);
  double into = 0.0;
  double off_for = 0.0;
  int intubations = 0;
  double last_end = 0.0;
  for (const auto& iv : ep.vent_intervals) {
    if (iv.start_min <= t) ++intubations;
    if (on && iv.start_min <= t && t <= iv.end_min) into = t - iv.start_min;
    if (iv.end_min <= t) last_end = std::max(last_end, iv.end_min);
  }
  if (!on) off_for = t - last_end;
  put(Feature::minutes_into_current_ventilation, into);
  put(Feature::num_intubations_so_far, intubations);
  put(Feature::minutes_since_admission, t);
  put(Feature::minutes_since_last_vitals_alarm, alarm_minutes);
  put(Feature::minutes_off_ventilation, off_for);
  return s;
}

}  // namespace

const std::array<std::string_view, kStateDim>& feature_names() {
  static const std::array<std::string_view, kStateDim> names = {
      "age", "weight", "gender_flag", "emergency_flag", "white_flag",
      "heart_rate", "respiratory_rate", "spo2", "arterial_ph", "pao2", "paco2",
      "fio2", "o2_flow", "peep_set", "tidal_volume", "mean_bp", "temperature",
      "rass", "vent_mode_code",
      "dose_propofol", "dose_fentanyl", "dose_midazolam", "dose_dexmedetomidine",
      "dose_morphine", "dose_hydromorphone",
      "sed_level_current", "vent_on_flag", "minutes_into_current_ventilation",
      "num_intubations_so_far", "minutes_since_admission",
      "minutes_since_last_vitals_alarm", "minutes_off_ventilation",
  };
  return names;
}

std::vector<VitalRange> RewardConfig::default_stability_vitals() {
  // Table-1 one-sided bounds with documented sentinel far limits
  return {
      {Signal::heart_rate, 40.0, kStabilityHeartRateMax},
      {Signal::respiratory_rate, 5.0, kStabilityRespRateMax},
      {Signal::arterial_ph, kStabilityArterialPhMin, 7.8},
  };
}

std::vector<VitalRange> RewardConfig::default_extubation_criteria() {
  return {
      {Signal::fio2, -1e9, 50.0},
      {Signal::spo2, 88.0, 1e9},
      {Signal::peep_set, -1e9, 8.0},
  };
}

void RewardConfig::validate() const {
  for (double c : {c1, c2, c3, c4, c5, c6, c7}) {
    if (c < 0.0 || !std::isfinite(c)) throw ConfigError("reward weights must be >= 0");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!(fluctuation_threshold >= 0.0)) throw ConfigError("fluctuation_threshold must be >= 0");
  for (const auto& group : {stability_vitals, extubation_criteria}) {
    for (const auto& r : group) {
      if (!(r.min < r.max)) throw ConfigError("vital range must satisfy min < max");
    }
  }
}

std::string RewardConfig::canonical_string() const {
  std::string s = "c1=" + format_double(c1) + ";c2=" + format_double(c2) +
                  ";c3=" + format_double(c3) + ";c4=" + format_double(c4) +
                  ";c5=" + format_double(c5) + ";c6=" + format_double(c6) +
                  ";c7=" + format_double(c7) + ";fluct=" + format_double(fluctuation_threshold) +
                  ";gamma=" + format_double(gamma) + ";stability=";
  for (const auto& r : stability_vitals) {
    s += std::string(signal_name(r.signal)) + ":" + format_double(r.min) + ":" +
         format_double(r.max) + ",";
  }
  s += ";extubation=";
  for (const auto& r : extubation_criteria) {
    s += std::string(signal_name(r.signal)) + ":" + format_double(r.min) + ":" +
         format_double(r.max) + ",";
  }
  return s;
}

int map_sedation_level(Drug drug, double dose_rate, double weight) {
  if (static_cast<std::size_t>(drug) >= kNumDrugs) {
    throw ValidationError("unknown drug id " + std::to_string(static_cast<int>(drug)));
  }
  if (dose_rate < 0.0) throw ValidationError("dose_rate must be >= 0");
  if (!(weight > 0.0)) throw ValidationError("weight must be positive");
  return sedation_level_from_intensity(sedation_intensity(drug, dose_rate, weight));
}

StateVector build_state(const gp::RegularSeries& series,
                        const cohort::PatientEpisode& episode, std::size_t t_index) {
  if (t_index >= series.n_steps) throw ValidationError("t_index outside grid");
  double alarm_minutes = series.time_at(t_index);
  for (std::size_t back = 0; back <= t_index; ++back) {
    const std::size_t k = t_index - back;
    if (stability_violated(series, k)) {
      alarm_minutes = series.time_at(t_index) - series.time_at(k);
      break;
    }
  }
  return assemble_state(series, episode, t_index, alarm_minutes);
}

Action extract_action(const cohort::PatientEpisode& episode, std::size_t t_index,
                      double grid_step_min) {
  const double t = static_cast<double>(t_index) * grid_step_min;
  Action a;
  a.vent_bit = on_vent_action(episode, t) ? 1 : 0;
  a.sed_level = max_level(rates_in_window(episode, t, grid_step_min), episode.weight);
  return a;
}

RewardBreakdown reward_components(const StateVector& s, const Action& /*a*/,
                                  const StateVector& s_next, const RewardConfig& cfg) {
  RewardBreakdown out;

  double bracket = 0.0;
  double fluct = 0.0;
  for (const auto& r : cfg.stability_vitals) {
    const double vt = s[signal_feature_index(r.signal)];
    const double vn = s_next[signal_feature_index(r.signal)];
    bracket += sigmoid(vt - r.min) - sigmoid(vt - r.max) + 0.5;
    const double denom = std::max(std::abs(vt), kFluctEps);
    fluct += std::max(0.0, std::abs(vn - vt) / denom - cfg.fluctuation_threshold);
  }
  out.vitals = cfg.c1 * bracket - cfg.c2 * fluct;

  const bool was_on = get(s, Feature::vent_on_flag) != 0.0;
  const bool next_on = get(s_next, Feature::vent_on_flag) != 0.0;
  if (!next_on) {
    if (was_on) {
      int violations = 0;
      for (const auto& r : cfg.extubation_criteria) {
        const double v = s[signal_feature_index(r.signal)];
        if (v > r.max || v < r.min) ++violations;
      }
      out.vent_off = cfg.c3 - cfg.c5 * violations;
    } else {
      out.vent_off = cfg.c4;
    }
  } else {
    out.vent_on = was_on ? -cfg.c6 : -cfg.c7;
  }
  return out;
}

double reward(const StateVector& s, const Action& a, const StateVector& s_next,
              const RewardConfig& cfg) {
  return reward_components(s, a, s_next, cfg).total();
}

std::vector<Transition> build_transitions(std::span<const ImputedEpisode> episodes,
                                          const RewardConfig& cfg) {
  cfg.validate();
  std::vector<Transition> out;
  for (const auto& [episode, series] : episodes) {
    if (series.n_steps < 2) continue;
    std::vector<StateVector> states(series.n_steps);
    std::ptrdiff_t last_alarm = -1;
    for (std::size_t k = 0; k < series.n_steps; ++k) {
      if (stability_violated(series, k)) last_alarm = static_cast<std::ptrdiff_t>(k);
      const double alarm_minutes =
          last_alarm >= 0
              ? series.time_at(k) - series.time_at(static_cast<std::size_t>(last_alarm))
              : series.time_at(k);
      states[k] = assemble_state(series, episode, k, alarm_minutes);
    }
    for (std::size_t k = 0; k + 1 < series.n_steps; ++k) {
      Transition tr;
      tr.admission_id = episode.admission_id;
      tr.step_index = static_cast<int>(k);
      tr.state = states[k];
      tr.action = extract_action(episode, k, series.step_min);
      tr.next_state = states[k + 1];
      tr.reward = reward(tr.state, tr.action, tr.next_state, cfg);
      tr.terminal = k + 2 == series.n_steps;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

}  // namespace ventrl::mdp
