#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "ventrl/common.hpp"

namespace ventrl {

// Charted signals. The first kNumContinuousSignals entries are the jointly
// imputed continuous vitals; rass and vent_mode are discrete and resampled
// with mean-binning plus sample-and-hold.
enum class Signal : int {
  heart_rate = 0,
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
  vent_mode,
};

inline constexpr std::size_t kNumContinuousSignals = 12;
inline constexpr std::size_t kNumSignals = 14;

inline constexpr std::array<std::string_view, kNumSignals> kSignalNames = {
    "heart_rate", "respiratory_rate", "spo2",         "arterial_ph",
    "pao2",       "paco2",            "fio2",         "o2_flow",
    "peep_set",   "tidal_volume",     "mean_bp",      "temperature",
    "rass",       "vent_mode",
};

inline std::string_view signal_name(Signal s) {
  return kSignalNames[static_cast<std::size_t>(s)];
}

inline bool is_continuous(Signal s) {
  return static_cast<std::size_t>(s) < kNumContinuousSignals;
}

Signal signal_from_name(std::string_view name);

enum class Drug : int {
  propofol = 0,
  fentanyl,
  midazolam,
  dexmedetomidine,
  morphine,
  hydromorphone,
};

inline constexpr std::size_t kNumDrugs = 6;

inline constexpr std::array<std::string_view, kNumDrugs> kDrugNames = {
    "propofol", "fentanyl", "midazolam", "dexmedetomidine", "morphine", "hydromorphone",
};

inline std::string_view drug_name(Drug d) {
  return kDrugNames[static_cast<std::size_t>(d)];
}

Drug drug_from_name(std::string_view name);

// Single-scale sedation mapping. Intensity = dose * factor / weight with dose
// in units/hr; factors translate each agent's usual charting units onto one
// propofol-like scale. Documented defaults, overridable nowhere on purpose:
// the simulator and the action extraction must agree on them.
inline constexpr std::array<double, kNumDrugs> kDrugEquivalenceFactor = {
    1.0,    // propofol, mg/hr
    500.0,  // fentanyl, mg/hr
    15.0,   // midazolam, mg/hr
    600.0,  // dexmedetomidine, mg/hr
    8.0,    // morphine, mg/hr
    40.0,   // hydromorphone, mg/hr
};

// Inner bin edges on the intensity scale; level 0 is reserved for zero dose.
// Values on an edge map to the higher level (half-open [lo, hi) bins).
inline constexpr double kSedationLevel2Threshold = 1.5;
inline constexpr double kSedationLevel3Threshold = 3.5;

inline double sedation_intensity(Drug d, double dose_rate, double weight) {
  return dose_rate * kDrugEquivalenceFactor[static_cast<std::size_t>(d)] / weight;
}

inline int sedation_level_from_intensity(double intensity) {
  if (intensity <= 0.0) return 0;
  if (intensity < kSedationLevel2Threshold) return 1;
  if (intensity < kSedationLevel3Threshold) return 2;
  return 3;
}

// Physiological-stability guideline bounds (one-sided). These feed the
// bedside alarm clock in the state vector; the reward ranges are separate
// and configurable.
inline constexpr double kStabilityRespRateMax = 30.0;
inline constexpr double kStabilityHeartRateMax = 130.0;
inline constexpr double kStabilityArterialPhMin = 7.3;

}  // namespace ventrl
