#pragma once

#include <cstdint>
#include <string>

#include "ventrl/cohort.hpp"
#include "ventrl/fqi.hpp"
#include "ventrl/gp.hpp"
#include "ventrl/mdp.hpp"
#include "ventrl/policy.hpp"

namespace ventrl::config {

/// One structured configuration file drives every stage; flags override the
/// seed. Unknown keys are rejected so typos fail loudly.
struct RunConfig {
  std::uint64_t seed = 1;
  double test_fraction = 0.25;
  cohort::SimConfig sim;
  gp::FitConfig gp;
  mdp::RewardConfig reward;
  fqi::FqiConfig fqi;
  fqi::QLearningConfig qlearn;
  policy::PolicyParams policy;
  std::string train_algo = "fqit";  // fqit | nfq | qlearn

  std::uint64_t split_seed = 0;  // derived

  /// Per-stage fingerprints: each artifact embeds the hash of exactly the
  /// configuration it depends on, so editing a later stage's section does
  /// not invalidate earlier artifacts.
  std::uint64_t cohort_hash() const;  // seed + split + sim
  std::uint64_t impute_hash() const;  // cohort + gp

  static RunConfig from_file(const std::string& path, std::uint64_t seed_override = 0,
                             bool has_seed_override = false);
  static RunConfig from_json_text(const std::string& text, std::uint64_t seed_override = 0,
                                  bool has_seed_override = false);

  void derive_seeds();
};

}  // namespace ventrl::config
