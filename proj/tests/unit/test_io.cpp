#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ventrl/config.hpp"
#include "ventrl/csv.hpp"
#include "ventrl/fqi.hpp"
#include "ventrl/policy.hpp"
#include "ventrl/simulator.hpp"

using namespace ventrl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

cohort::SimConfig tiny_sim() {
  cohort::SimConfig cfg;
  cfg.n_patients = 3;
  cfg.seed = 5;
  cfg.recovery_log_mean = std::log(1650.0);
  cfg.recovery_min = 1550.0;
  cfg.recovery_max = 1900.0;
  cfg.premature_prob = 0.4;
  cfg.premature_gap_mean = 300.0;
  return cfg;
}

}  // namespace

TEST_CASE("cohort export then ingest is structurally identity") {
  TempDir dir("ventrl_cohort_rt");
  const auto episodes = cohort::simulate_cohort(tiny_sim());
  csv::write_cohort(dir.path.string(), episodes, 0xabcd);
  const auto back = csv::ingest_episodes(dir.path.string());
  CHECK(back == episodes);
}

TEST_CASE("empty cohort files ingest to an empty list") {
  TempDir dir("ventrl_cohort_empty");
  csv::write_cohort(dir.path.string(), {}, 1);
  CHECK(csv::ingest_episodes(dir.path.string()).empty());
}

TEST_CASE("ingest rejects a negative sample time, naming the location") {
  TempDir dir("ventrl_cohort_neg");
  auto episodes = cohort::simulate_cohort(tiny_sim());
  csv::write_cohort(dir.path.string(), episodes, 1);
  {
    std::ofstream app(dir.path / "samples.csv", std::ios::app);
    app << episodes[0].admission_id << ",heart_rate,-4,80\n";
  }
  try {
    csv::ingest_episodes(dir.path.string());
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("samples.csv") != std::string::npos);
    CHECK(msg.find("negative time") != std::string::npos);
  }
}

TEST_CASE("ingest rejects malformed numbers with file and line") {
  TempDir dir("ventrl_cohort_bad");
  csv::write_cohort(dir.path.string(), cohort::simulate_cohort(tiny_sim()), 1);
  {
    std::ofstream app(dir.path / "episodes.csv", std::ios::app);
    app << "sim-bad,notanumber,80,0,0,1,1,2000\n";
  }
  try {
    csv::ingest_episodes(dir.path.string());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("episodes.csv") != std::string::npos);
    CHECK(msg.find("age") != std::string::npos);
  }
}

TEST_CASE("ingest rejects unknown schema versions") {
  TempDir dir("ventrl_cohort_schema");
  csv::write_cohort(dir.path.string(), {}, 1);
  CHECK_THROWS_AS(csv::ingest_episodes(dir.path.string(), 2), ConfigError);
}

TEST_CASE("transitions round trip with their reward fingerprint") {
  TempDir dir("ventrl_transitions_rt");
  Rng rng(3);
  std::vector<mdp::Transition> transitions;
  for (int i = 0; i < 25; ++i) {
    mdp::Transition tr;
    tr.admission_id = "adm" + std::to_string(i / 9);
    tr.step_index = i % 9;
    for (auto& v : tr.state) v = rng.normal(0.0, 30.0);
    for (auto& v : tr.next_state) v = rng.normal(0.0, 30.0);
    tr.action = mdp::action_from_index(static_cast<int>(rng.uniform_index(8)));
    tr.reward = rng.normal();
    tr.terminal = (i % 9) == 8;
    transitions.push_back(tr);
  }
  const std::string path = (dir.path / "t.csv").string();
  csv::write_transitions(path, transitions, 0x1234);
  const auto back = csv::read_transitions(path);
  CHECK(back.reward_hash == 0x1234);
  REQUIRE(back.transitions.size() == transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    CHECK(back.transitions[i].admission_id == transitions[i].admission_id);
    CHECK(back.transitions[i].state == transitions[i].state);
    CHECK(back.transitions[i].next_state == transitions[i].next_state);
    CHECK(back.transitions[i].action == transitions[i].action);
    CHECK(back.transitions[i].reward == transitions[i].reward);
    CHECK(back.transitions[i].terminal == transitions[i].terminal);
  }
}

TEST_CASE("imputed series round trip") {
  TempDir dir("ventrl_imputed_rt");
  cohort::PatientEpisode e;
  e.admission_id = "adm";
  e.age = 60;
  e.weight = 80;
  e.discharge_min = 50.0;
  e.vent_intervals.push_back({0.0, 40.0, cohort::EndReason::extubated});

  mdp::ImputedEpisode imp;
  imp.episode = e;
  imp.series.step_min = 10.0;
  imp.series.n_steps = 5;
  imp.series.data.assign(kNumSignals * 5, 0.0);
  Rng rng(9);
  for (auto& v : imp.series.data) v = rng.normal(50.0, 10.0);

  const std::string path = (dir.path / "imputed.csv").string();
  const std::vector<mdp::ImputedEpisode> eps = {imp};
  csv::write_imputed(path, eps, 7);
  const auto back = csv::read_imputed(path, std::vector<cohort::PatientEpisode>{e});
  REQUIRE(back.size() == 1);
  CHECK(back[0].series.n_steps == 5);
  CHECK(back[0].series.data == imp.series.data);
}

TEST_CASE("qfunction serialization round trips predictions") {
  TempDir dir("ventrl_model_rt");
  Rng rng(5);
  std::vector<mdp::Transition> transitions;
  for (int i = 0; i < 120; ++i) {
    mdp::Transition tr;
    tr.admission_id = "a";
    for (auto& v : tr.state) v = rng.uniform(0.0, 10.0);
    tr.next_state = tr.state;
    tr.action = mdp::action_from_index(static_cast<int>(rng.uniform_index(8)));
    tr.reward = rng.normal();
    transitions.push_back(tr);
  }

  for (const auto kind : {fqi::RegressorKind::extra_trees, fqi::RegressorKind::neural_net}) {
    fqi::FqiConfig cfg;
    cfg.iterations = 2;
    cfg.subset_fraction = 1.0;
    cfg.regressor = kind;
    cfg.tree_params.min_leaf = 2;
    cfg.tree_params.n_trees = 5;
    cfg.net_params.hidden_sizes = {8};
    cfg.net_epochs_per_iteration = 2;
    auto result = fqi::fqi_train(transitions, cfg);
    result.q.reward_hash = 0xfeed;

    const std::string path = (dir.path / "q.json").string();
    fqi::save_qfunction(path, result.q);
    const fqi::QFunction back = fqi::load_qfunction(path);
    CHECK(back.gamma == result.q.gamma);
    CHECK(back.reward_hash == 0xfeed);
    CHECK(back.kind() == kind);
    for (int i = 0; i < 25; ++i) {
      mdp::StateVector s{};
      for (auto& v : s) v = rng.uniform(0.0, 10.0);
      const auto a = mdp::action_from_index(static_cast<int>(rng.uniform_index(8)));
      CHECK(back.value(s, a) == result.q.value(s, a));
    }
  }
}

TEST_CASE("qfunction loader rejects foreign or stale files") {
  TempDir dir("ventrl_model_bad");
  const std::string path = (dir.path / "junk.json").string();
  {
    std::ofstream out(path);
    out << "{\"schema\": \"other\"}\n";
  }
  CHECK_THROWS_AS(fqi::load_qfunction(path), ConfigError);
  {
    std::ofstream out(path);
    out << "not json at all\n";
  }
  CHECK_THROWS_AS(fqi::load_qfunction(path), ParseError);
  CHECK_THROWS_AS(fqi::load_qfunction((dir.path / "missing.json").string()), IoError);
}

TEST_CASE("policy serialization round trips") {
  TempDir dir("ventrl_policy_rt");
  Rng rng(11);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 50; ++i) {
    mdp::StateVector s{};
    for (auto& v : s) v = rng.uniform(0.0, 10.0);
    states.push_back(s);
  }
  std::vector<double> X;
  std::vector<double> y;
  for (const auto& s : states) {
    for (int a = 0; a < 8; ++a) {
      const auto e = fqi::encode(s, mdp::action_from_index(a));
      X.insert(X.end(), e.begin(), e.end());
      y.push_back(s[0] > 5.0 && a == 4 ? 1.0 : 0.0);
    }
  }
  ml::TreeEnsembleParams p;
  p.n_trees = 10;
  p.min_leaf = 1;
  fqi::QFunction q;
  q.regressor = ml::et_fit(X, states.size() * 8, fqi::kEncodingDim, y, p);
  q.gamma = 0.9;
  q.reward_hash = 0xbeef;

  const auto pol = policy::extract_policy(q, states, policy::PolicyParams{}, 1, "fqit");
  const std::string path = (dir.path / "p.json").string();
  policy::save_policy(path, pol);
  const auto back = policy::load_policy(path);
  CHECK(back.provenance == "fqit");
  CHECK(back.reward_hash == 0xbeef);
  CHECK(back.importances == pol.importances);
  for (int i = 0; i < 20; ++i) {
    mdp::StateVector s{};
    for (auto& v : s) v = rng.uniform(0.0, 10.0);
    CHECK(policy::recommend(back, s).action == policy::recommend(pol, s).action);
  }
}

TEST_CASE("config parsing applies defaults, overrides, and strict keys") {
  const std::string text = R"({
    "seed": 9,
    "test_fraction": 0.3,
    "sim": {"n_patients": 42, "premature_prob": 0.1},
    "reward": {"c3": 5.0, "gamma": 0.95},
    "fqi": {"iterations": 12, "tree": {"n_trees": 7}},
    "train_algo": "nfq"
  })";
  const auto cfg = config::RunConfig::from_json_text(text);
  CHECK(cfg.seed == 9);
  CHECK(cfg.sim.n_patients == 42);
  CHECK(cfg.sim.premature_prob == 0.1);
  CHECK(cfg.reward.c3 == 5.0);
  CHECK(cfg.reward.gamma == 0.95);
  CHECK(cfg.reward.c1 == 0.1);  // untouched default
  CHECK(cfg.fqi.iterations == 12);
  CHECK(cfg.fqi.tree_params.n_trees == 7);
  CHECK(cfg.train_algo == "nfq");
  CHECK(cfg.sim.seed == 9);
  CHECK(cfg.split_seed != cfg.fqi.seed);

  const auto overridden = config::RunConfig::from_json_text(text, 77, true);
  CHECK(overridden.seed == 77);
  CHECK(overridden.cohort_hash() != cfg.cohort_hash());
  CHECK(overridden.impute_hash() != cfg.impute_hash());

  CHECK_THROWS_AS(config::RunConfig::from_json_text(R"({"sim": {"typo_key": 1}})"),
                  ConfigError);
  CHECK_THROWS_AS(config::RunConfig::from_json_text(R"({"train_algo": "dqn"})"),
                  ConfigError);
  CHECK_THROWS_AS(config::RunConfig::from_json_text("{nope"), ConfigError);
}

TEST_CASE("signal process overrides parse by name") {
  const std::string text = R"({
    "sim": {"signals": {"arterial_ph": {"noise_sd": 0.5}}}
  })";
  const auto cfg = config::RunConfig::from_json_text(text);
  CHECK(cfg.sim.signals[static_cast<int>(Signal::arterial_ph)].noise_sd == 0.5);
  CHECK_THROWS_AS(config::RunConfig::from_json_text(
                      R"({"sim": {"signals": {"rass": {"noise_sd": 1.0}}}})"),
                  ConfigError);
}
