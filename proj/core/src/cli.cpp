#include "ventrl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ventrl/config.hpp"
#include "ventrl/csv.hpp"
#include "ventrl/eval.hpp"
#include "ventrl/fqi.hpp"
#include "ventrl/policy.hpp"
#include "ventrl/simulator.hpp"

namespace ventrl::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = 0;
  bool force = false;

  config::RunConfig load() const {
    return config::RunConfig::from_file(config_path, seed, has_seed);
  }
  int thread_count() const { return threads > 0 ? threads : default_thread_count(); }
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "configuration file (JSON)")
                ->envname("VENTRL_CONFIG");
  if (needs_config) c->required();
  cmd->add_option("--out", opts.out_dir, "output directory")->required();
  cmd->add_option("--seed", opts.seed, "override the config seed")
      ->each([&opts](const std::string&) { opts.has_seed = true; });
  cmd->add_option("--threads", opts.threads, "worker thread cap (0 = hardware)");
  cmd->add_flag("--force", opts.force, "overwrite existing stage outputs");
}

void require_fresh(const fs::path& p, bool force) {
  if (fs::exists(p) && !force) {
    throw IoError("'" + p.string() + "' already exists (use --force to overwrite)");
  }
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "'");
}

void write_split(const fs::path& path, const std::vector<std::string>& train_ids,
                 const std::vector<std::string>& test_ids, std::uint64_t config_hash) {
  json j;
  j["schema"] = "ventrl.split";
  j["schema_version"] = 1;
  j["config"] = hash_hex(config_hash);
  j["train"] = train_ids;
  j["test"] = test_ids;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

std::pair<std::vector<std::string>, std::vector<std::string>> read_split(
    const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' (run simulate/ingest first)");
  json j;
  in >> j;
  if (j.value("schema", "") != "ventrl.split") {
    throw ConfigError("'" + path.string() + "' is not a split file");
  }
  return {j.at("train").get<std::vector<std::string>>(),
          j.at("test").get<std::vector<std::string>>()};
}

void check_artifact_config(const csv::Reader& reader, const std::string& key,
                           std::uint64_t expected, const std::string& what) {
  const auto it = reader.meta().find(key);
  if (it == reader.meta().end()) {
    throw ConfigError(what + " lacks the " + key + " fingerprint");
  }
  if (it->second != hash_hex(expected)) {
    throw ConfigError("config mismatch: " + what + " was built with " + key + "=" +
                      it->second + " but the current configuration hashes to " +
                      hash_hex(expected) + "; regenerate the artifact or fix the config");
  }
}

struct CohortArtifacts {
  std::vector<cohort::PatientEpisode> train;
  std::vector<cohort::PatientEpisode> test;
  std::vector<cohort::PatientEpisode> all;  // train then test, artifact order
};

CohortArtifacts load_cohort(const CommonOpts& opts) {
  const fs::path dir = fs::path(opts.out_dir) / "cohort";
  auto episodes = csv::ingest_episodes(dir.string());
  auto [train_ids, test_ids] = read_split(dir / "split.json");
  std::map<std::string, cohort::PatientEpisode*> by_id;
  for (auto& e : episodes) by_id[e.admission_id] = &e;
  CohortArtifacts out;
  auto take = [&](const std::vector<std::string>& ids,
                  std::vector<cohort::PatientEpisode>& dst) {
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw ValidationError("split references unknown admission " + id);
      }
      dst.push_back(*it->second);
    }
  };
  take(train_ids, out.train);
  take(test_ids, out.test);
  out.all = out.train;
  out.all.insert(out.all.end(), out.test.begin(), out.test.end());
  return out;
}

void write_trace_csv(const fs::path& path, const std::string& label,
                     const std::vector<double>& deltas) {
  csv::Writer w(path.string(), "trace", {{"algo", label}});
  w.header({"iteration", "mean_abs_delta_q"});
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    w.row({std::to_string(i + 1), format_double(deltas[i])});
  }
}

// wall-clock diagnostics; kept outside the deterministic artifact set
void log_timings(const fs::path& out_dir, const std::string& algo,
                 const std::vector<double>& wall_ms) {
  const fs::path logs = out_dir / "logs";
  ensure_dir(logs);
  {
    csv::Writer w((logs / ("timing_" + algo + ".csv")).string(), "timing", {{"algo", algo}});
    w.header({"iteration", "wall_ms"});
    for (std::size_t i = 0; i < wall_ms.size(); ++i) {
      w.row({std::to_string(i + 1), format_double(wall_ms[i])});
    }
  }
  json merged = json::object();
  const fs::path merged_path = logs / "timings.json";
  if (fs::exists(merged_path)) {
    std::ifstream in(merged_path, std::ios::binary);
    try {
      in >> merged;
    } catch (const json::exception&) {
      merged = json::object();
    }
  }
  const double total = std::accumulate(wall_ms.begin(), wall_ms.end(), 0.0);
  merged[algo + "_iterations"] = wall_ms.size();
  merged[algo + "_total_ms"] = total;
  merged[algo + "_mean_iteration_ms"] =
      wall_ms.empty() ? 0.0 : total / static_cast<double>(wall_ms.size());
  std::ofstream out(merged_path, std::ios::binary);
  out << merged.dump(2) << "\n";
}

std::map<std::string, double> read_timings(const fs::path& out_dir) {
  std::map<std::string, double> timings;
  const fs::path p = out_dir / "logs" / "timings.json";
  if (!fs::exists(p)) return timings;
  std::ifstream in(p, std::ios::binary);
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return timings;
  }
  for (const auto& [k, v] : j.items()) {
    if (v.is_number()) timings[k] = v.get<double>();
  }
  return timings;
}

// --- stages -------------------------------------------------------------------

void stage_write_cohort(const CommonOpts& opts, const config::RunConfig& cfg,
                        std::vector<cohort::PatientEpisode> episodes) {
  episodes = cohort::filter_admissions(std::move(episodes));
  if (episodes.size() < 2) {
    throw ValidationError("fewer than 2 admissions survive the inclusion filters");
  }
  auto [train, test] = cohort::split_train_test(std::move(episodes), cfg.test_fraction,
                                                cfg.split_seed);
  const fs::path dir = fs::path(opts.out_dir) / "cohort";
  require_fresh(dir / "episodes.csv", opts.force);
  ensure_dir(dir);

  std::vector<cohort::PatientEpisode> ordered = train;
  ordered.insert(ordered.end(), test.begin(), test.end());
  csv::write_cohort(dir.string(), ordered, cfg.cohort_hash());
  std::vector<std::string> train_ids, test_ids;
  for (const auto& e : train) train_ids.push_back(e.admission_id);
  for (const auto& e : test) test_ids.push_back(e.admission_id);
  write_split(dir / "split.json", train_ids, test_ids, cfg.cohort_hash());
  std::cout << "cohort: " << train.size() << " train / " << test.size()
            << " test admissions -> " << dir.string() << "\n";
}

int cmd_simulate(const CommonOpts& opts) {
  const config::RunConfig cfg = opts.load();
  auto episodes = cohort::simulate_cohort(cfg.sim);
  stage_write_cohort(opts, cfg, std::move(episodes));
  return 0;
}

int cmd_ingest(const CommonOpts& opts, const std::string& in_dir) {
  const config::RunConfig cfg = opts.load();
  auto episodes = csv::ingest_episodes(in_dir);
  stage_write_cohort(opts, cfg, std::move(episodes));
  return 0;
}

int cmd_impute(const CommonOpts& opts) {
  const config::RunConfig cfg = opts.load();
  const fs::path dir = fs::path(opts.out_dir);
  {
    csv::Reader r((dir / "cohort" / "episodes.csv").string());
    check_artifact_config(r, "config", cfg.cohort_hash(), "cohort");
  }
  const CohortArtifacts cohort_data = load_cohort(opts);
  const fs::path out = dir / "impute";
  require_fresh(out / "imputed.csv", opts.force);
  ensure_dir(out);

  std::vector<mdp::ImputedEpisode> imputed(cohort_data.all.size());
  gp::ImputeConfig icfg;
  icfg.fit = cfg.gp;
  parallel_for(cohort_data.all.size(), opts.thread_count(), [&](std::size_t i) {
    imputed[i].episode = cohort_data.all[i];
    imputed[i].series = gp::impute_episode(cohort_data.all[i], icfg);
  });
  csv::write_imputed((out / "imputed.csv").string(), imputed, cfg.impute_hash());
  std::cout << "impute: " << imputed.size() << " admissions -> "
            << (out / "imputed.csv").string() << "\n";
  return 0;
}

int cmd_build_transitions(const CommonOpts& opts) {
  const config::RunConfig cfg = opts.load();
  const fs::path dir = fs::path(opts.out_dir);
  const CohortArtifacts cohort_data = load_cohort(opts);
  {
    csv::Reader r((dir / "impute" / "imputed.csv").string());
    check_artifact_config(r, "config", cfg.impute_hash(), "imputed series");
  }
  const fs::path out = dir / "transitions";
  require_fresh(out / "train.csv", opts.force);
  ensure_dir(out);

  const auto all = csv::read_imputed((dir / "impute" / "imputed.csv").string(),
                                     cohort_data.all);
  const std::size_t n_train = cohort_data.train.size();
  const std::span<const mdp::ImputedEpisode> train_span(all.data(), n_train);
  const std::span<const mdp::ImputedEpisode> test_span(all.data() + n_train,
                                                       all.size() - n_train);
  const auto train_tr = mdp::build_transitions(train_span, cfg.reward);
  const auto test_tr = mdp::build_transitions(test_span, cfg.reward);
  csv::write_transitions((out / "train.csv").string(), train_tr, cfg.reward.hash());
  csv::write_transitions((out / "test.csv").string(), test_tr, cfg.reward.hash());
  std::cout << "transitions: " << train_tr.size() << " train / " << test_tr.size()
            << " test -> " << out.string() << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, std::string algo) {
  const config::RunConfig cfg = opts.load();
  if (algo.empty()) algo = cfg.train_algo;
  const fs::path dir = fs::path(opts.out_dir);
  const fs::path train_file = dir / "transitions" / "train.csv";
  {
    csv::Reader r(train_file.string());
    check_artifact_config(r, "reward_config", cfg.reward.hash(), "training transitions");
  }
  auto data = csv::read_transitions(train_file.string());
  const fs::path out = dir / "train";
  const fs::path model_path = out / ("qfunction_" + algo + ".json");
  require_fresh(model_path, opts.force);
  ensure_dir(out);

  if (algo == "fqit" || algo == "nfq") {
    fqi::FqiConfig fcfg = cfg.fqi;
    fcfg.regressor = algo == "fqit" ? fqi::RegressorKind::extra_trees
                                    : fqi::RegressorKind::neural_net;
    auto result = fqi::fqi_train(data.transitions, fcfg, opts.thread_count());
    result.q.reward_hash = cfg.reward.hash();
    fqi::save_qfunction(model_path.string(), result.q);
    write_trace_csv(out / (algo == "fqit" ? "trace_fqi.csv" : "trace_nfq.csv"), algo,
                    result.trace.mean_abs_delta_q);
    log_timings(dir, algo, result.trace.wall_ms);
    std::cout << "train " << algo << ": " << result.trace.mean_abs_delta_q.size()
              << " iterations, final mean|dQ| = "
              << (result.trace.mean_abs_delta_q.empty()
                      ? 0.0
                      : result.trace.mean_abs_delta_q.back())
              << " -> " << model_path.string() << "\n";
  } else if (algo == "qlearn") {
    auto result = fqi::q_learning_train(data.transitions, cfg.qlearn);
    result.q.reward_hash = cfg.reward.hash();
    fqi::save_qfunction(model_path.string(), result.q);
    write_trace_csv(out / "trace_qlearning.csv", algo, result.per_episode_delta);
    std::cout << "train qlearn: " << result.per_episode_delta.size()
              << " episodes -> " << model_path.string() << "\n";
  } else {
    throw ConfigError("unknown algo '" + algo + "' (expected fqit, nfq, or qlearn)");
  }
  return 0;
}

int cmd_extract_policy(const CommonOpts& opts, std::string algo) {
  const config::RunConfig cfg = opts.load();
  if (algo.empty()) algo = cfg.train_algo;
  const fs::path dir = fs::path(opts.out_dir);
  const fqi::QFunction q =
      fqi::load_qfunction((dir / "train" / ("qfunction_" + algo + ".json")).string());
  if (q.reward_hash != cfg.reward.hash()) {
    throw ConfigError("config mismatch: model was trained under a different reward "
                      "configuration");
  }
  auto data = csv::read_transitions((dir / "transitions" / "train.csv").string());
  if (data.reward_hash != cfg.reward.hash()) {
    throw ConfigError("config mismatch: transitions were built under a different "
                      "reward configuration");
  }
  std::vector<mdp::StateVector> states;
  states.reserve(data.transitions.size());
  for (const auto& tr : data.transitions) states.push_back(tr.state);

  const fs::path out = dir / "policy";
  const fs::path model_path = out / ("policy_" + algo + ".json");
  require_fresh(model_path, opts.force);
  ensure_dir(out);

  const policy::PolicyModel pol =
      policy::extract_policy(q, states, cfg.policy, opts.thread_count(), algo);
  policy::save_policy(model_path.string(), pol);
  {
    csv::Writer w((out / ("importances_" + algo + ".csv")).string(), "importances",
                  {{"algo", algo}});
    w.header({"feature", "weight"});
    for (const auto& [name, weight] : policy::feature_importances(pol)) {
      w.row({std::string(name), format_double(weight)});
    }
  }
  std::cout << "policy " << algo << " -> " << model_path.string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts, std::string algo) {
  const config::RunConfig cfg = opts.load();
  if (algo.empty()) algo = cfg.train_algo;
  const fs::path dir = fs::path(opts.out_dir);
  const fs::path test_file = dir / "transitions" / "test.csv";
  {
    csv::Reader r(test_file.string());
    check_artifact_config(r, "reward_config", cfg.reward.hash(), "test transitions");
  }
  const policy::PolicyModel pol =
      policy::load_policy((dir / "policy" / ("policy_" + algo + ".json")).string());
  if (pol.reward_hash != cfg.reward.hash()) {
    throw ConfigError("config mismatch: policy was distilled under a different reward "
                      "configuration");
  }
  auto data = csv::read_transitions(test_file.string());
  const CohortArtifacts cohort_data = load_cohort(opts);

  const fs::path out = dir / "report";
  require_fresh(out / "admission_metrics.csv", opts.force);
  const eval::Report report =
      eval::build_report(pol, data.transitions, cohort_data.test, out.string(),
                         read_timings(dir), opts.thread_count());
  std::cout << "evaluate " << algo << ": " << report.admissions.size()
            << " admissions, vent accuracy " << report.ventilation_accuracy
            << ", sed accuracy " << report.sedation_accuracy << " -> " << out.string()
            << "\n";
  return 0;
}

int cmd_report(const CommonOpts& opts) {
  const fs::path dir = fs::path(opts.out_dir);
  const fs::path metrics_path = dir / "report" / "admission_metrics.csv";
  csv::Reader r(metrics_path.string());
  const auto c_id = r.column("admission_id");
  const auto c_agree = r.column("agreement_fraction");
  const auto c_vent = r.column("vent_accuracy");
  const auto c_sed = r.column("sed_accuracy");
  const auto c_reint = r.column("reintubation_count");
  const auto c_rew = r.column("mean_accumulated_reward");

  eval::Report report;
  std::vector<std::string> f;
  while (r.next(f)) {
    eval::AdmissionMetrics m;
    const std::string where = metrics_path.string() + ":" + std::to_string(r.line());
    m.admission_id = f[c_id];
    m.agreement_fraction = parse_double(f[c_agree], where);
    m.vent_accuracy = parse_double(f[c_vent], where);
    m.sed_accuracy = parse_double(f[c_sed], where);
    m.reintubation_count = static_cast<int>(parse_long(f[c_reint], where));
    m.mean_accumulated_reward = parse_double(f[c_rew], where);
    m.group = eval::deviation_group(m.agreement_fraction);
    report.admissions.push_back(std::move(m));
  }
  if (report.admissions.empty()) throw ValidationError("no admissions in report");

  // re-bin and summarize; per-admission accuracies average unweighted here
  std::vector<double> gidx, greint;
  for (int g = 0; g <= 5; ++g) {
    std::vector<double> reints, rewards;
    for (const auto& m : report.admissions) {
      if (m.group != g) continue;
      reints.push_back(m.reintubation_count);
      rewards.push_back(m.mean_accumulated_reward);
    }
    if (reints.empty()) continue;
    gidx.push_back(g);
    greint.push_back(std::accumulate(reints.begin(), reints.end(), 0.0) /
                     static_cast<double>(reints.size()));
  }
  double vent = 0.0, sed = 0.0;
  for (const auto& m : report.admissions) {
    vent += m.vent_accuracy;
    sed += m.sed_accuracy;
  }
  const auto n = static_cast<double>(report.admissions.size());

  json j;
  j["mean_vent_accuracy_per_admission"] = vent / n;
  j["mean_sed_accuracy_per_admission"] = sed / n;
  j["spearman_group_reintubations"] = eval::spearman(gidx, greint);
  j["n_test_admissions"] = report.admissions.size();
  std::ofstream out(dir / "report" / "accuracy.json", std::ios::binary);
  if (!out) throw IoError("cannot write accuracy.json");
  out << j.dump(2) << "\n";
  std::cout << "report: regenerated summaries for " << report.admissions.size()
            << " admissions\n";
  return 0;
}

int cmd_pipeline(const CommonOpts& opts, const std::string& algo) {
  cmd_simulate(opts);
  cmd_impute(opts);
  cmd_build_transitions(opts);
  cmd_train(opts, algo);
  cmd_extract_policy(opts, algo);
  cmd_evaluate(opts, algo);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"ventrl: offline RL for ventilator weaning and sedation policies"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string in_dir;
  std::string algo;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort");
  add_common(simulate, opts);

  auto* ingest = app.add_subcommand("ingest", "ingest an external cohort (CSV)");
  add_common(ingest, opts);
  ingest->add_option("--in", in_dir, "directory with episodes/samples/events CSVs")
      ->required();

  auto* impute = app.add_subcommand("impute", "GP-impute vitals onto the 10-minute grid");
  add_common(impute, opts);

  auto* build = app.add_subcommand("build-transitions", "assemble MDP transition tuples");
  add_common(build, opts);

  auto* train = app.add_subcommand("train", "fit a Q-function (fqit | nfq | qlearn)");
  add_common(train, opts);
  train->add_option("--algo", algo, "fqit | nfq | qlearn (default from config)");

  auto* extract = app.add_subcommand("extract-policy", "distill the Q-function into trees");
  add_common(extract, opts);
  extract->add_option("--algo", algo, "which trained model to distill");

  auto* evaluate = app.add_subcommand("evaluate", "score a policy on the test split");
  add_common(evaluate, opts);
  evaluate->add_option("--algo", algo, "which policy to evaluate");

  auto* report = app.add_subcommand("report", "re-derive summaries from admission metrics");
  add_common(report, opts, /*needs_config=*/false);

  auto* pipeline = app.add_subcommand("pipeline", "run all stages in order");
  add_common(pipeline, opts);
  pipeline->add_option("--algo", algo, "training algorithm for the pipeline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opts);
    if (ingest->parsed()) return cmd_ingest(opts, in_dir);
    if (impute->parsed()) return cmd_impute(opts);
    if (build->parsed()) return cmd_build_transitions(opts);
    if (train->parsed()) return cmd_train(opts, algo);
    if (extract->parsed()) return cmd_extract_policy(opts, algo);
    if (evaluate->parsed()) return cmd_evaluate(opts, algo);
    if (report->parsed()) return cmd_report(opts);
    if (pipeline->parsed()) return cmd_pipeline(opts, algo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace ventrl::cli
