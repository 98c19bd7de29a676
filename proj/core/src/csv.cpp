#include "ventrl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace ventrl::csv {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  return line;
}

}  // namespace

Writer::Writer(const std::string& path, const std::string& kind,
               std::vector<std::pair<std::string, std::string>> meta)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
  out_ << "# ventrl schema=1 kind=" << kind;
  for (const auto& [k, v] : meta) out_ << ' ' << k << '=' << v;
  out_ << '\n';
}

void Writer::header(const std::vector<std::string>& columns) {
  n_columns_ = columns.size();
  out_ << join(columns) << '\n';
}

void Writer::row(const std::vector<std::string>& fields) {
  if (n_columns_ != 0 && fields.size() != n_columns_) {
    throw IoError("row width mismatch writing '" + path_ + "'");
  }
  out_ << join(fields) << '\n';
  if (!out_) throw IoError("failed writing '" + path_ + "'");
}

Writer::~Writer() { out_.flush(); }

Reader::Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open '" + path + "'");
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const std::size_t eq = tok.find('=');
        if (eq != std::string::npos) {
          meta_[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
      }
      continue;
    }
    columns_ = split_fields(line);
    return;
  }
  throw ParseError("'" + path + "' has no header row");
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    fields = split_fields(line);
    if (fields.size() != columns_.size()) {
      throw ParseError(path_ + ":" + std::to_string(line_) + ": expected " +
                       std::to_string(columns_.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    return true;
  }
  return false;
}

std::size_t Reader::column(const std::string& name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) {
    throw ParseError("'" + path_ + "' is missing column '" + name + "'");
  }
  return static_cast<std::size_t>(it - columns_.begin());
}

// --- cohort ------------------------------------------------------------------

void write_cohort(const std::string& dir, std::span<const cohort::PatientEpisode> episodes,
                  std::uint64_t config_hash) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "'");
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"config", hash_hex(config_hash)}};

  Writer eps(dir + "/episodes.csv", "episodes", meta);
  eps.header({"admission_id", "age", "weight", "gender", "emergency", "white",
              "discharged_alive", "discharge_min"});
  for (const auto& e : episodes) {
    eps.row({e.admission_id, format_double(e.age), format_double(e.weight),
             std::to_string(e.gender_flag), std::to_string(e.emergency_flag),
             std::to_string(e.white_flag), e.discharged_alive ? "1" : "0",
             format_double(e.discharge_min)});
  }

  Writer smp(dir + "/samples.csv", "samples", meta);
  smp.header({"admission_id", "signal_id", "time_min", "value"});
  for (const auto& e : episodes) {
    for (const auto& s : e.samples) {
      smp.row({e.admission_id, std::string(signal_name(s.signal)),
               format_double(s.time_min), format_double(s.value)});
    }
  }

  Writer evt(dir + "/events.csv", "events", meta);
  evt.header({"admission_id", "kind", "drug_id", "dose", "route", "start_min",
              "end_min", "end_reason"});
  for (const auto& e : episodes) {
    for (const auto& iv : e.vent_intervals) {
      evt.row({e.admission_id, "vent", "", "", "", format_double(iv.start_min),
               format_double(iv.end_min), std::string(cohort::end_reason_name(iv.end_reason))});
    }
    for (const auto& ev : e.sedation_events) {
      evt.row({e.admission_id, "sedation", std::string(drug_name(ev.drug)),
               format_double(ev.dose), std::string(cohort::route_name(ev.route)),
               format_double(ev.start_min),
               ev.route == cohort::SedationRoute::bolus ? "" : format_double(ev.end_min),
               ""});
    }
  }
}

std::vector<cohort::PatientEpisode> ingest_episodes(const std::string& dir,
                                                    int schema_version) {
  if (schema_version != 1) {
    throw ConfigError("unsupported cohort schema version " + std::to_string(schema_version));
  }

  std::vector<cohort::PatientEpisode> episodes;
  std::map<std::string, std::size_t> index;
  {
    Reader r(dir + "/episodes.csv");
    const auto c_id = r.column("admission_id");
    const auto c_age = r.column("age");
    const auto c_w = r.column("weight");
    const auto c_g = r.column("gender");
    const auto c_e = r.column("emergency");
    const auto c_wh = r.column("white");
    const auto c_da = r.column("discharged_alive");
    const auto c_dm = r.column("discharge_min");
    std::vector<std::string> f;
    while (r.next(f)) {
      const std::string where = r.path() + ":" + std::to_string(r.line());
      cohort::PatientEpisode e;
      e.admission_id = f[c_id];
      if (index.contains(e.admission_id)) {
        throw ParseError(where + ": duplicate admission_id " + e.admission_id);
      }
      e.age = parse_double(f[c_age], where + " field age");
      e.weight = parse_double(f[c_w], where + " field weight");
      e.gender_flag = static_cast<int>(parse_long(f[c_g], where + " field gender"));
      e.emergency_flag = static_cast<int>(parse_long(f[c_e], where + " field emergency"));
      e.white_flag = static_cast<int>(parse_long(f[c_wh], where + " field white"));
      e.discharged_alive = parse_long(f[c_da], where + " field discharged_alive") != 0;
      e.discharge_min = parse_double(f[c_dm], where + " field discharge_min");
      index[e.admission_id] = episodes.size();
      episodes.push_back(std::move(e));
    }
  }
  {
    Reader r(dir + "/samples.csv");
    const auto c_id = r.column("admission_id");
    const auto c_sig = r.column("signal_id");
    const auto c_t = r.column("time_min");
    const auto c_v = r.column("value");
    std::vector<std::string> f;
    while (r.next(f)) {
      const std::string where = r.path() + ":" + std::to_string(r.line());
      const auto it = index.find(f[c_id]);
      if (it == index.end()) throw ParseError(where + ": unknown admission_id " + f[c_id]);
      cohort::VitalsSample s;
      s.signal = signal_from_name(f[c_sig]);
      s.time_min = parse_double(f[c_t], where + " field time_min");
      if (s.time_min < 0.0) {
        throw ValidationError(where + ": negative time_min for admission " + f[c_id]);
      }
      s.value = parse_double(f[c_v], where + " field value");
      episodes[it->second].samples.push_back(s);
    }
  }
  {
    Reader r(dir + "/events.csv");
    const auto c_id = r.column("admission_id");
    const auto c_kind = r.column("kind");
    const auto c_drug = r.column("drug_id");
    const auto c_dose = r.column("dose");
    const auto c_route = r.column("route");
    const auto c_start = r.column("start_min");
    const auto c_end = r.column("end_min");
    const auto c_reason = r.column("end_reason");
    std::vector<std::string> f;
    while (r.next(f)) {
      const std::string where = r.path() + ":" + std::to_string(r.line());
      const auto it = index.find(f[c_id]);
      if (it == index.end()) throw ParseError(where + ": unknown admission_id " + f[c_id]);
      auto& e = episodes[it->second];
      if (f[c_kind] == "vent") {
        cohort::VentilationInterval iv;
        iv.start_min = parse_double(f[c_start], where + " field start_min");
        iv.end_min = parse_double(f[c_end], where + " field end_min");
        iv.end_reason = cohort::end_reason_from_name(f[c_reason]);
        e.vent_intervals.push_back(iv);
      } else if (f[c_kind] == "sedation") {
        cohort::SedationEvent ev;
        ev.drug = drug_from_name(f[c_drug]);
        ev.dose = parse_double(f[c_dose], where + " field dose");
        ev.route = cohort::route_from_name(f[c_route]);
        ev.start_min = parse_double(f[c_start], where + " field start_min");
        ev.end_min = f[c_end].empty() ? ev.start_min
                                      : parse_double(f[c_end], where + " field end_min");
        e.sedation_events.push_back(ev);
      } else {
        throw ParseError(where + ": unknown event kind '" + f[c_kind] + "'");
      }
    }
  }

  for (auto& e : episodes) {
    std::sort(e.vent_intervals.begin(), e.vent_intervals.end(),
              [](const auto& a, const auto& b) { return a.start_min < b.start_min; });
    e.validate();
  }
  return episodes;
}

// --- imputed series ------------------------------------------------------------

void write_imputed(const std::string& path, std::span<const mdp::ImputedEpisode> episodes,
                   std::uint64_t config_hash) {
  Writer w(path, "imputed", {{"config", hash_hex(config_hash)}});
  std::vector<std::string> cols = {"admission_id", "time_min"};
  for (auto name : kSignalNames) cols.emplace_back(name);
  w.header(cols);
  std::vector<std::string> f(cols.size());
  for (const auto& [episode, series] : episodes) {
    for (std::size_t k = 0; k < series.n_steps; ++k) {
      f[0] = episode.admission_id;
      f[1] = format_double(series.time_at(k));
      for (std::size_t d = 0; d < kNumSignals; ++d) {
        f[2 + d] = format_double(series.value(static_cast<Signal>(d), k));
      }
      w.row(f);
    }
  }
}

std::vector<mdp::ImputedEpisode> read_imputed(
    const std::string& path, std::span<const cohort::PatientEpisode> episodes) {
  Reader r(path);
  const auto c_id = r.column("admission_id");
  const auto c_t = r.column("time_min");
  std::vector<std::size_t> sig_cols(kNumSignals);
  for (std::size_t d = 0; d < kNumSignals; ++d) {
    sig_cols[d] = r.column(std::string(kSignalNames[d]));
  }

  std::map<std::string, std::vector<std::vector<double>>> rows;  // id -> per-row values
  std::vector<std::string> f;
  while (r.next(f)) {
    const std::string where = r.path() + ":" + std::to_string(r.line());
    std::vector<double> vals(kNumSignals + 1);
    vals[0] = parse_double(f[c_t], where + " field time_min");
    for (std::size_t d = 0; d < kNumSignals; ++d) {
      vals[d + 1] = parse_double(f[sig_cols[d]], where);
    }
    rows[f[c_id]].push_back(std::move(vals));
  }

  std::vector<mdp::ImputedEpisode> out;
  out.reserve(episodes.size());
  for (const auto& ep : episodes) {
    const auto it = rows.find(ep.admission_id);
    if (it == rows.end()) {
      throw ValidationError("imputed file has no rows for admission " + ep.admission_id);
    }
    auto& rws = it->second;
    std::sort(rws.begin(), rws.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    gp::RegularSeries series;
    series.step_min = 10.0;
    series.n_steps = rws.size();
    series.data.assign(kNumSignals * rws.size(), 0.0);
    for (std::size_t k = 0; k < rws.size(); ++k) {
      const double expect = static_cast<double>(k) * series.step_min;
      if (std::abs(rws[k][0] - expect) > 1e-6) {
        throw ValidationError("imputed grid for " + ep.admission_id +
                              " is not 10-minute spaced at row " + std::to_string(k));
      }
      for (std::size_t d = 0; d < kNumSignals; ++d) {
        series.data[d * series.n_steps + k] = rws[k][d + 1];
      }
    }
    out.push_back({ep, std::move(series)});
  }
  return out;
}

// --- transitions ----------------------------------------------------------------

void write_transitions(const std::string& path, std::span<const mdp::Transition> transitions,
                       std::uint64_t reward_hash) {
  Writer w(path, "transitions", {{"reward_config", hash_hex(reward_hash)}});
  std::vector<std::string> cols = {"admission_id", "step"};
  for (auto name : mdp::feature_names()) cols.emplace_back("s_" + std::string(name));
  for (auto name : mdp::feature_names()) cols.emplace_back("next_" + std::string(name));
  cols.insert(cols.end(), {"vent_bit", "sed_level", "reward", "terminal"});
  w.header(cols);

  std::vector<std::string> f(cols.size());
  for (const auto& tr : transitions) {
    std::size_t at = 0;
    f[at++] = tr.admission_id;
    f[at++] = std::to_string(tr.step_index);
    for (double v : tr.state) f[at++] = format_double(v);
    for (double v : tr.next_state) f[at++] = format_double(v);
    f[at++] = std::to_string(tr.action.vent_bit);
    f[at++] = std::to_string(tr.action.sed_level);
    f[at++] = format_double(tr.reward);
    f[at++] = tr.terminal ? "1" : "0";
    w.row(f);
  }
}

TransitionsFile read_transitions(const std::string& path) {
  Reader r(path);
  TransitionsFile out;
  const auto it = r.meta().find("reward_config");
  if (it == r.meta().end()) {
    throw ConfigError("'" + path + "' lacks the reward_config fingerprint");
  }
  out.reward_hash = std::stoull(it->second, nullptr, 16);

  const auto c_id = r.column("admission_id");
  const auto c_step = r.column("step");
  const auto c_vent = r.column("vent_bit");
  const auto c_sed = r.column("sed_level");
  const auto c_rew = r.column("reward");
  const auto c_term = r.column("terminal");
  std::vector<std::size_t> s_cols(mdp::kStateDim), n_cols(mdp::kStateDim);
  for (std::size_t i = 0; i < mdp::kStateDim; ++i) {
    s_cols[i] = r.column("s_" + std::string(mdp::feature_names()[i]));
    n_cols[i] = r.column("next_" + std::string(mdp::feature_names()[i]));
  }

  std::vector<std::string> f;
  while (r.next(f)) {
    const std::string where = r.path() + ":" + std::to_string(r.line());
    mdp::Transition tr;
    tr.admission_id = f[c_id];
    tr.step_index = static_cast<int>(parse_long(f[c_step], where + " field step"));
    for (std::size_t i = 0; i < mdp::kStateDim; ++i) {
      tr.state[i] = parse_double(f[s_cols[i]], where);
      tr.next_state[i] = parse_double(f[n_cols[i]], where);
    }
    tr.action.vent_bit = static_cast<int>(parse_long(f[c_vent], where + " field vent_bit"));
    tr.action.sed_level = static_cast<int>(parse_long(f[c_sed], where + " field sed_level"));
    tr.reward = parse_double(f[c_rew], where + " field reward");
    tr.terminal = parse_long(f[c_term], where + " field terminal") != 0;
    out.transitions.push_back(std::move(tr));
  }
  return out;
}

}  // namespace ventrl::csv
