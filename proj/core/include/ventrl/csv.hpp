#pragma once

#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ventrl/cohort.hpp"
#include "ventrl/common.hpp"
#include "ventrl/mdp.hpp"

namespace ventrl::csv {

/// Comma-separated writer. Every artifact starts with a comment line
///   # ventrl schema=1 kind=<kind> [key=value ...]
/// carrying the schema version and configuration fingerprints so stages can
/// validate their inputs. Fields must not contain commas or newlines.
class Writer {
 public:
  Writer(const std::string& path, const std::string& kind,
         std::vector<std::pair<std::string, std::string>> meta = {});
  void header(const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& fields);
  ~Writer();

  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t n_columns_ = 0;
};

class Reader {
 public:
  explicit Reader(const std::string& path);

  const std::map<std::string, std::string>& meta() const { return meta_; }
  const std::vector<std::string>& columns() const { return columns_; }
  /// Reads the next data row; false at end of file. Throws ParseError when
  /// the field count does not match the header.
  bool next(std::vector<std::string>& fields);
  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }
  /// Column index by name; throws ParseError when absent.
  std::size_t column(const std::string& name) const;

 private:
  std::ifstream in_;
  std::string path_;
  std::map<std::string, std::string> meta_;
  std::vector<std::string> columns_;
  std::size_t line_ = 0;
};

// --- cohort files (episodes.csv, samples.csv, events.csv) -------------------

void write_cohort(const std::string& dir, std::span<const cohort::PatientEpisode> episodes,
                  std::uint64_t config_hash);

/// Parses and validates the three-file cohort layout under `dir`.
std::vector<cohort::PatientEpisode> ingest_episodes(const std::string& dir,
                                                    int schema_version = 1);

// --- imputed series ----------------------------------------------------------

void write_imputed(const std::string& path, std::span<const mdp::ImputedEpisode> episodes,
                   std::uint64_t config_hash);

/// Joins imputed rows back onto their episodes by admission id; episodes
/// without imputed rows are an error.
std::vector<mdp::ImputedEpisode> read_imputed(
    const std::string& path, std::span<const cohort::PatientEpisode> episodes);

// --- transitions --------------------------------------------------------------

void write_transitions(const std::string& path, std::span<const mdp::Transition> transitions,
                       std::uint64_t reward_hash);

struct TransitionsFile {
  std::vector<mdp::Transition> transitions;
  std::uint64_t reward_hash = 0;
};

TransitionsFile read_transitions(const std::string& path);

}  // namespace ventrl::csv
