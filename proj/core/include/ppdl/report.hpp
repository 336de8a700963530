#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ppdl/sim.hpp"

namespace ppdl {

struct ExperimentManifest {
  std::string config_digest;
  std::vector<std::uint64_t> seeds;
  std::string started_at;
  std::string finished_at;
  std::string version;
  std::vector<std::string> files;  // relative to the output directory
};

std::string version_string();
std::string utc_timestamp();

// printf("%.6g"), the precision of every number in the output files.
std::string format_number(double value);

// Fraction of aggregated members inside the selecting node's cluster over
// the last quarter of rounds.
double final_quarter_intra_fraction(const ExperimentResult& result);

// Writes rounds.csv, comm_matrix.csv, accuracy.csv, config.json,
// summary.json and manifest.json into `out_dir` (created if missing).
// Throws IoError before writing anything if the directory is not writable.
ExperimentManifest write_outputs(const ExperimentResult& result,
                                 const std::filesystem::path& out_dir,
                                 const std::string& started_at = "");

void write_manifest(const ExperimentManifest& manifest,
                    const std::filesystem::path& path);

struct ComparisonRow {
  std::string label;
  std::filesystem::path dir;
  std::vector<double> cluster_acc;
  double mean = 0.0;
  std::vector<double> cluster_delta;  // vs. the baseline row
  double mean_delta = 0.0;
};

struct ComparisonTable {
  std::vector<std::size_t> cluster_sizes;
  std::size_t baseline = 0;
  std::vector<ComparisonRow> rows;

  void print(std::ostream& out) const;
};

// Aligns the per-cluster accuracies of several runs' summary.json files.
// Throws IoError naming the directory when a summary is missing and
// ConfigError when cluster layouts differ.
ComparisonTable compare_runs(std::span<const std::filesystem::path> dirs,
                             std::size_t baseline = 0);

}  // namespace ppdl
