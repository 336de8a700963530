#include "ppdl/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "ppdl/config.hpp"
#include "ppdl/errors.hpp"

#ifndef PPDL_VERSION_STRING
#define PPDL_VERSION_STRING "0.0.0"
#endif

namespace ppdl {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() { return PPDL_VERSION_STRING; }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

double final_quarter_intra_fraction(const ExperimentResult& result) {
  const std::uint64_t t = result.records.size();
  if (t == 0) return 0.0;
  const std::uint64_t first = t - std::max<std::uint64_t>(t / 4, 1) + 1;
  return intra_cluster_fraction(result.records, result.config.layout, first, t);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  const fs::path probe = dir / ".ppdl_write_probe";
  {
    std::ofstream p(probe);
    if (!p) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_rounds(const ExperimentResult& r, const fs::path& path) {
  auto out = open_out(path);
  out << "t,node,arm,group,reward,val_acc,val_loss,comp_set_size,train_loss,entropy\n";
  for (const auto& rec : r.records) {
    for (const auto& e : rec.nodes) {
      out << rec.round << ',' << e.node << ',';
      if (e.arm) out << *e.arm;
      out << ',';
      for (std::size_t i = 0; i < e.group.size(); ++i) {
        if (i) out << ';';
        out << e.group[i];
      }
      out << ',';
      if (e.reward) out << format_number(*e.reward);
      out << ',' << format_number(e.val_acc) << ',' << format_number(e.val_loss) << ',';
      if (e.comp_set_size) out << *e.comp_set_size;
      out << ',' << format_number(e.train_loss) << ',';
      if (e.entropy) out << format_number(*e.entropy);
      out << '\n';
    }
  }
  close_out(out, path);
}

void write_comm(const ExperimentResult& r, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < r.comm.size(); ++i) {
    for (std::size_t j = 0; j < r.comm.size(); ++j) {
      if (j) out << ',';
      out << r.comm.at(i, j);
    }
    out << '\n';
  }
  close_out(out, path);
}

void write_accuracy(const ExperimentResult& r, const fs::path& path) {
  auto out = open_out(path);
  out << "node,cluster,test_acc,best_round\n";
  for (const auto& n : r.nodes) {
    out << n.node << ',' << n.cluster << ',' << format_number(n.test_acc) << ','
        << n.best_round << '\n';
  }
  close_out(out, path);
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  close_out(out, path);
}

json summary_json(const ExperimentResult& r) {
  json clusters = json::array();
  for (const auto& c : r.clusters) {
    clusters.push_back(
        {{"cluster", c.cluster}, {"size", c.size}, {"mean_test_acc", c.mean_test_acc}});
  }
  return {{"method", std::string(to_string(r.config.method))},
          {"seed", r.config.seed},
          {"config_digest", config_digest(r.config)},
          {"nodes", r.config.nodes},
          {"group_size", r.config.group_size},
          {"rounds", r.config.rounds},
          {"clusters", clusters},
          {"mean_over_clusters", r.mean_over_clusters},
          {"node_weighted_mean", r.node_weighted_mean},
          {"intra_cluster_fraction_final_quarter", final_quarter_intra_fraction(r)}};
}

}  // namespace

void write_manifest(const ExperimentManifest& m, const fs::path& path) {
  json j = {{"config_digest", m.config_digest},
            {"seeds", m.seeds},
            {"started_at", m.started_at},
            {"finished_at", m.finished_at},
            {"version", m.version},
            {"files", m.files}};
  write_text(path, j.dump(2) + "\n");
}

ExperimentManifest write_outputs(const ExperimentResult& result, const fs::path& out_dir,
                                 const std::string& started_at) {
  ensure_writable(out_dir);
  ExperimentManifest m;
  m.config_digest = config_digest(result.config);
  m.seeds = {result.config.seed};
  m.started_at = started_at.empty() ? utc_timestamp() : started_at;
  m.version = version_string();

  write_rounds(result, out_dir / "rounds.csv");
  write_comm(result, out_dir / "comm_matrix.csv");
  write_accuracy(result, out_dir / "accuracy.csv");
  write_text(out_dir / "config.json", serialize_config(result.config));
  write_text(out_dir / "summary.json", summary_json(result).dump(2) + "\n");
  m.files = {"rounds.csv",  "comm_matrix.csv", "accuracy.csv",
             "config.json", "summary.json",    "manifest.json"};
  m.finished_at = utc_timestamp();
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

ComparisonTable compare_runs(std::span<const fs::path> dirs, std::size_t baseline) {
  if (dirs.empty()) throw ConfigError("compare: no run directories given");
  if (baseline >= dirs.size()) throw ConfigError("compare: baseline index out of range");
  ComparisonTable table;
  table.baseline = baseline;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    const fs::path file = dirs[d] / "summary.json";
    std::ifstream in(file);
    if (!in) throw IoError("missing summary.json in " + dirs[d].string());
    json s;
    try {
      s = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(file.string() + ": " + e.what());
    }
    ComparisonRow row;
    row.dir = dirs[d];
    std::vector<std::size_t> sizes;
    try {
      row.label = s.at("method").get<std::string>() + " (seed " +
                  std::to_string(s.at("seed").get<std::uint64_t>()) + ")";
      for (const auto& c : s.at("clusters")) {
        sizes.push_back(c.at("size").get<std::size_t>());
        row.cluster_acc.push_back(c.at("mean_test_acc").get<double>());
      }
      row.mean = s.at("mean_over_clusters").get<double>();
    } catch (const json::exception& e) {
      throw ParseError(file.string() + ": " + e.what());
    }
    if (d == 0) {
      table.cluster_sizes = sizes;
    } else if (sizes != table.cluster_sizes) {
      throw ConfigError("compare: cluster layout of " + dirs[d].string() +
                        " differs from " + dirs[0].string());
    }
    table.rows.push_back(std::move(row));
  }
  const auto& base = table.rows[baseline];
  for (auto& row : table.rows) {
    row.cluster_delta.resize(row.cluster_acc.size());
    for (std::size_t c = 0; c < row.cluster_acc.size(); ++c) {
      row.cluster_delta[c] = row.cluster_acc[c] - base.cluster_acc[c];
    }
    row.mean_delta = row.mean - base.mean;
  }
  return table;
}

void ComparisonTable::print(std::ostream& out) const {
  std::size_t w = 6;
  for (const auto& r : rows) w = std::max(w, r.label.size());
  out << std::left << std::setw(static_cast<int>(w)) << "run";
  for (std::size_t c = 0; c < cluster_sizes.size(); ++c) {
    std::ostringstream h;
    h << "c" << c << " (n=" << cluster_sizes[c] << ")";
    out << "  " << std::setw(18) << h.str();
  }
  out << "  " << "mean" << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << std::setw(static_cast<int>(w)) << r.label;
    auto cell = [&](double acc, double delta) {
      char buf[48];
      if (i == baseline) {
        std::snprintf(buf, sizeof buf, "%.4f", acc);
      } else {
        std::snprintf(buf, sizeof buf, "%.4f (%+.4f)", acc, delta);
      }
      return std::string(buf);
    };
    for (std::size_t c = 0; c < r.cluster_acc.size(); ++c) {
      out << "  " << std::setw(18) << cell(r.cluster_acc[c], r.cluster_delta[c]);
    }
    out << "  " << cell(r.mean, r.mean_delta) << '\n';
  }
  out << std::right;
}

}  // namespace ppdl
