// ppdl: run decentralized-learning experiments and compare their summaries.
//
//   ppdl run --config exp.json [--method ppdl] [--seed 3 | --seeds 0,1,2]
//            --out-dir runs/exp [--audit-log] [--jobs 2]
//   ppdl compare runs/ppdl/seed_0 runs/random/seed_0 [--baseline 1]

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ppdl/config.hpp"
#include "ppdl/errors.hpp"
#include "ppdl/report.hpp"
#include "ppdl/sim.hpp"

namespace {

std::mutex log_mutex;

void log_line(const std::string& line) {
  std::lock_guard lock(log_mutex);
  std::cerr << line << '\n';
}

struct RunOptions {
  std::string config_path;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  bool audit_log = false;
  std::size_t jobs = 1;
  std::optional<std::size_t> threads;
};

// Runs one seed into `dir`. Returns false (after logging) on failure.
bool run_one(ppdl::SimConfig config, const std::filesystem::path& dir, bool audit) {
  try {
    const std::string started = ppdl::utc_timestamp();
    ppdl::Simulation sim(config);
    std::ofstream audit_out;
    if (audit) {
      std::filesystem::create_directories(dir);
      audit_out.open(dir / "audit.log");
      if (!audit_out) throw ppdl::IoError("cannot write " + (dir / "audit.log").string());
      audit_out << "round,sender,receiver,kind,payload_digest\n";
      sim.set_audit_sink([&audit_out](std::uint64_t, ppdl::NodeId, const ppdl::Transcript& tr) {
        tr.write_audit_log(audit_out);
      });
    }
    const ppdl::ExperimentResult result = sim.run();
    auto manifest = ppdl::write_outputs(result, dir, started);
    if (audit) {
      audit_out.close();
      manifest.files.push_back("audit.log");
      ppdl::write_manifest(manifest, dir / "manifest.json");
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "seed %llu: mean test acc %.4f (over clusters), privacy violations %llu",
                  static_cast<unsigned long long>(config.seed), result.mean_over_clusters,
                  static_cast<unsigned long long>(sim.privacy_violations()));
    log_line(buf);
    return true;
  } catch (const std::exception& e) {
    log_line("seed " + std::to_string(config.seed) + " failed: " + e.what());
    return false;
  }
}

int cmd_run(const RunOptions& opt) {
  std::optional<ppdl::Method> override_method;
  if (!opt.method.empty()) override_method = ppdl::parse_method(opt.method);
  ppdl::ParsedConfig parsed = ppdl::parse_config(opt.config_path, override_method);
  for (const auto& d : parsed.defaults_applied) log_line("default: " + d);
  ppdl::SimConfig base = parsed.config;
  if (opt.threads) base.threads = *opt.threads;

  std::vector<std::uint64_t> seeds = opt.seeds;
  if (seeds.empty()) seeds.push_back(opt.seed.value_or(base.seed));
  const bool sweep = opt.seeds.size() > 0;
  const std::filesystem::path root(opt.out_dir);
  const std::string started = ppdl::utc_timestamp();

  std::vector<char> ok(seeds.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      ppdl::SimConfig c = base;
      c.seed = seeds[i];
      const auto dir = sweep ? root / ("seed_" + std::to_string(seeds[i])) : root;
      ok[i] = run_one(c, dir, opt.audit_log);
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, seeds.size()));
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  bool all_ok = true;
  for (char v : ok) all_ok = all_ok && v;
  if (sweep) {
    ppdl::ExperimentManifest m;
    m.config_digest = ppdl::config_digest(base);
    m.seeds = seeds;
    m.started_at = started;
    m.version = ppdl::version_string();
    m.finished_at = ppdl::utc_timestamp();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (ok[i]) m.files.push_back("seed_" + std::to_string(seeds[i]) + "/manifest.json");
    }
    ppdl::write_manifest(m, root / "manifest.json");
  }
  return all_ok ? 0 : 1;
}

int cmd_compare(const std::vector<std::string>& dirs, std::size_t baseline) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const auto table = ppdl::compare_runs(paths, baseline);
  table.print(std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving decentralized learning simulator"};
  app.set_version_flag("--version", ppdl::version_string());
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a JSON config");
  run_cmd->add_option("--config", run.config_path, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--method", run.method,
                      "Override the config's method (ppdl, ppdl-var, dac, random, oracle, local)");
  auto* seed_opt = run_cmd->add_option("--seed", run.seed, "Seed for a single run");
  run_cmd->add_option("--seeds", run.seeds, "Comma-separated seed sweep; outputs go to seed_<s>/")
      ->delimiter(',')
      ->excludes(seed_opt);
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory")->required();
  run_cmd->add_flag("--audit-log", run.audit_log,
                    "Write the secure-aggregation message log to audit.log");
  run_cmd->add_option("--jobs", run.jobs, "Seeds run in parallel")->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.threads, "Worker threads per simulation")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> dirs;
  std::size_t baseline = 0;
  auto* cmp_cmd = app.add_subcommand("compare", "Tabulate per-cluster accuracy across runs");
  cmp_cmd->add_option("dirs", dirs, "Run directories containing summary.json")->required();
  cmp_cmd->add_option("--baseline", baseline, "Index of the baseline run in dirs");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run);
    if (*cmp_cmd) return cmd_compare(dirs, baseline);
  } catch (const ppdl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
