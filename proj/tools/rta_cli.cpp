// rta: command-line front end for the inspection simulator and safety filter.
//
// Exit codes: 0 success, 1 safety or acceptance failure, 2 usage or config
// error, 3 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "rta/config.hpp"
#include "rta/runner.hpp"

namespace fs = std::filesystem;
using namespace rta;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSafety = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string rta;  // "", "on" or "off"
  std::string out_dir;
};

void add_common(CLI::App* cmd, Common& c, bool with_rta = true) {
  cmd->add_option("--config", c.config_path, "JSON configuration file (defaults when absent)");
  cmd->add_option("--seed", c.seed, "Episode seed (batch: base seed)");
  if (with_rta) {
    cmd->add_option("--rta", c.rta, "Safety filter on or off")->check(CLI::IsMember({"on", "off"}));
  }
  cmd->add_option("--out", c.out_dir, "Output directory");
}

RunConfig load(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  if (!c.rta.empty()) cfg.episode.rta_enabled = c.rta == "on";
  return cfg;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

void write_trace_files(const fs::path& dir, const std::string& stem, const EpisodeTrace& tr) {
  std::ostringstream jl, csv;
  write_trace(jl, tr);
  write_trace_csv(csv, tr);
  write_file(dir / (stem + ".jsonl"), jl.str());
  write_file(dir / (stem + ".csv"), csv.str());
}

void print_violations(const ViolationStats& v) {
  std::cout << "  violations (% of 1 s steps with h < 0):\n";
  std::cout << "    " << std::left << std::setw(20) << "Any constraint" << v.any_pct << "\n";
  for (ConstraintId id : kAllConstraints) {
    std::cout << "    " << std::left << std::setw(20) << constraint_label(id)
              << v.pct[static_cast<std::size_t>(index_of(id))] << "\n";
  }
}

// ---------------------------------------------------------------------------

int cmd_check_filter(const Common& c) {
  RunConfig cfg = load(c);
  if (c.seed) cfg.episode.seed = *c.seed;
  const bool rta = c.rta.empty() ? true : c.rta == "on";
  const CheckFilterReport rep = run_check_filter(cfg, rta);
  if (!c.out_dir.empty()) write_trace_files(prepare_out(c.out_dir), "check_filter", rep.trace);

  std::cout << "check-filter: seed " << cfg.episode.seed << ", RTA " << (rta ? "on" : "off")
            << ", " << rep.trace.steps.back().t << " s simulated (" << rep.steps << " steps) in " << std::setprecision(3) << rep.seconds
            << " s wall, ended " << to_string(rep.trace.steps.back().termination) << "\n";
  std::cout << std::setprecision(6);
  std::cout << "  min separation margin (m):      " << rep.min_separation << "\n";
  bool ok = false;
  if (rta) {
    std::cout << "  min hard barrier condition:     " << rep.min_hard_bc << "\n"
              << "  min slacked condition - slack:  " << rep.min_slacked_margin << "\n"
              << "  rows without control authority: " << rep.unenforced_rows << "\n"
              << "  solver Optimal fraction:        " << rep.optimal_fraction << "\n";
    ok = rep.safe();
  } else {
    ok = rep.separation_ok && rep.violations.any_count == 0;
  }
  print_violations(rep.violations);
  std::cout << (ok ? "SAFE" : "UNSAFE") << "\n";
  return ok ? kExitOk : kExitSafety;
}

int cmd_episode(const Common& c, const std::string& policy_name) {
  RunConfig cfg = load(c);
  const std::uint64_t seed = c.seed.value_or(cfg.episode.seed);
  const EpisodeOutcome out = run_one(cfg, policy_name, seed);
  const fs::path dir = prepare_out(c.out_dir.empty() ? "." : c.out_dir);
  write_trace_files(dir, "trace", out.trace);
  write_file(dir / "metrics.json", to_json(out.metrics).dump(2) + "\n");

  const auto& m = out.metrics;
  std::cout << "episode: seed " << seed << ", policy " << policy_name << ", RTA "
            << (cfg.episode.rta_enabled ? "on" : "off") << "\n"
            << "  termination       " << to_string(m.termination) << "\n"
            << "  inspected weight  " << m.inspected_weight << "\n"
            << "  total reward      " << m.total_reward << "\n"
            << "  episode length    " << m.episode_length << " s\n"
            << "  delta-v           " << m.delta_v << " m/s\n"
            << "  torque            " << m.total_torque << " N m\n";
  print_violations(m.violations);
  std::cout << "  wrote " << (dir / "trace.jsonl").string() << "\n";
  return kExitOk;
}

int cmd_batch(const Common& c, const std::string& policy_name, std::optional<int> episodes,
              std::optional<int> jobs) {
  RunConfig cfg = load(c);
  if (c.seed) cfg.batch.base_seed = *c.seed;
  if (episodes) cfg.batch.episodes = *episodes;
  if (jobs) cfg.batch.jobs = *jobs;
  cfg.validate();
  const BatchResult res = run_batch(cfg, policy_name, cfg.batch.episodes, cfg.batch.jobs);

  if (!c.out_dir.empty()) {
    const fs::path dir = prepare_out(c.out_dir);
    std::ostringstream csv;
    csv << std::setprecision(17)
        << "seed,termination,inspected_weight,total_reward,episode_length,delta_v,total_torque,"
           "violation_any_pct,error\n";
    for (const auto& e : res.episodes) {
      const auto& m = e.metrics;
      csv << e.seed << ',' << (e.error.empty() ? to_string(m.termination) : "Error") << ','
          << m.inspected_weight << ',' << m.total_reward << ',' << m.episode_length << ','
          << m.delta_v << ',' << m.total_torque << ',' << m.violations.any_pct << ",\""
          << e.error << "\"\n";
    }
    write_file(dir / "episodes.csv", csv.str());
    if (res.summary) write_file(dir / "summary.json", to_json(*res.summary).dump(2) + "\n");
  }

  std::cout << "batch: " << cfg.batch.episodes << " episodes, policy " << policy_name << ", RTA "
            << (cfg.episode.rta_enabled ? "on" : "off") << ", seeds " << cfg.batch.base_seed
            << ".." << cfg.batch.base_seed + static_cast<std::uint64_t>(cfg.batch.episodes) - 1
            << "\n";
  if (res.summary) {
    const auto& s = *res.summary;
    std::cout << "  " << std::left << std::setw(22) << "metric" << "IQM [" << cfg.batch.confidence * 100
              << "% CI]   mean\n";
    for (const auto& m : s.metrics) {
      std::cout << "  " << std::left << std::setw(22) << m.name << m.iqm << " [" << m.ci.lo << ", "
                << m.ci.hi << "]   " << m.mean << "\n";
    }
    std::cout << "  mean violation percentage:\n";
    std::cout << "    " << std::left << std::setw(20) << "Any constraint" << s.any_violation_mean
              << "\n";
    for (ConstraintId id : kAllConstraints) {
      std::cout << "    " << std::left << std::setw(20) << constraint_label(id)
                << s.violation_mean[static_cast<std::size_t>(index_of(id))] << "\n";
    }
    std::cout << "  terminations:";
    for (const auto& [t, n] : s.terminations) std::cout << " " << to_string(t) << "=" << n;
    std::cout << "\n";
  }
  if (!res.failed.empty()) {
    std::cerr << "rta: " << res.failed.size() << " episode(s) failed:\n";
    for (std::size_t i : res.failed) {
      std::cerr << "  seed " << res.episodes[i].seed << ": " << res.episodes[i].error << "\n";
    }
    return kExitRuntime;
  }
  if (cfg.episode.rta_enabled && res.summary) {
    const auto coll = static_cast<std::size_t>(index_of(ConstraintId::Collision));
    if (res.summary->violation_mean[coll] > 0.0) return kExitSafety;
  }
  return kExitOk;
}

int cmd_recompute(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace " + path);
  const EpisodeTrace tr = read_trace(in);
  std::cout << to_json(compute_metrics(tr)).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spacecraft inspection simulator with a control-barrier-function safety filter"};
  app.require_subcommand(1);

  Common common;
  std::string policy = "zero";
  std::optional<int> episodes, jobs;
  std::string trace_path;

  auto* check = app.add_subcommand("check-filter",
                                   "Boundary-pushing LQR+PD run; exit 0 iff the filter keeps it safe");
  add_common(check, common);

  auto* episode = app.add_subcommand("episode", "Run one episode and write its trace and metrics");
  add_common(episode, common);
  episode->add_option("--policy", policy, "zero | random | lqr-pd | external:<cmd>");

  auto* batch = app.add_subcommand("batch", "Run seeded episodes and summarize them");
  add_common(batch, common);
  batch->add_option("--policy", policy, "zero | random | lqr-pd | external:<cmd>");
  batch->add_option("--episodes", episodes, "Number of episodes");
  batch->add_option("--jobs", jobs, "Worker threads");

  auto* dump = app.add_subcommand("dump-defaults", "Print the full default configuration");

  auto* recompute = app.add_subcommand("recompute", "Recompute episode metrics from a trace file");
  recompute->add_option("trace", trace_path, "Trace file (.jsonl)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*check) return cmd_check_filter(common);
    if (*episode) return cmd_episode(common, policy);
    if (*batch) return cmd_batch(common, policy, episodes, jobs);
    if (*dump) {
      std::cout << dump_config(RunConfig{});
      return kExitOk;
    }
    if (*recompute) return cmd_recompute(trace_path);
  } catch (const ConfigError& e) {
    std::cerr << "rta: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "rta: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
