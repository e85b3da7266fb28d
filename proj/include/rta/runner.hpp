#pragma once

// Policy construction by name, the boundary-pushing filter check and the
// parallel batch runner shared by the command-line tool and the acceptance
// suite.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rta/baseline_ctrl.hpp"
#include "rta/config.hpp"
#include "rta/episode_env.hpp"
#include "rta/metrics_eval.hpp"

namespace rta {

// "zero", "random", "lqr-pd" or "external:<shell command>".
inline std::unique_ptr<Policy> make_policy(const std::string& name, const RunConfig& cfg,
                                           std::uint64_t seed) {
  const auto& vp = cfg.episode.plant.vehicle;
  if (name == "zero") return std::make_unique<ZeroPolicy>();
  if (name == "random") return std::make_unique<RandomPolicy>(seed, vp);
  if (name == "lqr-pd") return std::make_unique<LqrPdPolicy>(cfg.lqr, cfg.pd, vp);
  const std::string ext = "external:";
  if (name.rfind(ext, 0) == 0 && name.size() > ext.size()) {
    return std::make_unique<ExternalPolicy>(name.substr(ext.size()), cfg.bridge_timeout);
  }
  throw ConfigError("unknown policy '" + name + "' (zero | random | lqr-pd | external:<cmd>)");
}

// ---------------------------------------------------------------------------

struct CheckFilterReport {
  EpisodeTrace trace;
  std::size_t steps = 0;
  double min_separation = 0.0;       // smallest ||p|| - collision radius, m
  double min_hard_bc = 0.0;          // over hard rows
  double min_slacked_margin = 0.0;   // bc - slack over enforced slacked rows
  std::size_t unenforced_rows = 0;   // row-steps dropped for lack of control authority
  double optimal_fraction = 0.0;
  ViolationStats violations;
  double seconds = 0.0;
  bool separation_ok = false;
  bool hard_ok = false;
  bool slacked_ok = false;
  bool solver_ok = false;

  bool safe() const { return separation_ok && hard_ok && slacked_ok && solver_ok; }
};

// LQR toward the chief plus PD attitude control aiming the sensor at the Sun,
// updated every control period, from the configured seed's initial state.
inline CheckFilterReport run_check_filter(const RunConfig& run, bool rta_enabled) {
  const auto& cf = run.check_filter;
  EpisodeConfig cfg = run.episode;
  cfg.rta_enabled = rta_enabled;
  cfg.policy_period = cf.control_period;
  cfg.max_time = cf.duration;
  cfg.success_weight = std::numeric_limits<double>::infinity();

  LqrParams lqr = run.lqr;
  lqr.target_p = Vec3::Zero();
  lqr.target_v = Vec3::Zero();
  PdParams pd = run.pd;
  if (cf.track_sun) pd.sun_axis = cfg.constraints.boresight_body;
  LqrPdPolicy policy(lqr, pd, cfg.plant.vehicle);

  const auto t0 = std::chrono::steady_clock::now();
  InspectionEnv env(cfg);
  CheckFilterReport rep;
  rep.trace = run_episode(env, policy);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double inf = std::numeric_limits<double>::infinity();
  rep.min_separation = rep.min_hard_bc = rep.min_slacked_margin = inf;
  std::size_t optimal = 0;
  const auto collision = static_cast<std::size_t>(index_of(ConstraintId::Collision));
  for (const auto& r : rep.trace.steps) {
    rep.min_separation = std::min(rep.min_separation, r.raw[collision]);
    if (r.status == QpStatus::Optimal) ++optimal;
    if (!rta_enabled) continue;
    for (std::size_t i = 0; i < kNumConstraints; ++i) {
      if (!r.enforced[i]) {
        ++rep.unenforced_rows;
        continue;
      }
      if (cfg.specs[i].slack_weight) {
        rep.min_slacked_margin = std::min(rep.min_slacked_margin, r.bc[i] - r.slack[i]);
      } else {
        rep.min_hard_bc = std::min(rep.min_hard_bc, r.bc[i]);
      }
    }
  }
  rep.steps = rep.trace.steps.size();
  rep.optimal_fraction =
      rep.steps ? static_cast<double>(optimal) / static_cast<double>(rep.steps) : 0.0;
  rep.violations = violation_stats(rep.trace);
  rep.separation_ok = rep.min_separation >= 0.0;
  rep.hard_ok = rep.min_hard_bc >= -cf.tolerance;
  rep.slacked_ok = rep.min_slacked_margin >= -cf.tolerance;
  rep.solver_ok = rep.optimal_fraction >= cf.min_optimal_fraction;
  return rep;
}

// ---------------------------------------------------------------------------

struct EpisodeOutcome {
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
  EpisodeTrace trace;
  std::string error;  // empty on success
};

inline EpisodeOutcome run_one(const RunConfig& run, const std::string& policy_name,
                              std::uint64_t seed) {
  EpisodeOutcome out;
  out.seed = seed;
  EpisodeConfig cfg = run.episode;
  cfg.seed = seed;
  InspectionEnv env(cfg);
  auto policy = make_policy(policy_name, run, seed);
  out.trace = run_episode(env, *policy);
  out.metrics = compute_metrics(out.trace);
  return out;
}

struct BatchResult {
  std::vector<EpisodeOutcome> episodes;  // ordered by index
  std::vector<std::size_t> failed;
  std::optional<BatchSummary> summary;
};

// Episode i uses seed base_seed + i. Workers take indices from a shared
// counter; results land in their slot, so the reduction order is fixed.
inline BatchResult run_batch(const RunConfig& run, const std::string& policy_name, int n,
                             int jobs, bool keep_traces = false) {
  if (n < 1) throw ConfigError("batch: need at least one episode");
  BatchResult res;
  res.episodes.resize(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      auto& slot = res.episodes[static_cast<std::size_t>(i)];
      const std::uint64_t seed = run.batch.base_seed + static_cast<std::uint64_t>(i);
      try {
        slot = run_one(run, policy_name, seed);
        if (!keep_traces) slot.trace = EpisodeTrace{};
      } catch (const std::exception& e) {
        slot.seed = seed;
        slot.error = e.what();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<EpisodeMetrics> ok;
  for (std::size_t i = 0; i < res.episodes.size(); ++i) {
    if (res.episodes[i].error.empty()) {
      ok.push_back(res.episodes[i].metrics);
    } else {
      res.failed.push_back(i);
    }
  }
  if (!ok.empty()) {
    res.summary = summarize(ok, run.batch.bootstrap_seed, run.batch.bootstrap_resamples,
                            run.batch.confidence);
  }
  return res;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ViolationStats& v) {
  nlohmann::json per = nlohmann::json::object();
  for (ConstraintId id : kAllConstraints) {
    per[std::string(constraint_key(id))] = v.pct[static_cast<std::size_t>(index_of(id))];
  }
  return {{"steps", v.steps}, {"any_pct", v.any_pct}, {"pct", per}};
}

inline nlohmann::json to_json(const EpisodeMetrics& m) {
  return {{"inspected_weight", m.inspected_weight},
          {"total_reward", m.total_reward},
          {"episode_length", m.episode_length},
          {"delta_v", m.delta_v},
          {"delta_v_desired", m.delta_v_desired},
          {"total_torque", m.total_torque},
          {"total_torque_desired", m.total_torque_desired},
          {"termination", to_string(m.termination)},
          {"violations", to_json(m.violations)}};
}

inline nlohmann::json to_json(const BatchSummary& s) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : s.metrics) {
    metrics.push_back(
        {{"name", m.name}, {"iqm", m.iqm}, {"ci_lo", m.ci.lo}, {"ci_hi", m.ci.hi}, {"mean", m.mean}});
  }
  nlohmann::json viol = nlohmann::json::array();
  viol.push_back({{"constraint", "Any constraint"}, {"mean_pct", s.any_violation_mean}});
  for (ConstraintId id : kAllConstraints) {
    viol.push_back({{"constraint", std::string(constraint_label(id))},
                    {"key", std::string(constraint_key(id))},
                    {"mean_pct", s.violation_mean[static_cast<std::size_t>(index_of(id))]}});
  }
  nlohmann::json term = nlohmann::json::object();
  for (const auto& [t, c] : s.terminations) term[to_string(t)] = c;
  return {{"episodes", s.episodes}, {"metrics", metrics}, {"violations", viol},
          {"terminations", term}};
}

}  // namespace rta
