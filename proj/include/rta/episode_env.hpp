#pragma once

// Inspection episode: seeded reset, dual-rate step loop (policy period over
// 1 s filter/dynamics seconds), observation, reward and termination.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rta/asif_filter.hpp"
#include "rta/baseline_ctrl.hpp"
#include "rta/cbf_kit.hpp"
#include "rta/errors.hpp"
#include "rta/inspection_geom.hpp"
#include "rta/quat_dyn.hpp"
#include "rta/trace.hpp"

namespace rta {

struct RewardParams {
  double points = 1.0;
  double delta_v = 0.02;
  double torque = 0.1;
  double orient_scale = 0.0005;
  double orient_width = 0.15;
  double time_bonus = 0.001;
  double time_limit = 3000.0;     // s
  double success = 1.0;
  double crash = 1.0;
  double dist = 1.0;
  double energy = 1.0;
  double success_horizon = 172800.0;  // s, two days of free flight
  double success_step = 60.0;         // s
  bool use_desired_control = true;
};

struct ObsNormalization {
  double position = 800.0;   // m
  double velocity = 5.0;     // m/s
  double energy = 10.0;      // kJ
  double temperature = 50.0; // degC
  // Angular rate is divided by the rate limit of the constraint set.
};

struct InitRanges {
  double r_min = 50.0, r_max = 100.0;  // m
  double energy_min = 5.0, energy_max = 7.0;  // kJ
  double temp_min = 3.0, temp_max = 7.0;      // degC
  int max_quaternion_resamples = 10000;
};

struct ClusterParams {
  int points_per_cluster = 20;
  int max_iter = 100;
};

struct EpisodeConfig {
  std::uint64_t seed = 0;
  bool rta_enabled = true;
  double policy_period = 10.0;  // s
  double inner_period = 1.0;    // s
  double max_time = 12236.0;    // s
  double crash_radius = 15.0;   // m
  double bound_radius = 800.0;  // m
  double success_weight = 0.95;
  std::size_t num_points = 100;
  InitRanges init;
  RewardParams reward;
  ObsNormalization norm;
  ClusterParams cluster;
  PlantParams plant;
  ConstraintParams constraints;
  std::vector<ConstraintSpec> specs = default_specs();
  QpSettings solver;

  int inner_steps() const { return static_cast<int>(std::llround(policy_period / inner_period)); }

  SensorParams sensor() const { return {constraints.boresight_body, constraints.fov}; }

  void validate() const {
    if (!(inner_period > 0.0) || !(policy_period > 0.0)) {
      throw ConfigError("episode: periods must be positive");
    }
    const double ratio = policy_period / inner_period;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0) {
      throw ConfigError("episode: policy_period must be a whole multiple of inner_period");
    }
    if (!(max_time > 0.0) || !(crash_radius >= 0.0) || !(bound_radius > crash_radius)) {
      throw ConfigError("episode: invalid time or distance limits");
    }
    if (!(init.r_min > 0.0 && init.r_max >= init.r_min) ||
        !(init.energy_max >= init.energy_min) || !(init.temp_max >= init.temp_min) ||
        init.max_quaternion_resamples < 1) {
      throw ConfigError("episode: invalid initial ranges");
    }
    if (num_points < 1) throw ConfigError("episode: need at least one inspection point");
    if (cluster.points_per_cluster < 1 || cluster.max_iter < 1) {
      throw ConfigError("episode: invalid clustering parameters");
    }
    if (specs.size() != kNumConstraints) {
      throw ConfigError("episode: one constraint spec per constraint required");
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (index_of(specs[i].id) != static_cast<int>(i)) {
        throw ConfigError("episode: constraint specs out of order");
      }
      specs[i].validate();
    }
    sensor().validate();
  }
};

// ---------------------------------------------------------------------------

inline Vec3 azimuth_elevation(double r, double a, double e) {
  return {r * std::cos(a) * std::cos(e), r * std::sin(a) * std::cos(e), r * std::sin(e)};
}

inline Quaternion uniform_quaternion(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double tp = 2.0 * std::numbers::pi;
  return {a * std::sin(tp * u2), a * std::cos(tp * u2), b * std::sin(tp * u3),
          b * std::cos(tp * u3)};
}

struct EpisodeStart {
  SimState state;
  PointSet points;
  Observation obs{};
  int quaternion_draws = 0;
};

inline Observation observe(const SimState& s, const PointSet& ps, const EpisodeConfig& cfg);

inline EpisodeStart reset_episode(const EpisodeConfig& cfg, const CbfModel& model) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const double pi = std::numbers::pi;

  EpisodeStart out;
  SimState& s = out.state;
  const double r = uniform(cfg.init.r_min, cfg.init.r_max);
  const double a = uniform(0.0, 2.0 * pi);
  const double e = uniform(-0.5 * pi, 0.5 * pi);
  s.p = azimuth_elevation(r, a, e);
  s.energy_kj = uniform(cfg.init.energy_min, cfg.init.energy_max);
  s.temp_c = uniform(cfg.init.temp_min, cfg.init.temp_max);
  s.theta_sun = wrap_two_pi(uniform(0.0, 2.0 * pi));
  const double pa = uniform(0.0, 2.0 * pi);
  const double pe = uniform(-0.5 * pi, 0.5 * pi);
  const Vec3 priority = azimuth_elevation(1.0, pa, pe);
  out.points = generate_points(cfg.num_points, cfg.constraints.r_chief, priority, cfg.seed);

  for (int draw = 1;; ++draw) {
    if (draw > cfg.init.max_quaternion_resamples) {
      throw InitFeasibilityExhausted("reset: no constraint-satisfying attitude after " +
                                     std::to_string(cfg.init.max_quaternion_resamples) +
                                     " draws");
    }
    s.q = uniform_quaternion(rng);
    bool ok = true;
    for (ConstraintId id : kAllConstraints) {
      if (model.eval_h(id, s) < 0.0) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.quaternion_draws = draw;
      break;
    }
  }
  out.obs = observe(s, out.points, cfg);
  return out;
}

// Direction to the centroid, nearest the deputy, of a k-means partition of
// the uninspected points. Zero when everything is inspected.
inline Vec3 uninspected_cluster_direction(const PointSet& ps, const Vec3& deputy_p,
                                          std::uint64_t seed, const ClusterParams& cp = {}) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps.inspected[i]) pts.push_back(ps.positions[i]);
  }
  if (pts.empty()) return Vec3::Zero();
  const std::size_t n = pts.size();
  const auto per = static_cast<std::size_t>(cp.points_per_cluster);
  const std::size_t k = std::min(n, std::max<std::size_t>(1, (n + per - 1) / per));

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<Vec3> centers;
  centers.push_back(pts[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (pts[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) break;
    std::uniform_real_distribution<double> pick(0.0, total);
    double target = pick(rng);
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(pts[chosen]);
  }

  // Lloyd iterations.
  std::vector<std::size_t> assign(n, centers.size());
  for (int it = 0; it < cp.max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = (pts[i] - centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vec3> sum(centers.size(), Vec3::Zero());
    std::vector<std::size_t> count(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[assign[i]] += pts[i];
      ++count[assign[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
  }

  std::size_t nearest = 0;
  for (std::size_t c = 1; c < centers.size(); ++c) {
    if ((centers[c] - deputy_p).squaredNorm() < (centers[nearest] - deputy_p).squaredNorm()) {
      nearest = c;
    }
  }
  const double norm = centers[nearest].norm();
  return norm > 1e-12 ? Vec3(centers[nearest] / norm) : Vec3::Zero();
}

inline Vec3 unit_or_zero(const Vec3& v) {
  const double n = v.norm();
  return n > 0.0 ? Vec3(v / n) : Vec3::Zero();
}

inline Observation observe(const SimState& s, const PointSet& ps, const EpisodeConfig& cfg) {
  const Quaternion to_body = s.q.conjugate();
  const Vec3 p_hat = unit_or_zero(s.p);
  const Vec3 sun = sun_vector(s.theta_sun);
  const Vec3 ups = uninspected_cluster_direction(ps, s.p, cfg.seed, cfg.cluster);
  Observation o{};
  std::size_t i = 0;
  auto put = [&](double x) { o[i++] = x; };
  auto put3 = [&](const Vec3& v) {
    put(v[0]);
    put(v[1]);
    put(v[2]);
  };
  put(s.p.norm() / cfg.norm.position);
  put3(quat_rotate(to_body, p_hat));
  put(s.v.norm() / cfg.norm.velocity);
  put3(quat_rotate(to_body, unit_or_zero(s.v)));
  put3(s.omega / cfg.constraints.omega_max);
  put(s.energy_kj / cfg.norm.energy);
  put(s.temp_c / cfg.norm.temperature);
  put3(quat_rotate(to_body, sun));
  put(sun.dot(p_hat));
  put3(quat_rotate(to_body, ps.priority));
  put(ps.priority.dot(p_hat));
  put3(quat_rotate(to_body, ups));
  put(ups.dot(p_hat));
  put(ps.inspected_weight());
  return o;
}

// ---------------------------------------------------------------------------

inline Termination termination_check(const SimState& s, const PointSet& ps,
                                     const EpisodeConfig& cfg) {
  const double r = s.p.norm();
  if (r < cfg.crash_radius) return Termination::Crash;
  if (r > cfg.bound_radius) return Termination::OutOfBounds;
  if (s.energy_kj <= 0.0) return Termination::PowerDepleted;
  if (ps.inspected_weight() >= cfg.success_weight) return Termination::Success;
  if (s.t >= cfg.max_time - 1e-9) return Termination::Timeout;
  return Termination::Running;
}

struct RewardInputs {
  double w_prev = 0.0;
  double w_new = 0.0;
  ControlInput u_des;
  double delta_v_applied = 0.0;   // m/s over the policy step
  double torque_applied = 0.0;    // N m, time-averaged over the policy step
  double elapsed = 0.0;           // s
  SimState state;                 // at the end of the policy step
  Termination termination = Termination::Running;
};

inline RewardBreakdown compute_reward(const EpisodeConfig& cfg, const CbfModel& model,
                                      const RewardInputs& in) {
  const auto& rp = cfg.reward;
  RewardBreakdown r;
  r.points = rp.points * (in.w_new - in.w_prev);
  const double mass = cfg.plant.vehicle.mass;
  const double dv = rp.use_desired_control ? l1(in.u_des.force) / mass * in.elapsed
                                           : in.delta_v_applied;
  const double tq = rp.use_desired_control ? l1(in.u_des.torque) : in.torque_applied;
  r.delta_v = -rp.delta_v * dv;
  r.torque = -rp.torque * tq;
  const Vec3 bore = quat_rotate(in.state.q, cfg.constraints.boresight_body).normalized();
  const double d = bore.dot(-unit_or_zero(in.state.p));
  if (std::abs(d - 1.0) <= 1.0) r.orient = rp.orient_scale * std::exp(-std::abs(d - 1.0) / rp.orient_width);
  if (in.state.t <= rp.time_limit) r.time = rp.time_bonus;
  if (in.termination == Termination::Success) {
    const double h = model.psm(in.state, rp.success_horizon, rp.success_step).h;
    r.success = h >= 0.0 ? rp.success : -rp.success;
  }
  if (in.termination == Termination::Crash) r.crash = -rp.crash;
  if (in.termination == Termination::OutOfBounds) r.dist = -rp.dist;
  if (in.state.energy_kj < cfg.constraints.energy_min) r.energy = -rp.energy;
  return r;
}

// ---------------------------------------------------------------------------

struct StepResult {
  Observation obs{};
  double reward = 0.0;
  RewardBreakdown breakdown;
  bool done = false;
  Termination termination = Termination::Running;
  ConstraintArray h{};                         // at the end of the step
  std::array<bool, kNumConstraints> violated{};  // at any second of the step
  int seconds = 0;
};

class InspectionEnv {
 public:
  explicit InspectionEnv(EpisodeConfig cfg)
      : cfg_((cfg.validate(), std::move(cfg))),
        model_(cfg_.plant, cfg_.constraints),
        filter_(model_, cfg_.specs, cfg_.solver) {}

  const EpisodeConfig& config() const { return cfg_; }
  const CbfModel& model() const { return model_; }
  const SimState& state() const { return state_; }
  const PointSet& points() const { return points_; }
  const EpisodeTrace& trace() const { return trace_; }
  bool done() const { return termination_ != Termination::Running; }
  Termination termination() const { return termination_; }
  const Observation& observation() const { return obs_; }

  // Seeded from the configuration; a new seed gives a new episode.
  Observation reset(std::optional<std::uint64_t> seed = std::nullopt,
                    const std::string& policy_name = "") {
    if (seed) cfg_.seed = *seed;
    EpisodeStart st = reset_episode(cfg_, model_);
    state_ = st.state;
    points_ = std::move(st.points);
    obs_ = st.obs;
    filter_.reset();
    evals_ = model_.evaluate_all(cfg_.specs, state_);
    termination_ = Termination::Running;
    trace_ = EpisodeTrace{};
    trace_.header.seed = cfg_.seed;
    trace_.header.rta_enabled = cfg_.rta_enabled;
    trace_.header.policy = policy_name;
    trace_.header.inner_period = cfg_.inner_period;
    trace_.header.policy_period = cfg_.policy_period;
    trace_.header.mass = cfg_.plant.vehicle.mass;
    trace_.header.num_points = points_.size();
    trace_.header.initial = state_;
    return obs_;
  }

  // Starts from an explicit state and point set instead of a seeded draw.
  Observation reset_to(const SimState& s, PointSet ps, const std::string& policy_name = "") {
    reset(std::nullopt, policy_name);
    state_ = s;
    points_ = std::move(ps);
    evals_ = model_.evaluate_all(cfg_.specs, state_);
    obs_ = observe(state_, points_, cfg_);
    trace_.header.initial = state_;
    trace_.header.num_points = points_.size();
    return obs_;
  }

  StepResult step(const ControlInput& u_des_in) {
    if (done()) throw EpisodeFinished("step: episode already finished");
    if (!u_des_in.force.allFinite() || !u_des_in.torque.allFinite()) {
      throw NonFiniteInput("step: desired control is not finite");
    }
    const auto& vp = cfg_.plant.vehicle;
    const ControlInput u_des = clamp_control(u_des_in, vp);
    const double w_prev = points_.inspected_weight();
    const double dt = cfg_.inner_period;
    StepResult res;
    ControlInput u_prev = u_des;
    double dv_applied = 0.0, torque_applied = 0.0;
    const int n_inner = cfg_.inner_steps();
    Termination term = Termination::Running;
    for (int k = 0; k < n_inner; ++k) {
      StepRecord rec;
      rec.u_des = u_des;
      rec.filtered = cfg_.rta_enabled;
      ControlInput u_act;
      if (cfg_.rta_enabled) {
        const FilterResult fr = filter_.filter(u_prev, evals_);
        u_act = fr.u_act;
        rec.status = fr.report.status;
        rec.modified = (u_act.as_vector() - u_des.as_vector()).cwiseAbs().maxCoeff() >
                       kModifiedTolerance;
        for (const auto& c : fr.report.constraints) {
          const auto i = static_cast<std::size_t>(index_of(c.id));
          rec.bc[i] = c.bc;
          rec.slack[i] = c.slack;
          rec.enforced[i] = c.enforced;
        }
      } else {
        u_act = u_des;
        for (const auto& e : evals_) rec.bc[static_cast<std::size_t>(index_of(e.id))] = e.row.bc(u_act.as_vector());
      }
      rec.u_act = u_act;
      u_prev = u_act;

      state_ = step_rk4(cfg_.plant, state_, u_act, dt);
      if (!state_.all_finite()) throw NonFiniteState("step: state became non-finite");
      const InspectionUpdate up = update_inspected(points_, state_.p, state_.q,
                                                   sun_vector(state_.theta_sun), cfg_.sensor());
      evals_ = model_.evaluate_all(cfg_.specs, state_);
      for (const auto& e : evals_) {
        const auto i = static_cast<std::size_t>(index_of(e.id));
        rec.h[i] = e.h;
        rec.raw[i] = e.raw;
        if (e.h < 0.0) res.violated[i] = true;
      }
      rec.t = state_.t;
      rec.state = state_;
      rec.new_points = up.indices;
      rec.inspected_weight = points_.inspected_weight();
      dv_applied += l1(u_act.force) / vp.mass * dt;
      torque_applied += l1(u_act.torque) * dt / cfg_.policy_period;
      term = termination_check(state_, points_, cfg_);
      rec.termination = term;
      ++res.seconds;
      trace_.steps.push_back(std::move(rec));
      if (term != Termination::Running) break;
    }

    RewardInputs in;
    in.w_prev = w_prev;
    in.w_new = points_.inspected_weight();
    in.u_des = u_des;
    in.delta_v_applied = dv_applied;
    in.torque_applied = torque_applied;
    in.elapsed = res.seconds * dt;
    in.state = state_;
    in.termination = term;
    res.breakdown = compute_reward(cfg_, model_, in);
    res.reward = res.breakdown.total();
    trace_.steps.back().reward = res.breakdown;

    termination_ = term;
    obs_ = observe(state_, points_, cfg_);
    res.obs = obs_;
    res.done = done();
    res.termination = term;
    for (std::size_t i = 0; i < kNumConstraints; ++i) res.h[i] = trace_.steps.back().h[i];
    return res;
  }

 private:
  EpisodeConfig cfg_;
  CbfModel model_;
  AsifFilter filter_;
  SimState state_;
  PointSet points_;
  Observation obs_{};
  std::vector<ConstraintEval> evals_;
  Termination termination_ = Termination::Running;
  EpisodeTrace trace_;
};

// Runs a full episode from the configured seed.
inline EpisodeTrace run_episode(InspectionEnv& env, Policy& policy) {
  env.reset(std::nullopt, policy.name());
  while (!env.done()) env.step(policy.act(env.state(), env.observation()));
  return env.trace();
}

}  // namespace rta
