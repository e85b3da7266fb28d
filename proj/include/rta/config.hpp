#pragma once

// Run configuration: every tunable constant with its default, loaded from a
// JSON file of nested tables. Keys absent from the file keep their defaults;
// unknown keys are rejected with their path.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "rta/baseline_ctrl.hpp"
#include "rta/episode_env.hpp"
#include "rta/errors.hpp"

namespace rta {

struct CheckFilterParams {
  double duration = 2000.0;        // s
  double control_period = 1.0;     // s
  bool track_sun = true;           // PD target points the boresight at the Sun
  double tolerance = 1e-6;
  double min_optimal_fraction = 0.99;
};

struct BatchParams {
  std::uint64_t base_seed = 0;
  int episodes = 100;
  int jobs = 1;
  int bootstrap_resamples = 10000;
  double confidence = 0.95;
  std::uint64_t bootstrap_seed = 0;
};

struct RunConfig {
  EpisodeConfig episode;
  LqrParams lqr;
  PdParams pd;
  CheckFilterParams check_filter;
  BatchParams batch;
  double bridge_timeout = 5.0;  // s

  void validate() const {
    episode.validate();
    if (!(check_filter.duration > 0.0) || !(check_filter.control_period > 0.0) ||
        !(check_filter.tolerance >= 0.0) ||
        !(check_filter.min_optimal_fraction >= 0.0 && check_filter.min_optimal_fraction <= 1.0)) {
      throw ConfigError("check_filter: invalid settings");
    }
    if (batch.episodes < 1 || batch.jobs < 1 || batch.bootstrap_resamples < 1 ||
        !(batch.confidence > 0.0 && batch.confidence < 1.0)) {
      throw ConfigError("batch: invalid settings");
    }
    if (!(bridge_timeout > 0.0)) throw ConfigError("bridge_timeout must be positive");
    if (!(pd.kp >= 0.0) || !(pd.kd >= 0.0)) throw ConfigError("pd: gains must be non-negative");
  }
};

namespace config_detail {

using nlohmann::json;

// Writes every visited field into a JSON object.
class Writer {
 public:
  json out = json::object();

  template <class T>
  void operator()(const char* key, const T& v) {
    out[key] = encode(v);
  }
  template <class F>
  void table(const char* key, F&& fill) {
    Writer w;
    fill(w);
    out[key] = std::move(w.out);
  }

 private:
  template <class T>
  static json encode(const T& v) {
    return v;
  }
  static json encode(const Vec3& v) { return {v[0], v[1], v[2]}; }
  static json encode(const Quaternion& q) { return {q.v[0], q.v[1], q.v[2], q.s}; }
  template <int R, int C>
  static json encode(const Eigen::Matrix<double, R, C>& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  }
  static json encode(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
  static json encode(const std::optional<Vec3>& v) { return v ? encode(*v) : json(nullptr); }
};

// Reads visited fields that are present; remembers which keys were used.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected a table");
  }

  template <class T>
  void operator()(const char* key, T& v) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      decode(*it, v);
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }
  template <class F>
  void table(const char* key, F&& fill) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader r(*it, where(key));
    fill(r);
    r.finish();
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
    }
  }
  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <class T>
  static void decode(const json& j, T& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError("expected true or false");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!j.is_number()) throw ConfigError("expected a number");
      if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_integer()) throw ConfigError("expected an integer");
        if (std::is_unsigned_v<T> && j.is_number_integer() && !j.is_number_unsigned()) {
          throw ConfigError("expected a non-negative integer");
        }
      }
    }
    v = j.get<T>();
  }
  static void decode(const json& j, Vec3& v) {
    const auto a = j.get<std::vector<double>>();
    if (a.size() != 3) throw ConfigError("expected 3 numbers");
    v = Vec3(a[0], a[1], a[2]);
  }
  static void decode(const json& j, Quaternion& q) {
    const auto a = j.get<std::vector<double>>();
    if (a.size() != 4) throw ConfigError("expected 4 numbers [x, y, z, w]");
    q = Quaternion(a[0], a[1], a[2], a[3]);
    if (!(std::abs(q.norm() - 1.0) <= 1e-9)) throw ConfigError("quaternion must have unit norm");
  }
  template <int R, int C>
  static void decode(const json& j, Eigen::Matrix<double, R, C>& m) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.size() != static_cast<std::size_t>(R)) throw ConfigError("wrong number of rows");
    for (int i = 0; i < R; ++i) {
      if (rows[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(C)) {
        throw ConfigError("wrong number of columns");
      }
      for (int k = 0; k < C; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
  }
  static void decode(const json& j, std::optional<double>& v) {
    if (j.is_null()) {
      v.reset();
    } else {
      if (!j.is_number()) throw ConfigError("expected a number or null");
      v = j.get<double>();
    }
  }
  static void decode(const json& j, std::optional<std::vector<std::vector<double>>>& v) {
    v = j.get<std::vector<std::vector<double>>>();
  }
  static void decode(const json& j, std::optional<Vec3>& v) {
    if (j.is_null()) {
      v.reset();
    } else {
      Vec3 x;
      decode(j, x);
      v = x;
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// One field list per struct, shared by reading and writing.

template <class V, class P>
void visit_vehicle(V& v, P& p) {
  v("mass", p.mass);
  v("mean_motion", p.mean_motion);
  v("inertia", p.inertia);
  v("wheel_inertia", p.wheel_inertia);
  v("thrust_max", p.thrust_max);
  v("torque_max", p.torque_max);
  v("omega_dot_max", p.omega_dot_max);
  v("psi_dot_max", p.psi_dot_max);
}

template <class V, class P>
void visit_thermal(V& v, P& p) {
  v("node_mass", p.node_mass);
  v("area", p.area);
  v("specific_heat", p.specific_heat);
  v("absorptivity", p.absorptivity);
  v("emissivity", p.emissivity);
  v("albedo_factor", p.albedo_factor);
  v("solar_constant", p.solar_constant);
  v("stefan_boltzmann", p.stefan_boltzmann);
  v("earth_temperature", p.earth_temperature);
  v("view_factor_scale", p.view_factor_scale);
  v("normal_body", p.normal_body);
}

template <class V, class P>
void visit_power(V& v, P& p) {
  v("ideal_performance", p.ideal_performance);
  v("inherent_degradation", p.inherent_degradation);
  v("panel_area", p.panel_area);
  v("power_out", p.power_out);
  v("panel_normal_body", p.panel_normal_body);
}

template <class V, class P>
void visit_constraints(V& v, P& p) {
  v("r_deputy", p.r_deputy);
  v("r_chief", p.r_chief);
  v("a_max", p.a_max);
  v("nu0", p.nu0);
  v("nu1_per_mean_motion", p.nu1_per_mean_motion);
  v("r_max", p.r_max);
  v("psm_horizon", p.psm_horizon);
  v("psm_step", p.psm_step);
  v("v_max", p.v_max);
  v("boresight_body", p.boresight_body);
  v("fov", p.fov);
  v("ez_buffer", p.ez_buffer);
  v("temp_max", p.temp_max);
  v("delta0", p.delta0);
  v("delta1", p.delta1);
  v("energy_min", p.energy_min);
  v("delta2", p.delta2);
  v("omega_max", p.omega_max);
}

template <class V, class P>
void visit_solver(V& v, P& p) {
  v("eps_abs", p.eps_abs);
  v("eps_rel", p.eps_rel);
  v("max_iter", p.max_iter);
  v("rho", p.rho);
  v("sigma", p.sigma);
  v("alpha", p.alpha);
  v("scaling_iter", p.scaling_iter);
  v("check_every", p.check_every);
  v("adapt_rho_every", p.adapt_rho_every);
  v("polish", p.polish);
  v("polish_tol", p.polish_tol);
  v("polish_refine", p.polish_refine);
}

template <class V, class P>
void visit_reward(V& v, P& p) {
  v("points", p.points);
  v("delta_v", p.delta_v);
  v("torque", p.torque);
  v("orient_scale", p.orient_scale);
  v("orient_width", p.orient_width);
  v("time_bonus", p.time_bonus);
  v("time_limit", p.time_limit);
  v("success", p.success);
  v("crash", p.crash);
  v("dist", p.dist);
  v("energy", p.energy);
  v("success_horizon", p.success_horizon);
  v("success_step", p.success_step);
  v("use_desired_control", p.use_desired_control);
}

template <class V, class P>
void visit_episode(V& v, P& p) {
  v("seed", p.seed);
  v("rta_enabled", p.rta_enabled);
  v("policy_period", p.policy_period);
  v("inner_period", p.inner_period);
  v("max_time", p.max_time);
  v("crash_radius", p.crash_radius);
  v("bound_radius", p.bound_radius);
  v("success_weight", p.success_weight);
  v("num_points", p.num_points);
}

template <class V, class P>
void visit_init(V& v, P& p) {
  v("r_min", p.r_min);
  v("r_max", p.r_max);
  v("energy_min", p.energy_min);
  v("energy_max", p.energy_max);
  v("temp_min", p.temp_min);
  v("temp_max", p.temp_max);
  v("max_quaternion_resamples", p.max_quaternion_resamples);
}

template <class V, class P>
void visit_observation(V& v, P& p) {
  v("position", p.position);
  v("velocity", p.velocity);
  v("energy", p.energy);
  v("temperature", p.temperature);
}

template <class V, class P>
void visit_cluster(V& v, P& p) {
  v("points_per_cluster", p.points_per_cluster);
  v("max_iter", p.max_iter);
}

template <class V, class P>
void visit_lqr(V& v, P& p) {
  v("Q", p.Q);
  v("R", p.R);
  v("target_p", p.target_p);
  v("target_v", p.target_v);
}

template <class V, class P>
void visit_pd(V& v, P& p) {
  v("kp", p.kp);
  v("kd", p.kd);
  v("target_q", p.target_q);
  v("sun_axis", p.sun_axis);
}

template <class V, class P>
void visit_check(V& v, P& p) {
  v("duration", p.duration);
  v("control_period", p.control_period);
  v("track_sun", p.track_sun);
  v("tolerance", p.tolerance);
  v("min_optimal_fraction", p.min_optimal_fraction);
}

template <class V, class P>
void visit_batch(V& v, P& p) {
  v("base_seed", p.base_seed);
  v("episodes", p.episodes);
  v("jobs", p.jobs);
  v("bootstrap_resamples", p.bootstrap_resamples);
  v("confidence", p.confidence);
  v("bootstrap_seed", p.bootstrap_seed);
}

// Strengthening functions as [c1, c3] pairs, one per lifting level.
template <class V, class P>
void visit_spec(V& v, P& s) {
  v("relative_degree", s.relative_degree);
  v("slack_weight", s.slack_weight);
  if constexpr (std::is_same_v<V, Writer>) {
    json alpha = json::array();
    for (const auto& a : s.alpha) alpha.push_back({a.c1, a.c3});
    v.out["alpha"] = alpha;
  } else {
    std::optional<std::vector<std::vector<double>>> alpha;
    v("alpha", alpha);
    if (alpha) {
      s.alpha.clear();
      for (const auto& pair : *alpha) {
        if (pair.size() != 2) throw ConfigError(v.where("alpha") + ": expected [c1, c3] pairs");
        s.alpha.push_back({pair[0], pair[1]});
      }
    }
  }
}

template <class V, class C>
void visit_run(V& v, C& c) {
  auto& e = c.episode;
  v.table("episode", [&](V& t) { visit_episode(t, e); });
  v.table("init", [&](V& t) { visit_init(t, e.init); });
  v.table("reward", [&](V& t) { visit_reward(t, e.reward); });
  v.table("observation", [&](V& t) { visit_observation(t, e.norm); });
  v.table("cluster", [&](V& t) { visit_cluster(t, e.cluster); });
  v.table("vehicle", [&](V& t) { visit_vehicle(t, e.plant.vehicle); });
  v.table("thermal", [&](V& t) { visit_thermal(t, e.plant.thermal); });
  v.table("power", [&](V& t) { visit_power(t, e.plant.power); });
  v.table("constraints", [&](V& t) { visit_constraints(t, e.constraints); });
  v.table("barriers", [&](V& t) {
    for (auto& s : e.specs) {
      const std::string key(constraint_key(s.id));
      t.table(key.c_str(), [&](V& u) { visit_spec(u, s); });
    }
  });
  v.table("solver", [&](V& t) { visit_solver(t, e.solver); });
  v.table("lqr", [&](V& t) { visit_lqr(t, c.lqr); });
  v.table("pd", [&](V& t) { visit_pd(t, c.pd); });
  v.table("check_filter", [&](V& t) { visit_check(t, c.check_filter); });
  v.table("batch", [&](V& t) { visit_batch(t, c.batch); });
  v("bridge_timeout", c.bridge_timeout);
}

}  // namespace config_detail

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  config_detail::Writer w;
  config_detail::visit_run(w, cfg);
  return w.out;
}

// Applies the tables of `j` over `base`, then validates.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  config_detail::Reader r(j, "");
  config_detail::visit_run(r, base);
  r.finish();
  try {
    base.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return base;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string dump_config(const RunConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

}  // namespace rta
