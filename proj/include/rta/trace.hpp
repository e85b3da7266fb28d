#pragma once

// Per-second episode records and their line-delimited JSON encoding. A trace
// file is one header line followed by one line per simulated second.

#include <json.hpp>

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rta/cbf_kit.hpp"
#include "rta/errors.hpp"
#include "rta/qp_solver.hpp"
#include "rta/quat_dyn.hpp"

namespace rta {

enum class Termination { Running, Success, Crash, OutOfBounds, Timeout, PowerDepleted };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Running: return "running";
    case Termination::Success: return "success";
    case Termination::Crash: return "crash";
    case Termination::OutOfBounds: return "out_of_bounds";
    case Termination::Timeout: return "timeout";
    case Termination::PowerDepleted: return "power_depleted";
  }
  return "unknown";
}

inline Termination termination_from_string(const std::string& s) {
  for (Termination t : {Termination::Running, Termination::Success, Termination::Crash,
                        Termination::OutOfBounds, Termination::Timeout,
                        Termination::PowerDepleted}) {
    if (s == to_string(t)) return t;
  }
  throw ConfigError("unknown termination '" + s + "'");
}

inline QpStatus qp_status_from_string(const std::string& s) {
  for (QpStatus q : {QpStatus::Optimal, QpStatus::MaxIter, QpStatus::Infeasible}) {
    if (s == to_string(q)) return q;
  }
  throw ConfigError("unknown solver status '" + s + "'");
}

inline constexpr std::size_t kNumRewardTerms = 9;

struct RewardBreakdown {
  double points = 0.0;
  double delta_v = 0.0;
  double torque = 0.0;
  double orient = 0.0;
  double time = 0.0;
  double success = 0.0;
  double crash = 0.0;
  double dist = 0.0;
  double energy = 0.0;

  static constexpr std::array<const char*, kNumRewardTerms> names = {
      "points", "delta_v", "torque", "orient", "time", "success", "crash", "dist", "energy"};

  std::array<double, kNumRewardTerms> as_array() const {
    return {points, delta_v, torque, orient, time, success, crash, dist, energy};
  }
  static RewardBreakdown from_array(const std::array<double, kNumRewardTerms>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
  }
  double total() const {
    double s = 0.0;
    for (double x : as_array()) s += x;
    return s;
  }
};

using ConstraintArray = std::array<double, kNumConstraints>;

inline double l1(const Vec3& v) { return v.cwiseAbs().sum(); }

inline constexpr std::size_t kObsSize = 26;
using Observation = std::array<double, kObsSize>;

struct StepRecord {
  double t = 0.0;  // after the step
  SimState state;  // after the step
  ControlInput u_des;
  ControlInput u_act;
  ConstraintArray h{};      // after the step
  ConstraintArray raw{};    // after the step
  ConstraintArray bc{};     // at the filtered state, for u_act
  ConstraintArray slack{};
  std::array<bool, kNumConstraints> enforced{};
  bool filtered = false;
  QpStatus status = QpStatus::Optimal;
  bool modified = false;
  std::vector<int> new_points;
  double inspected_weight = 0.0;
  std::optional<RewardBreakdown> reward;  // on the last second of each policy step
  Termination termination = Termination::Running;
};

struct TraceHeader {
  std::uint64_t seed = 0;
  bool rta_enabled = true;
  std::string policy;
  double inner_period = 1.0;
  double policy_period = 10.0;
  double mass = 12.0;
  std::size_t num_points = 0;
  SimState initial;
};

struct EpisodeTrace {
  TraceHeader header;
  std::vector<StepRecord> steps;

  Termination termination() const {
    return steps.empty() ? Termination::Running : steps.back().termination;
  }
};

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return {v[0], v[1], v[2]}; }

inline Vec3 json_vec(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json state_json(const SimState& s) {
  return {{"p", vec_json(s.p)},
          {"v", vec_json(s.v)},
          {"q", {s.q.v[0], s.q.v[1], s.q.v[2], s.q.s}},
          {"w", vec_json(s.omega)},
          {"T", s.temp_c},
          {"E", s.energy_kj},
          {"theta_s", s.theta_sun},
          {"t", s.t}};
}

inline SimState json_state(const nlohmann::json& j) {
  SimState s;
  s.p = json_vec(j.at("p"));
  s.v = json_vec(j.at("v"));
  const auto& q = j.at("q");
  s.q = Quaternion(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                   q.at(3).get<double>());
  s.omega = json_vec(j.at("w"));
  s.temp_c = j.at("T").get<double>();
  s.energy_kj = j.at("E").get<double>();
  s.theta_sun = j.at("theta_s").get<double>();
  s.t = j.at("t").get<double>();
  return s;
}

inline nlohmann::json control_json(const ControlInput& u) {
  return {{"F", vec_json(u.force)}, {"tau", vec_json(u.torque)}};
}

inline ControlInput json_control(const nlohmann::json& j) {
  return {json_vec(j.at("F")), json_vec(j.at("tau"))};
}

inline nlohmann::json per_constraint(const ConstraintArray& a) {
  nlohmann::json j = nlohmann::json::object();
  for (ConstraintId id : kAllConstraints) j[std::string(constraint_key(id))] = a[index_of(id)];
  return j;
}

inline ConstraintArray json_per_constraint(const nlohmann::json& j) {
  ConstraintArray a{};
  for (ConstraintId id : kAllConstraints) a[index_of(id)] = j.at(std::string(constraint_key(id)));
  return a;
}

}  // namespace detail

inline nlohmann::json to_json(const TraceHeader& h) {
  return {{"type", "header"},
          {"version", 1},
          {"seed", h.seed},
          {"rta", h.rta_enabled},
          {"policy", h.policy},
          {"inner_period", h.inner_period},
          {"policy_period", h.policy_period},
          {"mass", h.mass},
          {"num_points", h.num_points},
          {"initial", detail::state_json(h.initial)}};
}

inline nlohmann::json to_json(const StepRecord& r) {
  nlohmann::json j = {{"type", "step"},
                      {"t", r.t},
                      {"state", detail::state_json(r.state)},
                      {"u_des", detail::control_json(r.u_des)},
                      {"u_act", detail::control_json(r.u_act)},
                      {"h", detail::per_constraint(r.h)},
                      {"raw", detail::per_constraint(r.raw)},
                      {"bc", detail::per_constraint(r.bc)},
                      {"slack", detail::per_constraint(r.slack)},
                      {"filtered", r.filtered},
                      {"status", to_string(r.status)},
                      {"modified", r.modified},
                      {"new_points", r.new_points},
                      {"w_p", r.inspected_weight},
                      {"termination", to_string(r.termination)}};
  nlohmann::json enforced = nlohmann::json::array();
  for (ConstraintId id : kAllConstraints) {
    if (r.enforced[index_of(id)]) enforced.push_back(std::string(constraint_key(id)));
  }
  j["enforced"] = enforced;
  if (r.reward) {
    nlohmann::json rw = nlohmann::json::object();
    const auto a = r.reward->as_array();
    for (std::size_t i = 0; i < kNumRewardTerms; ++i) rw[RewardBreakdown::names[i]] = a[i];
    j["reward"] = rw;
  }
  return j;
}

inline TraceHeader header_from_json(const nlohmann::json& j) {
  TraceHeader h;
  h.seed = j.at("seed").get<std::uint64_t>();
  h.rta_enabled = j.at("rta").get<bool>();
  h.policy = j.at("policy").get<std::string>();
  h.inner_period = j.at("inner_period").get<double>();
  h.policy_period = j.at("policy_period").get<double>();
  h.mass = j.at("mass").get<double>();
  h.num_points = j.at("num_points").get<std::size_t>();
  h.initial = detail::json_state(j.at("initial"));
  return h;
}

inline StepRecord step_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.t = j.at("t").get<double>();
  r.state = detail::json_state(j.at("state"));
  r.u_des = detail::json_control(j.at("u_des"));
  r.u_act = detail::json_control(j.at("u_act"));
  r.h = detail::json_per_constraint(j.at("h"));
  r.raw = detail::json_per_constraint(j.at("raw"));
  r.bc = detail::json_per_constraint(j.at("bc"));
  r.slack = detail::json_per_constraint(j.at("slack"));
  for (const auto& k : j.at("enforced")) {
    const auto id = constraint_from_key(k.get<std::string>());
    if (!id) throw UnknownConstraint("trace: unknown constraint '" + k.get<std::string>() + "'");
    r.enforced[index_of(*id)] = true;
  }
  r.filtered = j.at("filtered").get<bool>();
  r.status = qp_status_from_string(j.at("status").get<std::string>());
  r.modified = j.at("modified").get<bool>();
  r.new_points = j.at("new_points").get<std::vector<int>>();
  r.inspected_weight = j.at("w_p").get<double>();
  r.termination = termination_from_string(j.at("termination").get<std::string>());
  if (j.contains("reward")) {
    std::array<double, kNumRewardTerms> a{};
    for (std::size_t i = 0; i < kNumRewardTerms; ++i) {
      a[i] = j.at("reward").at(RewardBreakdown::names[i]).get<double>();
    }
    r.reward = RewardBreakdown::from_array(a);
  }
  return r;
}

inline void write_trace(std::ostream& os, const EpisodeTrace& tr) {
  os << to_json(tr.header).dump() << '\n';
  for (const auto& r : tr.steps) os << to_json(r).dump() << '\n';
}

inline EpisodeTrace read_trace(std::istream& is) {
  EpisodeTrace tr;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        tr.header = header_from_json(j);
        have_header = true;
      } else if (type == "step") {
        tr.steps.push_back(step_from_json(j));
      } else {
        throw ConfigError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw ConfigError("trace has no header line");
  return tr;
}

// Columnar export for plotting; one row per simulated second.
inline void write_trace_csv(std::ostream& os, const EpisodeTrace& tr) {
  os << "t,px,py,pz,vx,vy,vz,q1,q2,q3,q4,wx,wy,wz,T,E,theta_s,"
        "Fx_des,Fy_des,Fz_des,tx_des,ty_des,tz_des,Fx,Fy,Fz,tx,ty,tz,w_p,modified";
  for (ConstraintId id : kAllConstraints) os << ",h_" << constraint_key(id);
  for (ConstraintId id : kAllConstraints) os << ",raw_" << constraint_key(id);
  os << ",termination\n";
  os.precision(17);
  for (const auto& r : tr.steps) {
    const auto& s = r.state;
    os << r.t;
    for (double x : {s.p[0], s.p[1], s.p[2], s.v[0], s.v[1], s.v[2], s.q.v[0], s.q.v[1],
                     s.q.v[2], s.q.s, s.omega[0], s.omega[1], s.omega[2], s.temp_c,
                     s.energy_kj, s.theta_sun}) {
      os << ',' << x;
    }
    for (const auto* u : {&r.u_des, &r.u_act}) {
      for (int k = 0; k < 3; ++k) os << ',' << u->force[k];
      for (int k = 0; k < 3; ++k) os << ',' << u->torque[k];
    }
    os << ',' << r.inspected_weight << ',' << (r.modified ? 1 : 0);
    for (double x : r.h) os << ',' << x;
    for (double x : r.raw) os << ',' << x;
    os << ',' << to_string(r.termination) << '\n';
  }
}

}  // namespace rta
