#pragma once

// Safety constraints for the inspection deputy as control barrier functions.
//
// Every constraint exposes its value h(x), the raw safety margin it protects,
// and a barrier row: the control-affine inequality grad_u . u + affine >= 0.
// Relative-degree-one constraints produce h_dot + alpha(h); the attitude
// driven constraints (exclusion zone, temperature, battery) are lifted once,
// Psi_1 = h_dot + alpha_1(h), and produce Psi_1_dot + alpha_2(Psi_1).
//
// The control vector is u = [F (body, N); tau (body, N m)].

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rta/errors.hpp"
#include "rta/quat_dyn.hpp"
#include "rta/thermal_power.hpp"

namespace rta {

enum class ConstraintId : int {
  Collision = 0,
  Speed,
  KIZ,
  PSM,
  VxLim,
  VyLim,
  VzLim,
  AttEZ,
  Temp,
  Batt,
  W1Lim,
  W2Lim,
  W3Lim,
};

inline constexpr int kNumConstraints = 13;

inline constexpr std::array<ConstraintId, kNumConstraints> kAllConstraints = {
    ConstraintId::Collision, ConstraintId::Speed, ConstraintId::KIZ,
    ConstraintId::PSM,       ConstraintId::VxLim, ConstraintId::VyLim,
    ConstraintId::VzLim,     ConstraintId::AttEZ, ConstraintId::Temp,
    ConstraintId::Batt,      ConstraintId::W1Lim, ConstraintId::W2Lim,
    ConstraintId::W3Lim};

inline constexpr int index_of(ConstraintId id) { return static_cast<int>(id); }

inline std::string_view constraint_key(ConstraintId id) {
  static constexpr std::array<std::string_view, kNumConstraints> keys = {
      "collision", "speed",  "kiz",  "psm",  "vx_limit", "vy_limit", "vz_limit",
      "attitude_ez", "temperature", "battery", "w1_limit", "w2_limit", "w3_limit"};
  const int i = index_of(id);
  if (i < 0 || i >= kNumConstraints) throw UnknownConstraint("constraint id out of range");
  return keys[static_cast<std::size_t>(i)];
}

// Row labels in the order of the violation table.
inline std::string_view constraint_label(ConstraintId id) {
  static constexpr std::array<std::string_view, kNumConstraints> labels = {
      "Safe separation", "Dynamic speed", "Keep in zone", "PSM",
      "x-dot limit",     "y-dot limit",   "z-dot limit",  "Attitude exclusion",
      "Temperature",     "Power",         "omega_x limit", "omega_y limit",
      "omega_z limit"};
  const int i = index_of(id);
  if (i < 0 || i >= kNumConstraints) throw UnknownConstraint("constraint id out of range");
  return labels[static_cast<std::size_t>(i)];
}

inline std::optional<ConstraintId> constraint_from_key(std::string_view key) {
  for (ConstraintId id : kAllConstraints) {
    if (constraint_key(id) == key) return id;
  }
  return std::nullopt;
}

// alpha(h) = c1 h + c3 h^3, strictly increasing with alpha(0) = 0.
struct Strengthening {
  double c1 = 0.0;
  double c3 = 0.0;

  void validate() const {
    if (!(c1 >= 0.0) || !(c3 >= 0.0) || (c1 == 0.0 && c3 == 0.0) ||
        !std::isfinite(c1) || !std::isfinite(c3)) {
      throw InvalidCoefficients("strengthening needs c1, c3 >= 0, not both zero");
    }
  }
  double operator()(double h) const { return c1 * h + c3 * h * h * h; }
  double slope(double h) const { return c1 + 3.0 * c3 * h * h; }
};

inline double strengthening(const Strengthening& a, double h) {
  a.validate();
  return a(h);
}

struct ConstraintParams {
  double r_deputy = 5.0;          // m
  double r_chief = 10.0;          // m
  std::optional<double> a_max;    // m/s^2; derived from limits when empty
  double nu0 = 0.2;               // m/s
  double nu1_per_mean_motion = 7.5;  // nu1 = 7.5 n
  double r_max = 800.0;           // m
  double psm_horizon = 500.0;     // s
  double psm_step = 1.0;          // s
  double v_max = 5.0;             // m/s
  Vec3 boresight_body{1.0, 0.0, 0.0};
  double fov = 60.0 * std::numbers::pi / 180.0;
  double ez_buffer = 10.0 * std::numbers::pi / 180.0;
  double temp_max = 10.0;         // degC
  double delta0 = 0.05;           // degC per rad
  double delta1 = 0.01;           // degC per rad
  double energy_min = 1.0;        // kJ
  double delta2 = 0.05;           // kJ per rad
  double omega_max = 2.0 * std::numbers::pi / 180.0;  // rad/s

  double collision_radius() const { return r_deputy + r_chief; }
};

struct ConstraintSpec {
  ConstraintId id = ConstraintId::Collision;
  int relative_degree = 1;
  std::vector<Strengthening> alpha;    // one per lifting level
  std::optional<double> slack_weight;  // empty => hard constraint

  void validate() const {
    if (relative_degree < 1 || relative_degree > 2) {
      throw InvalidCoefficients(std::string(constraint_key(id)) +
                                ": relative degree must be 1 or 2");
    }
    if (alpha.size() != static_cast<std::size_t>(relative_degree)) {
      throw InvalidCoefficients(std::string(constraint_key(id)) +
                                ": one strengthening function per level required");
    }
    for (const auto& a : alpha) a.validate();
    if (slack_weight && !(*slack_weight > 0.0)) {
      throw InvalidCoefficients(std::string(constraint_key(id)) +
                                ": slack weight must be positive");
    }
    if (id == ConstraintId::Collision && slack_weight) {
      throw InvalidCoefficients("safe separation is a hard constraint");
    }
  }
};

inline int natural_relative_degree(ConstraintId id) {
  switch (id) {
    case ConstraintId::AttEZ:
    case ConstraintId::Temp:
    case ConstraintId::Batt:
      return 2;
    default:
      return 1;
  }
}

inline constexpr double kDefaultSlackWeight = 1e12;

inline std::vector<ConstraintSpec> default_specs() {
  std::vector<ConstraintSpec> specs;
  for (ConstraintId id : kAllConstraints) {
    ConstraintSpec s;
    s.id = id;
    s.relative_degree = natural_relative_degree(id);
    switch (id) {
      case ConstraintId::Collision:
      case ConstraintId::Speed:
      case ConstraintId::KIZ:
      case ConstraintId::PSM:
        s.alpha = {{0.05, 0.001}};
        break;
      case ConstraintId::VxLim:
      case ConstraintId::VyLim:
      case ConstraintId::VzLim:
      case ConstraintId::W1Lim:
      case ConstraintId::W2Lim:
      case ConstraintId::W3Lim:
        s.alpha = {{1.0, 0.0}};
        break;
      case ConstraintId::AttEZ:
        s.alpha = {{0.1, 0.0}, {0.4, 0.0}};
        break;
      case ConstraintId::Temp:
        s.alpha = {{0.01, 0.0}, {0.3, 0.0}};
        break;
      case ConstraintId::Batt:
        s.alpha = {{0.01, 0.0}, {0.3, 0.0}};
        break;
    }
    if (id != ConstraintId::Collision) s.slack_weight = kDefaultSlackWeight;
    specs.push_back(s);
  }
  return specs;
}

// Linear-in-u barrier condition grad_u . u + affine >= 0.
struct BarrierRow {
  Vec6 grad_u = Vec6::Zero();
  double affine = 0.0;
  double h_value = 0.0;
  double psi_value = 0.0;  // Psi_{r-1}: equals h for relative degree one

  double bc(const Vec6& u) const { return grad_u.dot(u) + affine; }
  bool degenerate() const { return !(grad_u.cwiseAbs().maxCoeff() > 0.0); }
};

// Closed-form Clohessy-Wiltshire free-flight position.
inline Vec3 fft_position(double n, const Vec3& p0, const Vec3& v0, double t) {
  const double c = std::cos(n * t);
  const double s = std::sin(n * t);
  const double nt = n * t;
  return {(4.0 - 3.0 * c) * p0[0] + s / n * v0[0] + 2.0 / n * (1.0 - c) * v0[1],
          6.0 * (s - nt) * p0[0] + p0[1] - 2.0 / n * (1.0 - c) * v0[0] +
              (4.0 * s - 3.0 * nt) / n * v0[1],
          c * p0[2] + s / n * v0[2]};
}

// Position rows of the CW state-transition matrix, [Phi_rr | Phi_rv].
inline Eigen::Matrix<double, 3, 6> fft_position_stm(double n, double t) {
  const double c = std::cos(n * t);
  const double s = std::sin(n * t);
  const double nt = n * t;
  Eigen::Matrix<double, 3, 6> phi;
  phi << 4.0 - 3.0 * c, 0.0, 0.0, s / n, 2.0 / n * (1.0 - c), 0.0,
         6.0 * (s - nt), 1.0, 0.0, -2.0 / n * (1.0 - c), (4.0 * s - 3.0 * nt) / n, 0.0,
         0.0, 0.0, c, 0.0, 0.0, s / n;
  return phi;
}

struct PsmResult {
  double h = 0.0;
  double t_star = 0.0;
  Vec3 p_star = Vec3::Zero();
};

// One constraint evaluated at a state: value, raw margin and (when the row is
// enforceable) the barrier row.
struct ConstraintEval {
  ConstraintId id = ConstraintId::Collision;
  double h = 0.0;
  double raw = 0.0;
  BarrierRow row;
};

class CbfModel {
 public:
  CbfModel() : CbfModel(PlantParams{}, ConstraintParams{}) {}

  CbfModel(PlantParams plant, ConstraintParams params)
      : plant_(std::move(plant)), params_(std::move(params)) {
    const auto& vp = plant_.vehicle;
    if (params_.a_max) {
      a_max_ = *params_.a_max;
    } else {
      const double n = vp.mean_motion;
      a_max_ = vp.thrust_max / vp.mass -
               (3.0 * n * n * params_.r_max + 2.0 * n * params_.v_max);
    }
    if (!(a_max_ > 0.0)) {
      throw InvalidCoefficients("a_max must be positive; thrust cannot overcome drift");
    }
    build_psm_table();
  }

  const PlantParams& plant() const { return plant_; }
  const ConstraintParams& params() const { return params_; }
  double a_max() const { return a_max_; }
  double nu1() const { return params_.nu1_per_mean_motion * plant_.vehicle.mean_motion; }

  // Minimum over a uniform grid of the free-flight distance minus the
  // collision radius. Ties resolve to the earliest time.
  PsmResult psm(const SimState& s, double horizon, double step) const {
    const double n = plant_.vehicle.mean_motion;
    PsmResult best;
    best.h = std::numeric_limits<double>::infinity();
    const auto count = static_cast<long>(std::floor(horizon / step + 1e-9));
    const bool cached = horizon == params_.psm_horizon && step == params_.psm_step;
    for (long k = 0; k <= count; ++k) {
      const double t = static_cast<double>(k) * step;
      double c, sn;
      if (cached) {
        c = psm_cos_[static_cast<std::size_t>(k)];
        sn = psm_sin_[static_cast<std::size_t>(k)];
      } else {
        c = std::cos(n * t);
        sn = std::sin(n * t);
      }
      const double nt = n * t;
      const Vec3 pt((4.0 - 3.0 * c) * s.p[0] + sn / n * s.v[0] + 2.0 / n * (1.0 - c) * s.v[1],
                    6.0 * (sn - nt) * s.p[0] + s.p[1] - 2.0 / n * (1.0 - c) * s.v[0] +
                        (4.0 * sn - 3.0 * nt) / n * s.v[1],
                    c * s.p[2] + sn / n * s.v[2]);
      const double d = pt.norm();
      if (d < best.h) {
        best.h = d;
        best.t_star = t;
        best.p_star = pt;
      }
    }
    best.h -= params_.collision_radius();
    return best;
  }

  PsmResult psm_h(const SimState& s) const {
    return psm(s, params_.psm_horizon, params_.psm_step);
  }

  double eval_h(ConstraintId id, const SimState& s) const { return evaluate(id, s, false).h; }

  // The safety property each constraint protects, before any relative-degree
  // transformation. Negative means the property is violated.
  double raw_margin(ConstraintId id, const SimState& s) const {
    switch (id) {
      case ConstraintId::Collision:
        return s.p.norm() - params_.collision_radius();
      case ConstraintId::KIZ:
        return params_.r_max - s.p.norm();
      case ConstraintId::Temp:
        return params_.temp_max - s.temp_c;
      case ConstraintId::Batt:
        return s.energy_kj - params_.energy_min;
      default:
        return eval_h(id, s);
    }
  }

  // Barrier row for one constraint. A row with no control authority is
  // returned as-is when it already holds (affine >= 0); otherwise the
  // condition cannot be influenced by u and DegenerateGradient is thrown.
  BarrierRow barrier_row(const ConstraintSpec& spec, const SimState& s) const {
    spec.validate();
    const Jet jet = evaluate(spec.id, s, spec.relative_degree >= 2);
    BarrierRow row = lift(jet, spec);
    if (row.degenerate() && row.affine < 0.0) {
      throw DegenerateGradient(std::string(constraint_key(spec.id)) +
                               ": zero control gradient with a violated condition");
    }
    return row;
  }

  // Evaluate several constraints sharing the per-state kinematics.
  std::vector<ConstraintEval> evaluate_all(const std::vector<ConstraintSpec>& specs,
                                           const SimState& s) const {
    const Kinematics k = kinematics(s);
    std::vector<ConstraintEval> out;
    out.reserve(specs.size());
    for (const auto& spec : specs) {
      const Jet jet = evaluate(spec.id, s, k, spec.relative_degree >= 2);
      ConstraintEval e;
      e.id = spec.id;
      e.h = jet.h;
      e.raw = raw_margin(spec.id, s, jet.h);
      e.row = lift(jet, spec);
      out.push_back(e);
    }
    return out;
  }

 private:
  // Time derivatives of h along the dynamics split into drift and
  // control-coefficient parts.
  struct Jet {
    double h = 0.0;
    double hdot0 = 0.0;
    Vec6 hdot_u = Vec6::Zero();
    double hddot0 = 0.0;
    Vec6 hddot_u = Vec6::Zero();
  };

  struct Kinematics {
    Mat3 R;             // body -> Hill
    Vec3 accel0;        // CW drift acceleration
    Mat3 thrust_map;    // R / m
    Vec3 omega_dot0;    // gyroscopic part of w_dot
    Vec3 inertia_inv;
    Vec3 sun, sun_dot, sun_ddot;
  };

  struct AngleJet {
    double c = 0.0;
    double theta = 0.0;
    double cdot = 0.0;
    double theta_dot = 0.0;
    double theta_ddot0 = 0.0;
    Vec3 theta_ddot_tau = Vec3::Zero();
  };

  Kinematics kinematics(const SimState& s) const {
    const auto& vp = plant_.vehicle;
    const double n = vp.mean_motion;
    Kinematics k;
    k.R = rotation_matrix(s.q);
    k.accel0 = cw_drift_accel(n, s.p, s.v);
    k.thrust_map = k.R / vp.mass;
    k.inertia_inv = vp.inertia.cwiseInverse();
    k.omega_dot0 = attitude_deriv(vp, s, Vec3::Zero()).omega_dot;
    const double th_dot = -n;
    k.sun = sun_vector(s.theta_sun);
    k.sun_dot = th_dot * Vec3(-std::sin(s.theta_sun), std::cos(s.theta_sun), 0.0);
    k.sun_ddot = -th_dot * th_dot * k.sun;
    return k;
  }

  // Angle between the Hill image of body vector b and direction e(t), with
  // its first two time derivatives.
  static AngleJet angle_jet(const Kinematics& k, const Vec3& omega, const Vec3& b,
                            const Vec3& e, const Vec3& e_dot, const Vec3& e_ddot) {
    const Vec3 wb = omega.cross(b);
    const Vec3 d = k.R * b;
    const Vec3 d_dot = k.R * wb;
    const Vec3 d_ddot0 = k.R * (omega.cross(wb) + k.omega_dot0.cross(b));
    AngleJet a;
    a.c = d.dot(e);
    a.cdot = d_dot.dot(e) + d.dot(e_dot);
    const double cddot0 = d_ddot0.dot(e) + 2.0 * d_dot.dot(e_dot) + d.dot(e_ddot);
    const Vec3 cddot_tau = k.inertia_inv.cwiseProduct(b.cross(k.R.transpose() * e));
    a.theta = std::acos(std::clamp(a.c, -1.0, 1.0));
    // At exact (anti-)alignment the angle is not differentiable; report it as
    // stationary with no control authority.
    const double sin_sq = 1.0 - a.c * a.c;
    if (!(sin_sq > 1e-18)) return a;
    const double sigma = std::sqrt(sin_sq);
    a.theta_dot = -a.cdot / sigma;
    a.theta_ddot0 = -cddot0 / sigma - a.c * a.cdot * a.cdot / (sigma * sigma * sigma);
    a.theta_ddot_tau = -cddot_tau / sigma;
    return a;
  }

  Jet evaluate(ConstraintId id, const SimState& s, bool second_order) const {
    return evaluate(id, s, kinematics(s), second_order);
  }

  double raw_margin(ConstraintId id, const SimState& s, double h) const {
    switch (id) {
      case ConstraintId::Collision:
      case ConstraintId::KIZ:
      case ConstraintId::Temp:
      case ConstraintId::Batt:
        return raw_margin(id, s);
      default:
        return h;
    }
  }

  Jet evaluate(ConstraintId id, const SimState& s, const Kinematics& k,
               bool second_order) const {
    const auto& cp = params_;
    Jet j;
    auto set_thrust = [&](Vec6& dst, const Vec3& accel_coeff) {
      dst.head<3>() = k.thrust_map.transpose() * accel_coeff;
    };
    switch (id) {
      case ConstraintId::Collision:
      case ConstraintId::KIZ: {
        const double r = s.p.norm();
        const Vec3 p_hat = s.p / r;
        const double v_r = p_hat.dot(s.v);
        const double tangential = (s.v.squaredNorm() - v_r * v_r) / r;
        const double sign = id == ConstraintId::Collision ? 1.0 : -1.0;
        const double gap = id == ConstraintId::Collision ? r - cp.collision_radius()
                                                          : cp.r_max - r;
        const double radicand = 2.0 * a_max_ * gap;
        const double root = radicand > 0.0 ? std::sqrt(radicand) : 0.0;
        j.h = root + sign * v_r;
        // d/dt sqrt(2 a gap) = a gap_dot / root, gap_dot = sign * v_r.
        const double root_dot = radicand > 0.0 ? a_max_ * sign * v_r / root : 0.0;
        j.hdot0 = root_dot + sign * (tangential + p_hat.dot(k.accel0));
        set_thrust(j.hdot_u, sign * p_hat);
        break;
      }
      case ConstraintId::Speed: {
        const double r = s.p.norm();
        const double speed = s.v.norm();
        j.h = cp.nu0 + nu1() * r - speed;
        const double v_r = s.p.dot(s.v) / r;
        if (speed > 0.0) {
          const Vec3 v_hat = s.v / speed;
          j.hdot0 = nu1() * v_r - v_hat.dot(k.accel0);
          set_thrust(j.hdot_u, -v_hat);
        } else {
          j.hdot0 = nu1() * v_r;
        }
        break;
      }
      case ConstraintId::PSM: {
        const PsmResult r = psm_h(s);
        j.h = r.h;
        const double dist = r.p_star.norm();
        if (dist > 0.0) {
          const Vec3 dir = r.p_star / dist;
          const auto phi = fft_position_stm(plant_.vehicle.mean_motion, r.t_star);
          const Vec3 sens_v = phi.rightCols<3>().transpose() * dir;
          j.hdot0 = dir.dot(phi.leftCols<3>() * s.v) + sens_v.dot(k.accel0);
          set_thrust(j.hdot_u, sens_v);
        }
        break;
      }
      case ConstraintId::VxLim:
      case ConstraintId::VyLim:
      case ConstraintId::VzLim: {
        const int axis = index_of(id) - index_of(ConstraintId::VxLim);
        const double vi = s.v[axis];
        j.h = cp.v_max * cp.v_max - vi * vi;
        j.hdot0 = -2.0 * vi * k.accel0[axis];
        set_thrust(j.hdot_u, -2.0 * vi * Vec3::Unit(axis));
        break;
      }
      case ConstraintId::W1Lim:
      case ConstraintId::W2Lim:
      case ConstraintId::W3Lim: {
        const int axis = index_of(id) - index_of(ConstraintId::W1Lim);
        const double wi = s.omega[axis];
        j.h = cp.omega_max * cp.omega_max - wi * wi;
        j.hdot0 = -2.0 * wi * k.omega_dot0[axis];
        j.hdot_u[3 + axis] = -2.0 * wi * k.inertia_inv[axis];
        break;
      }
      case ConstraintId::AttEZ: {
        const AngleJet a = angle_jet(k, s.omega, cp.boresight_body, k.sun, k.sun_dot,
                                     k.sun_ddot);
        j.h = a.theta - 0.5 * cp.fov - cp.ez_buffer;
        j.hdot0 = a.theta_dot;
        if (second_order) {
          j.hddot0 = a.theta_ddot0;
          j.hddot_u.tail<3>() = a.theta_ddot_tau;
        }
        break;
      }
      case ConstraintId::Temp: {
        const auto& th = plant_.thermal;
        const Vec3 zero = Vec3::Zero();
        const AngleJet as = angle_jet(k, s.omega, th.normal_body, k.sun, k.sun_dot,
                                      k.sun_ddot);
        const AngleJet ae = angle_jet(k, s.omega, th.normal_body, earth_vector(), zero, zero);
        const double half_pi = 0.5 * std::numbers::pi;
        j.h = cp.temp_max - s.temp_c - cp.delta0 * (half_pi - as.theta) -
              cp.delta1 * (half_pi - ae.theta);
        const double temp_k = s.temp_c + kCelsiusToKelvin;
        const double heat_cap = th.node_mass * th.specific_heat;
        const double solar_gain = th.absorptivity * th.area * th.solar_constant;
        const double earth_gain =
            th.view_factor_scale *
            (solar_gain * th.albedo_factor +
             th.stefan_boltzmann * th.emissivity * th.area * std::pow(th.earth_temperature, 4));
        const double q_total = solar_gain * std::max(0.0, as.c) +
                               earth_gain * std::max(0.0, ae.c) -
                               th.stefan_boltzmann * th.emissivity * th.area *
                                   std::pow(temp_k, 4);
        const double t_dot = q_total / heat_cap;
        j.hdot0 = -t_dot + cp.delta0 * as.theta_dot + cp.delta1 * ae.theta_dot;
        if (second_order) {
          const double t_ddot =
              ((as.c > 0.0 ? solar_gain * as.cdot : 0.0) +
               (ae.c > 0.0 ? earth_gain * ae.cdot : 0.0) -
               4.0 * th.stefan_boltzmann * th.emissivity * th.area * std::pow(temp_k, 3) *
                   t_dot) /
              heat_cap;
          j.hddot0 = -t_ddot + cp.delta0 * as.theta_ddot0 + cp.delta1 * ae.theta_ddot0;
          j.hddot_u.tail<3>() =
              cp.delta0 * as.theta_ddot_tau + cp.delta1 * ae.theta_ddot_tau;
        }
        break;
      }
      case ConstraintId::Batt: {
        const auto& pw = plant_.power;
        const AngleJet a = angle_jet(k, s.omega, pw.panel_normal_body, k.sun, k.sun_dot,
                                     k.sun_ddot);
        j.h = s.energy_kj - cp.energy_min - cp.delta2 * a.theta;
        const double e_dot = energy_deriv_from_cos(pw, a.c);
        j.hdot0 = e_dot - cp.delta2 * a.theta_dot;
        if (second_order) {
          const double e_ddot = a.c > 0.0 ? pw.peak_power() * a.cdot / 1000.0 : 0.0;
          j.hddot0 = e_ddot - cp.delta2 * a.theta_ddot0;
          j.hddot_u.tail<3>() = -cp.delta2 * a.theta_ddot_tau;
        }
        break;
      }
      default:
        throw UnknownConstraint("unknown constraint id " + std::to_string(index_of(id)));
    }
    return j;
  }

  static BarrierRow lift(const Jet& j, const ConstraintSpec& spec) {
    BarrierRow row;
    row.h_value = j.h;
    if (spec.relative_degree == 1) {
      row.psi_value = j.h;
      row.grad_u = j.hdot_u;
      row.affine = j.hdot0 + spec.alpha[0](j.h);
    } else {
      const double psi1 = j.hdot0 + spec.alpha[0](j.h);
      row.psi_value = psi1;
      row.grad_u = j.hddot_u;
      row.affine = j.hddot0 + spec.alpha[0].slope(j.h) * j.hdot0 + spec.alpha[1](psi1);
    }
    return row;
  }

  void build_psm_table() {
    const double n = plant_.vehicle.mean_motion;
    const auto count =
        static_cast<long>(std::floor(params_.psm_horizon / params_.psm_step + 1e-9));
    psm_cos_.resize(static_cast<std::size_t>(count + 1));
    psm_sin_.resize(static_cast<std::size_t>(count + 1));
    for (long k = 0; k <= count; ++k) {
      const double t = static_cast<double>(k) * params_.psm_step;
      psm_cos_[static_cast<std::size_t>(k)] = std::cos(n * t);
      psm_sin_[static_cast<std::size_t>(k)] = std::sin(n * t);
    }
  }

  PlantParams plant_;
  ConstraintParams params_;
  double a_max_ = 0.0;
  std::vector<double> psm_cos_;
  std::vector<double> psm_sin_;
};

}  // namespace rta
