#pragma once

// Quaternion algebra, 6-DoF deputy equations of motion and the fixed-step
// RK4 integrator.
//
// Quaternions are stored scalar-last, [q1, q2, q3, q4], and multiplied with
// the Hamilton product. The attitude quaternion q carries Hill's frame onto
// the body frame, so a body-fixed vector b has Hill coordinates
// quat_rotate(q, b) = q (x) b (x) q*, and a Hill vector p has body coordinates
// quat_rotate(conj(q), p). With this pairing the kinematics
// q_dot = 1/2 Xi(q) w, with w in body axes, are exact: d/dt R(q) = R(q) [w x].

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>

#include "rta/errors.hpp"
#include "rta/thermal_power.hpp"

namespace rta {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct Quaternion {
  Vec3 v = Vec3::Zero();  // q1, q2, q3
  double s = 1.0;         // q4

  Quaternion() = default;
  Quaternion(double q1, double q2, double q3, double q4) : v(q1, q2, q3), s(q4) {}
  Quaternion(const Vec3& vec, double scalar) : v(vec), s(scalar) {}
  explicit Quaternion(const Vec4& c) : v(c.head<3>()), s(c[3]) {}

  static Quaternion identity() { return {}; }

  static Quaternion from_axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    return {a * std::sin(0.5 * angle), std::cos(0.5 * angle)};
  }

  Vec4 coeffs() const { return {v[0], v[1], v[2], s}; }
  double norm() const { return std::sqrt(v.squaredNorm() + s * s); }
  Quaternion normalized() const {
    const double k = 1.0 / norm();
    return {v * k, s * k};
  }
  Quaternion conjugate() const { return {-v, s}; }
  Quaternion operator-() const { return {-v, -s}; }
};

// Hamilton product a (x) b.
inline Quaternion hamilton(const Quaternion& a, const Quaternion& b) {
  return {a.s * b.v + b.s * a.v + a.v.cross(b.v), a.s * b.s - a.v.dot(b.v)};
}

inline Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return hamilton(a, b);
}

// Vector part of q (x) [p, 0] (x) q*. Expanded so it stays exact (scaled by
// |q|^2) for slightly non-unit q.
inline Vec3 quat_rotate(const Quaternion& q, const Vec3& p) {
  return (q.s * q.s - q.v.squaredNorm()) * p + 2.0 * q.v.dot(p) * q.v +
         2.0 * q.s * q.v.cross(p);
}

// Matrix form of quat_rotate: R(q) p == quat_rotate(q, p).
inline Mat3 rotation_matrix(const Quaternion& q) {
  Mat3 skew;
  skew << 0.0, -q.v[2], q.v[1],
          q.v[2], 0.0, -q.v[0],
          -q.v[1], q.v[0], 0.0;
  return (q.s * q.s - q.v.squaredNorm()) * Mat3::Identity() +
         2.0 * q.v * q.v.transpose() + 2.0 * q.s * skew;
}

// Xi(q), so that q_dot = 1/2 Xi(q) w.
inline Eigen::Matrix<double, 4, 3> xi_matrix(const Quaternion& q) {
  Eigen::Matrix<double, 4, 3> xi;
  const double q1 = q.v[0], q2 = q.v[1], q3 = q.v[2], q4 = q.s;
  xi << q4, -q3, q2,
        q3, q4, -q1,
        -q2, q1, q4,
        -q1, -q2, -q3;
  return xi;
}

struct VehicleParams {
  double mass = 12.0;              // kg
  double mean_motion = 0.001027;   // rad/s
  Vec3 inertia{0.0573, 0.0573, 0.0573};  // kg m^2, principal
  double wheel_inertia = 4.1e-5;   // kg m^2
  double thrust_max = 1.0;         // N
  double torque_max = 0.001;       // N m
  double omega_dot_max = 0.017453; // rad/s^2
  double psi_dot_max = 181.3;      // rad/s^2

  // min(J w_dot_max, D psi_dot_max) using the smallest principal inertia.
  double derived_torque_max() const {
    return std::min(inertia.minCoeff() * omega_dot_max, wheel_inertia * psi_dot_max);
  }
};

struct PlantParams {
  VehicleParams vehicle;
  ThermalNodeParams thermal;
  PowerParams power;
};

struct ControlInput {
  Vec3 force = Vec3::Zero();   // N, body frame
  Vec3 torque = Vec3::Zero();  // N m, body frame

  ControlInput() = default;
  ControlInput(const Vec3& f, const Vec3& t) : force(f), torque(t) {}
  static ControlInput from_vector(const Vec6& u) {
    return {u.head<3>(), u.tail<3>()};
  }
  Vec6 as_vector() const {
    Vec6 u;
    u << force, torque;
    return u;
  }
};

inline ControlInput clamp_control(const ControlInput& u, const VehicleParams& vp) {
  ControlInput c;
  c.force = u.force.cwiseMax(-vp.thrust_max).cwiseMin(vp.thrust_max);
  c.torque = u.torque.cwiseMax(-vp.torque_max).cwiseMin(vp.torque_max);
  return c;
}

inline bool within_bounds(const ControlInput& u, const VehicleParams& vp) {
  return (u.force.cwiseAbs().array() <= vp.thrust_max).all() &&
         (u.torque.cwiseAbs().array() <= vp.torque_max).all();
}

struct SimState {
  Vec3 p = Vec3::Zero();       // m, Hill
  Vec3 v = Vec3::Zero();       // m/s, Hill
  Quaternion q;                // rotates body vectors into Hill
  Vec3 omega = Vec3::Zero();   // rad/s, body
  double temp_c = 0.0;         // degC
  double energy_kj = 0.0;      // kJ
  double theta_sun = 0.0;      // rad, [0, 2 pi)
  double t = 0.0;              // s

  bool all_finite() const {
    return p.allFinite() && v.allFinite() && q.v.allFinite() && std::isfinite(q.s) &&
           omega.allFinite() && std::isfinite(temp_c) && std::isfinite(energy_kj) &&
           std::isfinite(theta_sun) && std::isfinite(t);
  }
};

// Dense layout used by the integrator: p(3) v(3) q(4) w(3) T E theta_S.
using StateVec = Eigen::Matrix<double, 16, 1>;

inline StateVec pack(const SimState& s) {
  StateVec x;
  x << s.p, s.v, s.q.coeffs(), s.omega, s.temp_c, s.energy_kj, s.theta_sun;
  return x;
}

inline SimState unpack(const StateVec& x, double t) {
  SimState s;
  s.p = x.segment<3>(0);
  s.v = x.segment<3>(3);
  s.q = Quaternion(Vec4(x.segment<4>(6)));
  s.omega = x.segment<3>(10);
  s.temp_c = x[13];
  s.energy_kj = x[14];
  s.theta_sun = x[15];
  s.t = t;
  return s;
}

inline double wrap_two_pi(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

struct AttitudeDeriv {
  Vec4 q_dot;
  Vec3 omega_dot;
};

inline AttitudeDeriv attitude_deriv(const VehicleParams& vp, const SimState& s,
                                    const Vec3& tau) {
  AttitudeDeriv d;
  d.q_dot = 0.5 * xi_matrix(s.q) * s.omega;
  const Vec3& J = vp.inertia;
  const Vec3& w = s.omega;
  d.omega_dot = Vec3((J[1] - J[2]) * w[1] * w[2] + tau[0],
                     (J[2] - J[0]) * w[0] * w[2] + tau[1],
                     (J[0] - J[1]) * w[0] * w[1] + tau[2])
                    .cwiseQuotient(J);
  return d;
}

// Clohessy-Wiltshire natural acceleration (no thrust).
inline Vec3 cw_drift_accel(double n, const Vec3& p, const Vec3& v) {
  return {3.0 * n * n * p[0] + 2.0 * n * v[1], -2.0 * n * v[0], -n * n * p[2]};
}

inline Vec3 translational_deriv(const VehicleParams& vp, const SimState& s,
                                const Vec3& force_body) {
  return cw_drift_accel(vp.mean_motion, s.p, s.v) +
         quat_rotate(s.q, force_body) / vp.mass;
}

inline StateVec state_deriv(const PlantParams& pp, const SimState& s,
                            const ControlInput& u) {
  StateVec dx;
  const AttitudeDeriv att = attitude_deriv(pp.vehicle, s, u.torque);
  const Vec3 r_sun = sun_vector(s.theta_sun);
  const Vec3 node_normal = quat_rotate(s.q, pp.thermal.normal_body);
  const Vec3 panel_normal = quat_rotate(s.q, pp.power.panel_normal_body);
  dx.segment<3>(0) = s.v;
  dx.segment<3>(3) = translational_deriv(pp.vehicle, s, u.force);
  dx.segment<4>(6) = att.q_dot;
  dx.segment<3>(10) = att.omega_dot;
  dx[13] = temperature_deriv(pp.thermal, s.temp_c + kCelsiusToKelvin, node_normal, r_sun);
  dx[14] = energy_deriv_from_cos(pp.power, panel_normal.dot(r_sun));
  dx[15] = -pp.vehicle.mean_motion;
  return dx;
}

// Classical RK4 with zero-order-hold control; the quaternion is renormalized
// and the Sun angle wrapped after the step.
inline SimState step_rk4(const PlantParams& pp, const SimState& s, const ControlInput& u,
                         double dt) {
  const StateVec x0 = pack(s);
  auto f = [&](const StateVec& x, double t) { return state_deriv(pp, unpack(x, t), u); };
  const StateVec k1 = f(x0, s.t);
  const StateVec k2 = f(x0 + 0.5 * dt * k1, s.t + 0.5 * dt);
  const StateVec k3 = f(x0 + 0.5 * dt * k2, s.t + 0.5 * dt);
  const StateVec k4 = f(x0 + dt * k3, s.t + dt);
  const StateVec x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  SimState out = unpack(x1, s.t + dt);
  out.q = out.q.normalized();
  out.theta_sun = wrap_two_pi(out.theta_sun);
  if (!out.all_finite()) {
    throw NonFiniteState("step_rk4 produced a non-finite state at t=" +
                         std::to_string(out.t));
  }
  return out;
}

}  // namespace rta
