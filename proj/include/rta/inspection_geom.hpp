#pragma once

// Inspection points on the chief's sphere: lattice generation, priority
// weights, visibility and illumination predicates, and inspected-weight
// bookkeeping.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "rta/errors.hpp"
#include "rta/quat_dyn.hpp"

namespace rta {

struct SensorParams {
  Vec3 boresight_body{1.0, 0.0, 0.0};
  double fov = 60.0 * std::numbers::pi / 180.0;  // full cone angle, rad

  void validate() const {
    if (!(fov > 0.0 && fov < std::numbers::pi)) {
      throw ConfigError("sensor fov must lie in (0, 180) deg");
    }
    if (!(boresight_body.norm() > 0.0)) throw ConfigError("sensor boresight must be non-zero");
  }
};

struct PointSet {
  std::vector<Vec3> positions;  // Hill frame, m
  std::vector<double> weights;
  std::vector<bool> inspected;
  Vec3 priority = Vec3::UnitX();
  double radius = 10.0;

  std::size_t size() const { return positions.size(); }

  double inspected_weight() const {
    double w = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (inspected[i]) w += weights[i];
    }
    return w;
  }

  std::size_t inspected_count() const {
    std::size_t c = 0;
    for (bool b : inspected) c += b ? 1 : 0;
    return c;
  }
};

// Uniformly distributed rotation drawn from the seed (Shoemake's method).
inline Quaternion random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double two_pi = 2.0 * std::numbers::pi;
  return {a * std::sin(two_pi * u2), a * std::cos(two_pi * u2), b * std::sin(two_pi * u3),
          b * std::cos(two_pi * u3)};
}

// Weights proportional to pi minus the angle from the priority direction,
// normalized to sum to one.
inline std::vector<double> priority_weights(const std::vector<Vec3>& positions,
                                            const Vec3& priority) {
  const Vec3 pr = priority.normalized();
  std::vector<double> w(positions.size());
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double c = std::clamp(positions[i].normalized().dot(pr), -1.0, 1.0);
    w[i] = std::numbers::pi - std::acos(c);
    total += w[i];
  }
  // A lone point opposite the priority direction still carries all weight.
  if (!(total > 0.0)) {
    for (double& x : w) x = 1.0 / static_cast<double>(w.size());
    return w;
  }
  for (double& x : w) x /= total;
  return w;
}

// Fibonacci lattice on the sphere, rotated by a seed-derived rotation.
inline PointSet generate_points(std::size_t n, double radius, const Vec3& priority,
                                std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate_points: need at least one point");
  if (!(radius > 0.0)) throw ConfigError("generate_points: radius must be positive");
  if (!(priority.norm() > 0.0)) throw ConfigError("generate_points: priority must be non-zero");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const Quaternion rot = random_rotation(seed);
  PointSet ps;
  ps.radius = radius;
  ps.priority = priority.normalized();
  ps.positions.reserve(n);
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / nd;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
    ps.positions.push_back(radius * quat_rotate(rot, dir).normalized());
  }
  ps.weights = priority_weights(ps.positions, ps.priority);
  ps.inspected.assign(n, false);
  return ps;
}

// Inside the sensor cone and on the near side of the sphere. Both tests are
// strict.
inline bool visible(const Vec3& point, const Vec3& deputy_p, const Quaternion& q,
                    const SensorParams& sensor) {
  const Vec3 bore = quat_rotate(q, sensor.boresight_body).normalized();
  const Vec3 los = point - deputy_p;
  const double dist = los.norm();
  if (!(dist > 0.0)) return false;
  const bool in_fov = bore.dot(los) / dist > std::cos(0.5 * sensor.fov);
  const bool near_side = (deputy_p - point).dot(point) > 0.0;
  return in_fov && near_side;
}

inline bool illuminated(const Vec3& point, const Vec3& r_sun) {
  return point.normalized().dot(r_sun) > 0.0;
}

struct InspectionUpdate {
  double new_weight = 0.0;
  int count = 0;
  std::vector<int> indices;
};

inline InspectionUpdate update_inspected(PointSet& ps, const Vec3& deputy_p, const Quaternion& q,
                                         const Vec3& r_sun, const SensorParams& sensor) {
  InspectionUpdate up;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps.inspected[i]) continue;
    const Vec3& pt = ps.positions[i];
    if (illuminated(pt, r_sun) && visible(pt, deputy_p, q, sensor)) {
      ps.inspected[i] = true;
      up.new_weight += ps.weights[i];
      ++up.count;
      up.indices.push_back(static_cast<int>(i));
    }
  }
  return up;
}

}  // namespace rta
