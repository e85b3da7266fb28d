#pragma once

// Sun direction, single-node thermal model and battery energy model.
//
// Temperatures passed to the flux functions are absolute (K). The simulator
// state carries the component temperature in degrees Celsius and converts at
// the call site.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rta {

using Vec3 = Eigen::Vector3d;

inline constexpr double kCelsiusToKelvin = 273.15;

struct ThermalNodeParams {
  double node_mass = 2.0;            // kg
  double area = 0.03;                // m^2 (300 cm^2)
  double specific_heat = 900.0;      // J/(kg K)
  double absorptivity = 0.13;
  double emissivity = 0.06;
  double albedo_factor = 0.27;
  double solar_constant = 1367.0;    // W/m^2
  double stefan_boltzmann = 5.67051e-8;
  double earth_temperature = 255.0;  // K
  double view_factor_scale = 0.8;    // F = 0.8 cos(theta_EI)
  Vec3 normal_body{0.0, -1.0, 0.0};
};

// P_I carries W/m^2 so that P_I * I_d * A is a power in W.
struct PowerParams {
  double ideal_performance = 983.3;  // W/m^2
  double inherent_degradation = 0.77;
  double panel_area = 0.03;          // m^2
  double power_out = 15.0;           // W
  Vec3 panel_normal_body{1.0, 0.0, 0.0};

  double peak_power() const {
    return ideal_performance * inherent_degradation * panel_area;
  }
};

// Earth direction in Hill's frame is fixed along -x.
inline const Vec3& earth_vector() {
  static const Vec3 e{-1.0, 0.0, 0.0};
  return e;
}

inline Vec3 sun_vector(double theta_sun) {
  return {std::cos(theta_sun), std::sin(theta_sun), 0.0};
}

inline double incidence_angle(const Vec3& n_hat, const Vec3& r_hat) {
  return std::acos(std::clamp(n_hat.dot(r_hat), -1.0, 1.0));
}

struct HeatFluxes {
  double solar = 0.0;
  double albedo = 0.0;
  double infrared = 0.0;
  double rejected = 0.0;

  double total() const { return solar + albedo + infrared - rejected; }
};

inline HeatFluxes heat_fluxes(const ThermalNodeParams& th, double temp_k,
                              const Vec3& n_hat_hill, const Vec3& r_sun) {
  HeatFluxes q;
  const double cos_sun = std::max(0.0, n_hat_hill.dot(r_sun));
  const double cos_earth = std::max(0.0, n_hat_hill.dot(earth_vector()));
  const double view = th.view_factor_scale * cos_earth;
  const double t_e2 = th.earth_temperature * th.earth_temperature;
  const double t2 = temp_k * temp_k;
  q.solar = th.absorptivity * th.area * th.solar_constant * cos_sun;
  q.albedo = th.absorptivity * th.area * th.solar_constant * th.albedo_factor * view;
  q.infrared = th.stefan_boltzmann * th.emissivity * th.area * view * t_e2 * t_e2;
  q.rejected = th.stefan_boltzmann * th.emissivity * th.area * t2 * t2;
  return q;
}

inline double heat_total(const ThermalNodeParams& th, double temp_k,
                         const Vec3& n_hat_hill, const Vec3& r_sun) {
  return heat_fluxes(th, temp_k, n_hat_hill, r_sun).total();
}

// K/s (identical to degC/s).
inline double temperature_deriv(const ThermalNodeParams& th, double temp_k,
                                const Vec3& n_hat_hill, const Vec3& r_sun) {
  return heat_total(th, temp_k, n_hat_hill, r_sun) /
         (th.node_mass * th.specific_heat);
}

// Equilibrium temperature for a node at normal solar incidence with no Earth
// flux: the root of alpha*S = sigma*eps*T^4.
inline double full_sun_equilibrium_temperature(const ThermalNodeParams& th) {
  return std::pow(th.absorptivity * th.solar_constant /
                      (th.stefan_boltzmann * th.emissivity),
                  0.25);
}

// Battery energy rate in kJ/s from the cosine of the panel incidence angle.
// Panels produce nothing when facing away from the Sun.
inline double energy_deriv_from_cos(const PowerParams& pw, double cos_incidence) {
  return (pw.peak_power() * std::max(0.0, cos_incidence) - pw.power_out) / 1000.0;
}

inline double energy_deriv(const PowerParams& pw, double theta_si) {
  return energy_deriv_from_cos(pw, std::cos(theta_si));
}

// Incidence angle at which generated power equals the constant load.
inline double break_even_incidence(const PowerParams& pw) {
  return std::acos(pw.power_out / pw.peak_power());
}

}  // namespace rta
