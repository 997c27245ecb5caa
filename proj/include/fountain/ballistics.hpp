#pragma once

// Fountain kinematics: moving-molasses launch, flight under gravity,
// cavity transit timing, aperture survival and Monte Carlo cloud sampling.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fountain/errors.hpp"
#include "fountain/random.hpp"

namespace fountain::ballistics {

struct PhysicalConstants {
  static constexpr double g = 9.81;                 // m/s^2
  static constexpr double cs_mass = 2.207e-25;      // kg
  static constexpr double lambda_d2 = 852.35e-9;    // m
  static constexpr double hyperfine_hz = 9192631770.0;
  static constexpr double boltzmann = 1.380649e-23;  // J/K
};

struct LaunchConfig {
  double launch_speed = 0.0;         // m/s at the trap centre
  double cavity_height = 0.040;      // m above the trap centre
  double aperture_radius = 0.006;    // m, cavity hole
  double interaction_length = 0.010; // m, field region per pass
  double cloud_sigma_pos = 0.0;      // m, per axis
  double temperature = 3e-6;         // K
  std::size_t n_atoms = 1;
  double probe_radius = 0.003;       // m, detection beam

  void validate() const {
    if (!(cavity_height > 0.0)) throw std::invalid_argument("cavity_height must be > 0");
    if (!(aperture_radius > 0.0)) throw std::invalid_argument("aperture_radius must be > 0");
    if (!(interaction_length > 0.0)) {
      throw std::invalid_argument("interaction_length must be > 0");
    }
    if (!(probe_radius > 0.0)) throw std::invalid_argument("probe_radius must be > 0");
    if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
    if (!(cloud_sigma_pos >= 0.0)) throw std::invalid_argument("cloud_sigma_pos must be >= 0");
  }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct AtomSample {
  Vec3 position;
  Vec3 velocity;
  std::uint64_t id = 0;
};

struct TransitRecord {
  double t1 = 0.0;        // s, upward crossing of the cavity centre
  double tau = 0.0;       // s, time inside the field per pass
  double big_t = 0.0;     // s, between the two crossings (pulse midpoints)
  double v_cavity = 0.0;  // m/s, speed at the cavity on either pass
  bool survived_first = true;
  bool survived_second = true;
  bool survived_detection = true;

  bool survived() const { return survived_first && survived_second && survived_detection; }
};

/// Moving-molasses launch: each double-passed vertical beam is shifted by
/// +-2*delta, so the molasses frame moves at v = 2 * lambda * delta.
inline double launch_speed_from_aom_offset(double delta_hz) {
  if (!(delta_hz >= 0.0)) throw std::invalid_argument("AOM offset must be >= 0");
  return 2.0 * PhysicalConstants::lambda_d2 * delta_hz;
}

/// Trap launch speed that puts the apogee `height_above_cavity` above the
/// cavity centre.
inline double launch_speed_for_apogee(double height_above_cavity,
                                      double cavity_height = 0.040) {
  return std::sqrt(2.0 * PhysicalConstants::g * (cavity_height + height_above_cavity));
}

/// Apogee height above the cavity giving a crossing interval big_t.
inline double apogee_for_interval(double big_t) {
  const double half = 0.5 * big_t;
  return 0.5 * PhysicalConstants::g * half * half;
}

/// One-axis thermal velocity spread sqrt(kB T / m).
inline double thermal_velocity_sigma(double temperature) {
  return std::sqrt(PhysicalConstants::boltzmann * temperature / PhysicalConstants::cs_mass);
}

namespace detail {

inline TransitRecord transit_to(double v0, double height, double interaction_length) {
  if (!(v0 > 0.0)) throw FountainTooLow("launch speed must be positive");
  const double g = PhysicalConstants::g;
  const double v2 = v0 * v0 - 2.0 * g * height;
  if (!(v2 > 0.0)) {
    throw FountainTooLow("fountain too low: launch speed " + std::to_string(v0) +
                         " m/s does not reach the cavity");
  }
  TransitRecord r;
  r.v_cavity = std::sqrt(v2);
  r.big_t = 2.0 * r.v_cavity / g;
  r.tau = interaction_length / r.v_cavity;
  r.t1 = (v0 - r.v_cavity) / g;
  return r;
}

}  // namespace detail

/// Cavity timing for an atom launched from the trap centre at v0.
inline TransitRecord transit(double v0, const LaunchConfig& cfg) {
  cfg.validate();
  return detail::transit_to(v0, cfg.cavity_height, cfg.interaction_length);
}

/// Draws atom `index` of the cloud; independent of any other index.
inline AtomSample sample_atom(const LaunchConfig& cfg, std::uint64_t seed,
                              std::uint64_t index) {
  auto engine = make_engine(seed, streams::cloud, index);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double sv = thermal_velocity_sigma(cfg.temperature);
  const double sx = cfg.cloud_sigma_pos;
  AtomSample a;
  a.id = index;
  a.position = {sx * unit(engine), sx * unit(engine), sx * unit(engine)};
  a.velocity = {sv * unit(engine), sv * unit(engine), cfg.launch_speed + sv * unit(engine)};
  return a;
}

inline std::vector<AtomSample> sample_cloud(const LaunchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  std::vector<AtomSample> atoms;
  atoms.reserve(cfg.n_atoms);
  for (std::size_t i = 0; i < cfg.n_atoms; ++i) atoms.push_back(sample_atom(cfg, seed, i));
  return atoms;
}

/// Transit timing plus aperture checks: the cavity hole on both passes and
/// the probe beam when the atom falls back to the trap height.
inline TransitRecord survival(const AtomSample& atom, const LaunchConfig& cfg) {
  cfg.validate();
  const double height = cfg.cavity_height - atom.position.z;
  TransitRecord r = detail::transit_to(atom.velocity.z, height, cfg.interaction_length);

  auto radius_at = [&](double t) {
    return std::hypot(atom.position.x + atom.velocity.x * t,
                      atom.position.y + atom.velocity.y * t);
  };
  const double g = PhysicalConstants::g;
  const double vz = atom.velocity.z;
  // Downward crossing of z = 0.
  const double t_detect = (vz + std::sqrt(vz * vz + 2.0 * g * atom.position.z)) / g;

  r.survived_first = radius_at(r.t1) <= cfg.aperture_radius;
  r.survived_second = radius_at(r.t1 + r.big_t) <= cfg.aperture_radius;
  r.survived_detection = radius_at(t_detect) <= cfg.probe_radius;
  return r;
}

}  // namespace fountain::ballistics
