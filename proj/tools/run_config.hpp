#pragma once

// JSON run configuration. Every section is read through Section, which
// records the resolved value of every key (defaults included) and rejects
// keys it was not asked about.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fountain/ballistics.hpp"
#include "fountain/detection.hpp"
#include "fountain/interrogation.hpp"
#include "fountain/pumping.hpp"

namespace fountain::cli {

using Json = nlohmann::json;

inline constexpr const char* kSchema = "fountain-sim/1";
inline constexpr const char* kVersion = "fountain-sim 0.1.0";

/// Invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Section {
 public:
  Section(const Json& source, std::string path) : source_(source), path_(std::move(path)) {
    if (!source_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    seen_.insert(key);
    T value = fallback;
    if (source_.contains(key)) {
      try {
        value = source_.at(key).get<T>();
      } catch (const Json::exception& e) {
        throw ConfigError(path_ + "." + key + ": " + e.what());
      }
    }
    resolved_[key] = value;
    return value;
  }

  template <typename T>
  std::optional<T> maybe(const std::string& key) {
    seen_.insert(key);
    if (!source_.contains(key) || source_.at(key).is_null()) return std::nullopt;
    try {
      T value = source_.at(key).get<T>();
      resolved_[key] = value;
      return value;
    } catch (const Json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  double positive(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path_ + "." + key + " must be > 0");
    return v;
  }

  double non_negative(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(path_ + "." + key + " must be >= 0");
    return v;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    return Section(source_.contains(key) ? source_.at(key) : empty, path_ + "." + key);
  }

  void adopt(const std::string& key, const Section& child) { resolved_[key] = child.resolved(); }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = source_.begin(); it != source_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

  const Json& resolved() const { return resolved_; }
  Json& resolved() { return resolved_; }

 private:
  const Json& source_;
  std::string path_;
  std::set<std::string> seen_;
  Json resolved_ = Json::object();
};

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Reads "schema" and "kind" and checks them.
inline void check_header(Section& root, const std::string& expected_kind) {
  const auto schema = root.get<std::string>("schema", kSchema);
  if (schema != kSchema) throw ConfigError("unsupported schema '" + schema + "'");
  const auto kind = root.get<std::string>("kind", expected_kind);
  if (kind != expected_kind) {
    throw ConfigError("config kind '" + kind + "' does not match subcommand '" +
                      expected_kind + "'");
  }
}

/// Launch geometry. The launch speed is given directly or via the apogee
/// height above the cavity.
inline ballistics::LaunchConfig read_launch(Section& s) {
  ballistics::LaunchConfig c;
  c.cavity_height = s.positive("cavity_height_m", c.cavity_height);
  c.aperture_radius = s.positive("aperture_radius_m", c.aperture_radius);
  c.interaction_length = s.positive("interaction_length_m", c.interaction_length);
  c.cloud_sigma_pos = s.non_negative("cloud_sigma_pos_m", c.cloud_sigma_pos);
  c.temperature = s.non_negative("temperature_k", c.temperature);
  c.probe_radius = s.positive("probe_radius_m", c.probe_radius);
  const auto speed = s.maybe<double>("launch_speed_m_s");
  const auto apogee = s.maybe<double>("apogee_above_cavity_m");
  if (speed && apogee) {
    throw ConfigError("launch: give launch_speed_m_s or apogee_above_cavity_m, not both");
  }
  if (speed) {
    c.launch_speed = *speed;
  } else if (apogee) {
    // negative apogee means the atom turns below the cavity
    c.launch_speed = std::sqrt(std::max(0.0, 2.0 * ballistics::PhysicalConstants::g *
                                                 (c.cavity_height + *apogee)));
  } else {
    throw ConfigError("launch: launch_speed_m_s or apogee_above_cavity_m is required");
  }
  s.resolved()["launch_speed_m_s"] = c.launch_speed;
  s.finish();
  return c;
}

inline interrogation::RamseyConfig read_ramsey(Section& s) {
  interrogation::RamseyConfig c;
  c.pulse_area_rad = s.positive("pulse_area_rad", c.pulse_area_rad);
  c.leak_ratio = s.non_negative("leak_ratio", c.leak_ratio);
  c.leak_phase_rad = s.get<double>("leak_phase_rad", c.leak_phase_rad);
  c.velocity_sigma = s.non_negative("velocity_sigma_m_s", c.velocity_sigma);
  s.finish();
  return c;
}

struct GridSpec {
  double half_span_hz = 8.0;
  std::size_t points = 400;
};

inline GridSpec read_grid(Section& s) {
  GridSpec g;
  g.half_span_hz = s.positive("half_span_hz", g.half_span_hz);
  g.points = s.get<std::size_t>("points", g.points);
  if (g.points < 2) throw ConfigError("grid.points must be >= 2");
  s.finish();
  return g;
}

struct DetectionSpec {
  detection::DetectionConfig config;
  double trap_atoms = 1e7;
  std::size_t n_cycles = 10;
  std::size_t n_repeats = 200;
};

inline DetectionSpec read_detection(Section& s) {
  DetectionSpec d;
  auto& c = d.config;
  c.collection_efficiency = s.positive("collection_efficiency", c.collection_efficiency);
  c.photons_per_atom = s.positive("photons_per_atom", c.photons_per_atom);
  c.arrival_jitter_frac = s.non_negative("arrival_jitter_frac", c.arrival_jitter_frac);
  c.single_probe_common_fraction =
      s.non_negative("single_probe_common_fraction", c.single_probe_common_fraction);
  c.projection_noise = s.get<bool>("projection_noise", c.projection_noise);
  c.photon_noise = s.get<bool>("photon_noise", c.photon_noise);
  const auto mode = s.get<std::string>("normalization_mode", "single_probe");
  if (mode == "single_probe") {
    c.normalization_mode = detection::NormalizationMode::single_probe;
  } else if (mode == "dual_probe") {
    c.normalization_mode = detection::NormalizationMode::dual_probe;
  } else {
    throw ConfigError("detection.normalization_mode must be single_probe or dual_probe");
  }
  d.trap_atoms = s.positive("trap_atoms", d.trap_atoms);
  d.n_cycles = s.get<std::size_t>("n_cycles", d.n_cycles);
  d.n_repeats = s.get<std::size_t>("n_repeats", d.n_repeats);
  if (d.n_cycles < 1) throw ConfigError("detection.n_cycles must be >= 1");
  if (d.n_repeats < 2) throw ConfigError("detection.n_repeats must be >= 2");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("detection: ") + e.what());
  }
  s.finish();
  return d;
}

/// State preparation before the cavity.
struct PreparationSpec {
  std::string scheme = "one_laser";
  double repumper_angle_rad = 0.0;
  double photon_budget = 2.0;
  double pumper_saturation = 1.0;
  double repumper_saturation = 1.0;
};

inline PreparationSpec read_preparation(Section& s) {
  PreparationSpec p;
  p.scheme = s.get<std::string>("scheme", p.scheme);
  if (p.scheme != "one_laser" && p.scheme != "two_laser") {
    throw ConfigError("preparation.scheme must be one_laser or two_laser");
  }
  p.repumper_angle_rad = s.get<double>("repumper_angle_rad", p.repumper_angle_rad);
  p.photon_budget = s.non_negative("photon_budget", p.photon_budget);
  p.pumper_saturation = s.positive("pumper_saturation", p.pumper_saturation);
  p.repumper_saturation = s.positive("repumper_saturation", p.repumper_saturation);
  s.finish();
  return p;
}

struct Preparation {
  double clock_fraction = 0.0;   // p(3,0)
  double f4_residual = 0.0;      // atoms left in F=4, detected as background
  double mean_photons = 0.0;
};

inline Preparation prepare(const PreparationSpec& spec) {
  const auto trap = pumping::GroundPopulations::uniform();
  Preparation out;
  if (spec.scheme == "one_laser") {
    const auto r = pumping::one_laser_select(trap, spec.pumper_saturation);
    out.clock_fraction = r.populations.clock_state();
    out.f4_residual = r.populations.level_total(4);
    out.mean_photons = r.mean_photons;
  } else {
    const auto r = pumping::two_laser_select(
        trap, spec.repumper_angle_rad, spec.photon_budget,
        {spec.pumper_saturation, spec.repumper_saturation});
    out.clock_fraction = r.result.populations.clock_state();
    out.f4_residual = r.result.populations.level_total(4);
    out.mean_photons = r.total_photons();
  }
  return out;
}

/// Evenly spaced values from..to inclusive.
inline std::vector<double> read_range(Section& s, double from, double to, std::size_t points) {
  from = s.get<double>("from", from);
  to = s.get<double>("to", to);
  points = s.get<std::size_t>("points", points);
  if (points < 1) throw ConfigError("range needs at least one point");
  s.finish();
  std::vector<double> v(points);
  for (std::size_t i = 0; i < points; ++i) {
    v[i] = points == 1 ? from
                       : from + (to - from) * static_cast<double>(i) /
                                    static_cast<double>(points - 1);
  }
  return v;
}

}  // namespace fountain::cli
