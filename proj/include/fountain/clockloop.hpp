#pragma once

// Closed-loop operation: square-wave probing at +-modulation about the
// current frequency estimate, an integrating servo, and Allan deviation of
// the resulting fractional-frequency record.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fountain/ballistics.hpp"
#include "fountain/detection.hpp"
#include "fountain/errors.hpp"
#include "fountain/interrogation.hpp"
#include "fountain/random.hpp"

namespace fountain::clockloop {

/// Noiseless transition probability as a function of the interrogation
/// offset from line centre, Hz.
using FringeModel = std::function<double(double offset_hz)>;

/// Single-atom Ramsey lineshape with optimal pi/2 pulses, scaled by the
/// fraction of atoms in the clock state.
inline FringeModel ramsey_fringe(double tau_s, double free_time_s,
                                 double clock_fraction = 1.0) {
  const double b = std::numbers::pi / 2 / tau_s;
  return [=](double offset_hz) {
    return clock_fraction *
           interrogation::ramsey_probability(2.0 * std::numbers::pi * offset_hz, b, tau_s,
                                             free_time_s);
  };
}

/// Everything the servo needs to simulate one launch.
struct FountainModel {
  FringeModel fringe;
  detection::DetectionConfig detection;
  std::uint64_t detected_atoms = 1'000'000;
  bool noise = true;

  double measure(double offset_hz, std::uint64_t seed) const {
    const double p = fringe(offset_hz);
    if (!noise) return p;
    return detection::measure_cycle(p, detected_atoms, detection, seed).signal;
  }
};

/// E = S(offset + mod) - S(offset - mod). For an even fringe, E has the
/// opposite sign to the offset (negative slope dE/d offset at lock).
inline double error_signal(double offset_hz, double mod_hz, const FountainModel& model,
                           std::uint64_t seed) {
  return model.measure(offset_hz + mod_hz, stream_key(seed, streams::servo, 0)) -
         model.measure(offset_hz - mod_hz, stream_key(seed, streams::servo, 1));
}

/// Noiseless discriminator slope dE/d(offset) at line centre, 1/Hz.
inline double discriminator_slope(const FringeModel& fringe, double mod_hz) {
  const double h = 1e-4 * mod_hz;
  auto e = [&](double x) { return fringe(x + mod_hz) - fringe(x - mod_hz); };
  return (e(h) - e(-h)) / (2.0 * h);
}

struct ServoConfig {
  double fwhm_hz = 1.0;
  double modulation_hz = 0.5;  // FWHM/2 puts the probes at maximum slope
  double gain = 0.5;           // dimensionless loop gain per correction
  double cycle_time_s = 1.0;   // launch-to-launch
  std::size_t n_cycles = 1000;
  double initial_offset_hz = 0.0;

  void validate(double big_t_s) const {
    if (!(fwhm_hz > 0.0)) throw std::invalid_argument("fwhm_hz must be > 0");
    if (!(modulation_hz > 0.0)) throw std::invalid_argument("modulation_hz must be > 0");
    if (!(gain >= 0.0)) throw std::invalid_argument("gain must be >= 0");
    if (!(cycle_time_s > big_t_s)) {
      throw std::invalid_argument("cycle_time_s must exceed the Ramsey time");
    }
    if (n_cycles < 2) throw std::invalid_argument("n_cycles must be >= 2");
    if (!(std::abs(initial_offset_hz) < fwhm_hz / 2)) {
      throw std::invalid_argument("initial offset outside the capture range (FWHM/2)");
    }
  }
};

struct CycleRecord {
  std::size_t cycle = 0;
  int side = +1;            // +1: probe at offset + mod, -1: offset - mod
  double signal = 0.0;
  double error = 0.0;       // set on the second cycle of each pair
  double correction_hz = 0.0;
  double offset_hz = 0.0;   // after this cycle's correction
};

struct ClockRun {
  std::vector<CycleRecord> cycles;
  double cycle_time_s = 1.0;
  double slope_per_hz = 0.0;

  /// Offset after each correction as y = offset / nu_Cs.
  std::vector<double> fractional_frequency() const {
    std::vector<double> y;
    for (const CycleRecord& c : cycles) {
      if (c.side < 0) y.push_back(c.offset_hz / ballistics::PhysicalConstants::hyperfine_hz);
    }
    return y;
  }
  /// One correction per pair of launches.
  double sample_interval_s() const { return 2.0 * cycle_time_s; }
};

/// Integrating servo. Cycles alternate between the two probe sides; after
/// each pair the offset moves by -gain * error / slope, so the noiseless
/// loop contracts by (1 - gain) per correction and diverges for gain > 2.
/// Throws LockLost when |offset| exceeds 3 FWHM.
inline ClockRun run_servo(const ServoConfig& cfg, const FountainModel& model,
                          double big_t_s, std::uint64_t seed) {
  cfg.validate(big_t_s);
  ClockRun run;
  run.cycle_time_s = cfg.cycle_time_s;
  run.slope_per_hz = discriminator_slope(model.fringe, cfg.modulation_hz);
  if (!(run.slope_per_hz < 0.0)) {
    throw PhysicsError("fringe model has no negative discriminator slope at line centre");
  }
  run.cycles.reserve(cfg.n_cycles);

  double offset = cfg.initial_offset_hz;
  double upper_signal = 0.0;
  for (std::size_t k = 0; k < cfg.n_cycles; ++k) {
    CycleRecord rec;
    rec.cycle = k;
    rec.side = (k % 2 == 0) ? +1 : -1;
    rec.signal = model.measure(offset + rec.side * cfg.modulation_hz,
                               stream_key(seed, streams::servo, k));
    if (rec.side > 0) {
      upper_signal = rec.signal;
    } else {
      rec.error = upper_signal - rec.signal;
      rec.correction_hz = -cfg.gain * rec.error / run.slope_per_hz;
      offset += rec.correction_hz;
    }
    rec.offset_hz = offset;
    run.cycles.push_back(rec);
    if (!std::isfinite(offset) || std::abs(offset) > 3.0 * cfg.fwhm_hz) {
      throw LockLost("lock lost at cycle " + std::to_string(k) + ": offset " +
                         std::to_string(offset) + " Hz",
                     k);
    }
  }
  return run;
}

struct AllanSeries {
  std::vector<double> taus_s;
  std::vector<double> adev;
  std::vector<std::size_t> n_samples;  // number of overlapping differences
};

/// Overlapping Allan deviation at averaging factors m (tau = m * tau0):
///   sigma^2 = sum_j (sum_{i=j}^{j+m-1} y_{i+m} - y_i)^2 / (2 m^2 (N - 2m + 1)).
inline AllanSeries allan_deviation(std::span<const double> y, double tau0_s,
                                   std::span<const std::size_t> factors) {
  if (!(tau0_s > 0.0)) throw std::invalid_argument("tau0 must be > 0");
  AllanSeries out;
  std::size_t previous = 0;
  for (const std::size_t m : factors) {
    if (m == 0 || m <= previous) throw std::invalid_argument("taus must be increasing");
    previous = m;
    if (y.size() < 2 * m) {
      throw InsufficientData("series of " + std::to_string(y.size()) +
                             " points too short for tau = " + std::to_string(m) + " tau0");
    }
  }
  // prefix sums turn each inner sum into O(1)
  std::vector<double> prefix(y.size() + 1, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) prefix[i + 1] = prefix[i] + y[i];
  for (const std::size_t m : factors) {
    const std::size_t terms = y.size() - 2 * m + 1;
    double sum = 0.0;
    for (std::size_t j = 0; j < terms; ++j) {
      const double later = prefix[j + 2 * m] - prefix[j + m];
      const double earlier = prefix[j + m] - prefix[j];
      const double d = later - earlier;
      sum += d * d;
    }
    const double md = static_cast<double>(m);
    out.taus_s.push_back(md * tau0_s);
    out.adev.push_back(std::sqrt(sum / (2.0 * md * md * static_cast<double>(terms))));
    out.n_samples.push_back(terms);
  }
  return out;
}

/// Allan deviation at requested taus (rounded to multiples of tau0).
inline AllanSeries allan_deviation(std::span<const double> y, double tau0_s,
                                   std::span<const double> taus_s) {
  std::vector<std::size_t> factors;
  for (const double t : taus_s) {
    factors.push_back(static_cast<std::size_t>(std::llround(t / tau0_s)));
  }
  return allan_deviation(y, tau0_s, std::span<const std::size_t>(factors));
}

/// Octave-spaced averaging factors 1, 2, 4, ... up to n/2.
inline std::vector<std::size_t> octave_factors(std::size_t n) {
  std::vector<std::size_t> m;
  for (std::size_t k = 1; 2 * k <= n; k *= 2) m.push_back(k);
  return m;
}

/// Least-squares slope of log(adev) against log(tau) over [tau_lo, tau_hi].
inline double log_log_slope(const AllanSeries& a, double tau_lo = 0.0,
                            double tau_hi = std::numeric_limits<double>::infinity()) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.taus_s.size(); ++i) {
    if (a.taus_s[i] < tau_lo || a.taus_s[i] > tau_hi || !(a.adev[i] > 0.0)) continue;
    const double x = std::log(a.taus_s[i]);
    const double v = std::log(a.adev[i]);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
    ++n;
  }
  if (n < 2) throw InsufficientData("need two taus for a slope");
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace fountain::clockloop
