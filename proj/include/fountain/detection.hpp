#pragma once

// Fluorescence detection: projection noise, photon shot noise and the
// arrival-time (atom number) fluctuation that couples through single-probe
// normalisation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "fountain/parallel.hpp"
#include "fountain/random.hpp"

namespace fountain::detection {

enum class NormalizationMode { single_probe, dual_probe };

struct DetectionConfig {
  double collection_efficiency = 0.05;
  double photons_per_atom = 200.0;  // scattered per atom crossing the probe
  double arrival_jitter_frac = 0.01;
  NormalizationMode normalization_mode = NormalizationMode::single_probe;
  /// Share of the jitter variance common to the N4 and N_total measurements
  /// in single-probe mode (dual-probe is fully common).
  double single_probe_common_fraction = 0.5;
  bool projection_noise = true;
  bool photon_noise = true;

  void validate() const {
    if (!(collection_efficiency > 0.0 && collection_efficiency <= 1.0)) {
      throw std::invalid_argument("collection_efficiency must be in (0, 1]");
    }
    if (!(photons_per_atom > 0.0)) throw std::invalid_argument("photons_per_atom must be > 0");
    if (!(arrival_jitter_frac >= 0.0)) {
      throw std::invalid_argument("arrival_jitter_frac must be >= 0");
    }
    if (!(single_probe_common_fraction >= 0.0 && single_probe_common_fraction <= 1.0)) {
      throw std::invalid_argument("single_probe_common_fraction must be in [0, 1]");
    }
  }

  double common_fraction() const {
    return normalization_mode == NormalizationMode::dual_probe ? 1.0
                                                               : single_probe_common_fraction;
  }
};

struct CycleMeasurement {
  double n4_counts = 0.0;      // atoms inferred in F=4
  double ntotal_counts = 0.0;  // atoms inferred in total
  double signal = 0.0;         // n4 / ntotal
  std::uint64_t seed = 0;
};

/// Above this, Binomial/Poisson draws use the Gaussian approximation.
inline constexpr double kExactSamplingLimit = 1e6;

namespace detail {

template <typename Engine>
double binomial(Engine& engine, std::uint64_t n, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return static_cast<double>(n);
  if (static_cast<double>(n) <= kExactSamplingLimit) {
    return static_cast<double>(std::binomial_distribution<std::uint64_t>(n, p)(engine));
  }
  const double mean = static_cast<double>(n) * p;
  const double sd = std::sqrt(mean * (1.0 - p));
  return std::clamp(std::normal_distribution<double>(mean, sd)(engine), 0.0,
                    static_cast<double>(n));
}

template <typename Engine>
double poisson(Engine& engine, double mean) {
  if (mean <= 0.0) return 0.0;
  if (mean <= kExactSamplingLimit) {
    return static_cast<double>(std::poisson_distribution<std::uint64_t>(mean)(engine));
  }
  return std::max(0.0, std::normal_distribution<double>(mean, std::sqrt(mean))(engine));
}

}  // namespace detail

/// One fountain cycle: N4 ~ Binomial(n, p); both atom numbers are scaled by
/// an arrival-time factor 1 + jitter*G (G shared with weight
/// common_fraction); fluorescence counts are Poisson at the collected
/// photon rate and converted back to atom units.
inline CycleMeasurement measure_cycle(double p_transition, std::uint64_t n_detected_atoms,
                                      const DetectionConfig& cfg, std::uint64_t seed) {
  if (!(p_transition >= 0.0 && p_transition <= 1.0)) {
    throw std::invalid_argument("transition probability must be in [0, 1]");
  }
  if (n_detected_atoms < 1) throw std::invalid_argument("need at least one detected atom");
  cfg.validate();

  auto engine = make_engine(seed, streams::detection, 0);
  std::normal_distribution<double> unit(0.0, 1.0);

  const double n = static_cast<double>(n_detected_atoms);
  const double n4 = cfg.projection_noise ? detail::binomial(engine, n_detected_atoms, p_transition)
                                         : n * p_transition;

  const double shared = unit(engine);
  const double own4 = unit(engine);
  const double own_total = unit(engine);
  const double c = cfg.common_fraction();
  const double wc = std::sqrt(c);
  const double wi = std::sqrt(1.0 - c);
  const double j = cfg.arrival_jitter_frac;
  const double scale4 = std::max(0.0, 1.0 + j * (wc * shared + wi * own4));
  const double scale_total = std::max(0.0, 1.0 + j * (wc * shared + wi * own_total));

  const double k = cfg.photons_per_atom * cfg.collection_efficiency;
  auto count = [&](double atoms) {
    const double mean = atoms * k;
    return (cfg.photon_noise ? detail::poisson(engine, mean) : mean) / k;
  };

  CycleMeasurement m;
  m.seed = seed;
  m.n4_counts = p_transition == 0.0 ? 0.0 : count(n4 * scale4);
  m.ntotal_counts = count(n * scale_total);
  m.signal = m.ntotal_counts > 0.0 ? m.n4_counts / m.ntotal_counts : 0.0;
  return m;
}

struct SnrEstimate {
  double snr = 0.0;
  bool unbounded = false;  // zero spread: no active noise source
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t repeats = 0;
};

/// S/N of an n_cycles average at fixed p: mean / stddev over n_repeats
/// independent averages.
inline SnrEstimate snr_estimate(const DetectionConfig& cfg, double p_peak,
                                std::uint64_t n_detected_atoms, std::size_t n_cycles,
                                std::size_t n_repeats, std::uint64_t seed,
                                unsigned threads = 1) {
  if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");
  if (n_repeats < 2) throw std::invalid_argument("n_repeats must be >= 2");
  std::vector<double> averages(n_repeats);
  parallel_for(n_repeats, threads, [&](std::size_t r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n_cycles; ++c) {
      const std::uint64_t cycle_seed = stream_key(seed, r, c);
      sum += measure_cycle(p_peak, n_detected_atoms, cfg, cycle_seed).signal;
    }
    averages[r] = sum / static_cast<double>(n_cycles);
  });
  SnrEstimate out;
  out.repeats = n_repeats;
  for (const double a : averages) out.mean += a;
  out.mean /= static_cast<double>(n_repeats);
  double ss = 0.0;
  for (const double a : averages) ss += (a - out.mean) * (a - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(n_repeats - 1));
  const bool constant = std::all_of(averages.begin(), averages.end(),
                                    [&](double a) { return a == averages.front(); });
  if (constant) {
    out.stddev = 0.0;
    out.unbounded = true;
    out.snr = std::numeric_limits<double>::infinity();
  } else {
    out.snr = out.mean / out.stddev;
  }
  return out;
}

}  // namespace fountain::detection
