#pragma once

// Clock-transition dynamics |3,0> <-> |4,0>: exact two-level propagator,
// Ramsey interrogation with an optional weak leakage field during free
// flight, and velocity-averaged fringe patterns.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fountain/ballistics.hpp"
#include "fountain/errors.hpp"
#include "fountain/parallel.hpp"
#include "fountain/random.hpp"

namespace fountain::interrogation {

using Complex = std::complex<double>;

struct SpinState {
  Complex ground{1.0, 0.0};   // |3,0>
  Complex excited{0.0, 0.0};  // |4,0>

  double norm() const { return std::norm(ground) + std::norm(excited); }
  double excited_probability() const { return std::norm(excited); }
};

/// Constant drive: Rabi frequency b, detuning delta, field phase phi.
struct DriveSegment {
  double rabi_rad_s = 0.0;
  double detuning_rad_s = 0.0;
  double phase_rad = 0.0;
  double duration_s = 0.0;
};

/// 2x2 unitary in the (ground, excited) basis.
struct Propagator {
  Complex a, b, c, d;  // [[a, b], [c, d]]

  SpinState apply(const SpinState& s) const {
    return {a * s.ground + b * s.excited, c * s.ground + d * s.excited};
  }
  friend Propagator operator*(const Propagator& l, const Propagator& r) {
    return {l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.d,
            l.c * r.a + l.d * r.c, l.c * r.b + l.d * r.d};
  }
};

/// exp(-i H t) for H = (1/2)[[-delta, b e^{-i phi}], [b e^{i phi}, delta]].
inline Propagator propagator(const DriveSegment& seg) {
  if (seg.rabi_rad_s < 0.0) throw std::invalid_argument("negative Rabi frequency");
  if (seg.duration_s < 0.0) throw std::invalid_argument("negative duration");
  const double b = seg.rabi_rad_s;
  const double delta = seg.detuning_rad_s;
  const double omega = std::hypot(b, delta);
  const double half = 0.5 * seg.duration_s;
  if (omega == 0.0) return {1.0, 0.0, 0.0, 1.0};
  const double c = std::cos(omega * half);
  const double s = std::sin(omega * half);
  const Complex i{0.0, 1.0};
  const Complex field = std::polar(1.0, seg.phase_rad);
  return {Complex(c, delta / omega * s), -i * (b / omega * s) * std::conj(field),
          -i * (b / omega * s) * field, Complex(c, -delta / omega * s)};
}

inline SpinState propagate(const SpinState& s, const DriveSegment& seg) {
  return propagator(seg).apply(s);
}

/// Transition probability after pulse(tau) . free(free_time) . pulse(tau).
/// The free interval carries a constant leakage drive of Rabi frequency
/// leak_ratio * b and phase leak_phase (relative to the cavity field).
inline double ramsey_probability(double delta_rad_s, double b, double tau,
                                 double free_time, double leak_ratio = 0.0,
                                 double leak_phase = 0.0) {
  if (leak_ratio < 0.0) throw std::invalid_argument("negative leak ratio");
  if (free_time < 0.0 || tau < 0.0) throw std::invalid_argument("negative interval");
  const Propagator pulse = propagator({b, delta_rad_s, 0.0, tau});
  const Propagator drift = propagator({leak_ratio * b, delta_rad_s, leak_phase, free_time});
  const Propagator total = pulse * drift * pulse;
  return std::clamp(std::norm(total.c), 0.0, 1.0);
}

struct RamseyConfig {
  double pulse_area_rad = std::numbers::pi / 2;  // per pulse
  double tau_s = 0.002;
  double big_t_s = 0.5;
  double leak_ratio = 0.0;
  double leak_phase_rad = 0.0;
  double velocity_sigma = 0.010;  // m/s, vertical launch-speed spread

  void validate() const {
    if (!(pulse_area_rad > 0.0)) throw std::invalid_argument("pulse_area_rad must be > 0");
    if (!(leak_ratio >= 0.0)) throw std::invalid_argument("leak_ratio must be >= 0");
    if (!(velocity_sigma >= 0.0)) throw std::invalid_argument("velocity_sigma must be >= 0");
    if (!(tau_s > 0.0) || !(big_t_s > tau_s)) {
      throw std::invalid_argument("need 0 < tau_s < big_t_s");
    }
  }
};

struct FringePattern {
  std::vector<double> detunings_hz;
  std::vector<double> probabilities;
  RamseyConfig config;
  ballistics::LaunchConfig launch;
  std::uint64_t seed = 0;
  std::size_t n_atoms = 0;
  std::size_t n_survivors = 0;
  double rabi_rad_s = 0.0;
  double mean_tau_s = 0.0;
  double mean_big_t_s = 0.0;  // crossing interval at the mean velocity
};

namespace detail {

inline void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("detuning grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw std::invalid_argument("detuning grid must be strictly increasing");
    }
  }
}

}  // namespace detail

/// Ramsey pattern at a fixed timing (no Monte Carlo).
inline FringePattern single_atom_pattern(const RamseyConfig& cfg,
                                         std::span<const double> grid_hz) {
  cfg.validate();
  detail::check_grid(grid_hz);
  FringePattern out;
  out.config = cfg;
  out.detunings_hz.assign(grid_hz.begin(), grid_hz.end());
  out.rabi_rad_s = cfg.pulse_area_rad / cfg.tau_s;
  out.mean_tau_s = cfg.tau_s;
  out.mean_big_t_s = cfg.big_t_s + cfg.tau_s;
  out.n_atoms = out.n_survivors = 1;
  for (const double f : grid_hz) {
    out.probabilities.push_back(ramsey_probability(2.0 * std::numbers::pi * f,
                                                   out.rabi_rad_s, cfg.tau_s, cfg.big_t_s,
                                                   cfg.leak_ratio, cfg.leak_phase_rad));
  }
  return out;
}

/// Monte Carlo fringe pattern over a launched cloud. Vertical launch speeds
/// are Gaussian about launch.launch_speed with sigma = cfg.velocity_sigma;
/// transverse motion follows the cloud temperature and only atoms that pass
/// both cavity apertures and the probe contribute. The Rabi frequency is
/// fixed so the mean-velocity atom sees cfg.pulse_area_rad per pulse.
/// Each grid point sums atoms in index order, so the result does not depend
/// on `threads`.
inline FringePattern pattern(const RamseyConfig& cfg,
                             const ballistics::LaunchConfig& launch,
                             std::span<const double> grid_hz, std::size_t n_atoms,
                             std::uint64_t seed, unsigned threads = 1) {
  if (!(cfg.pulse_area_rad > 0.0)) throw std::invalid_argument("pulse_area_rad must be > 0");
  if (!(cfg.leak_ratio >= 0.0)) throw std::invalid_argument("leak_ratio must be >= 0");
  if (!(cfg.velocity_sigma >= 0.0)) throw std::invalid_argument("velocity_sigma must be >= 0");
  if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  detail::check_grid(grid_hz);

  const ballistics::TransitRecord mean = ballistics::transit(launch.launch_speed, launch);

  FringePattern out;
  out.config = cfg;
  out.config.tau_s = mean.tau;
  out.config.big_t_s = mean.big_t - mean.tau;
  out.launch = launch;
  out.seed = seed;
  out.n_atoms = n_atoms;
  out.rabi_rad_s = cfg.pulse_area_rad / mean.tau;
  out.mean_tau_s = mean.tau;
  out.mean_big_t_s = mean.big_t;
  out.detunings_hz.assign(grid_hz.begin(), grid_hz.end());

  struct Timing {
    double tau;
    double free_time;
  };
  std::vector<Timing> atoms;
  atoms.reserve(n_atoms);
  for (std::size_t i = 0; i < n_atoms; ++i) {
    ballistics::AtomSample a = ballistics::sample_atom(launch, seed, i);
    auto engine = make_engine(seed, streams::velocity, i);
    std::normal_distribution<double> unit(0.0, 1.0);
    a.velocity.z = launch.launch_speed + cfg.velocity_sigma * unit(engine);
    try {
      const ballistics::TransitRecord r = ballistics::survival(a, launch);
      if (!r.survived() || r.big_t <= r.tau) continue;
      atoms.push_back({r.tau, r.big_t - r.tau});
    } catch (const FountainTooLow&) {
      // slow tail of the velocity distribution never reaches the cavity
    }
  }
  if (atoms.empty()) throw PhysicsError("no atoms survived the cavity and probe apertures");
  out.n_survivors = atoms.size();

  out.probabilities.assign(grid_hz.size(), 0.0);
  parallel_for(grid_hz.size(), threads, [&](std::size_t k) {
    const double delta = 2.0 * std::numbers::pi * grid_hz[k];
    double sum = 0.0;
    for (const Timing& t : atoms) {
      sum += ramsey_probability(delta, out.rabi_rad_s, t.tau, t.free_time, cfg.leak_ratio,
                                cfg.leak_phase_rad);
    }
    out.probabilities[k] = sum / static_cast<double>(atoms.size());
  });
  return out;
}

struct FringeMetrics {
  double central_peak = 0.0;
  double central_amplitude = 0.0;
  double central_fwhm_hz = 0.0;
  std::vector<double> side_amplitudes;  // fringe k = 1, 2, ... (mean of +-k)
  double central_to_adjacent = 0.0;
};

/// Fringe geometry measured on a pattern with fringe period 1/T, where T is
/// the midpoint-to-midpoint interval recorded in the pattern. The grid must
/// cover at least +-1.75/T with >= 8 points per period.
inline FringeMetrics fringe_metrics(const FringePattern& p) {
  const auto& f = p.detunings_hz;
  const auto& y = p.probabilities;
  if (f.size() < 2 || f.size() != y.size()) throw std::invalid_argument("malformed pattern");
  const double period = 1.0 / p.mean_big_t_s;
  double max_spacing = 0.0;
  for (std::size_t i = 1; i < f.size(); ++i) max_spacing = std::max(max_spacing, f[i] - f[i - 1]);
  if (max_spacing > period / 8.0) {
    throw GridTooCoarse("fewer than 8 grid points per fringe period");
  }
  if (f.front() > -1.75 * period || f.back() < 1.75 * period) {
    throw std::invalid_argument("grid must cover the central and adjacent fringes");
  }

  auto extreme = [&](double lo, double hi, bool want_max) {
    double best = want_max ? -1.0 : 2.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] < lo * period || f[i] > hi * period) continue;
      if (want_max ? y[i] > best : y[i] < best) {
        best = y[i];
        idx = i;
      }
    }
    return std::pair{best, idx};
  };

  FringeMetrics m;
  const auto [peak, peak_idx] = extreme(-0.25, 0.25, true);
  const double left_min = extreme(-0.75, -0.25, false).first;
  const double right_min = extreme(0.25, 0.75, false).first;
  m.central_peak = peak;
  const double floor = 0.5 * (left_min + right_min);
  m.central_amplitude = peak - floor;

  const double half_height = 0.5 * (peak + floor);
  auto crossing = [&](int dir) {
    std::size_t i = peak_idx;
    while (true) {
      const std::size_t j = dir > 0 ? i + 1 : i - 1;
      if ((dir > 0 && j >= f.size()) || (dir < 0 && i == 0)) {
        throw GridTooCoarse("central fringe half-height not bracketed");
      }
      if (y[j] <= half_height) {
        const double frac = (y[i] - half_height) / (y[i] - y[j]);
        return f[i] + frac * (f[j] - f[i]);
      }
      i = j;
    }
  };
  m.central_fwhm_hz = crossing(+1) - crossing(-1);

  for (int k = 1; (k + 0.75) * period <= std::min(-f.front(), f.back()); ++k) {
    double amp = 0.0;
    for (const int side : {-1, 1}) {
      const double lo = side > 0 ? k - 0.25 : -k - 0.25;
      const double fpeak = extreme(lo, lo + 0.5, true).first;
      const double inner = side > 0 ? extreme(k - 0.75, k - 0.25, false).first
                                    : extreme(-k + 0.25, -k + 0.75, false).first;
      const double outer = side > 0 ? extreme(k + 0.25, k + 0.75, false).first
                                    : extreme(-k - 0.75, -k - 0.25, false).first;
      amp += 0.5 * (fpeak - 0.5 * (inner + outer));
    }
    m.side_amplitudes.push_back(amp);
  }
  m.central_to_adjacent = m.side_amplitudes.front() > 0.0
                              ? m.central_amplitude / m.side_amplitudes.front()
                              : std::numeric_limits<double>::infinity();
  return m;
}

/// Evenly spaced grid of `points` detunings across [-half_span, half_span].
inline std::vector<double> symmetric_grid(double half_span_hz, std::size_t points) {
  if (points < 2) throw std::invalid_argument("grid needs at least 2 points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = -half_span_hz + 2.0 * half_span_hz * static_cast<double>(i) /
                               static_cast<double>(points - 1);
  }
  return g;
}

}  // namespace fountain::interrogation
