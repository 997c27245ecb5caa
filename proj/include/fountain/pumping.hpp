#pragma once

// Ground-state rate equations for optical pumping on the Cs D2 line.
// Excited states are adiabatically eliminated; time is measured in 1/Gamma.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fountain/angular.hpp"
#include "fountain/errors.hpp"

namespace fountain::pumping {

using angular::kGroundCount;
using angular::Sublevel;

/// hbar*k/m for the Cs D2 line, m/s.
inline constexpr double kRecoilVelocity = 3.52e-3;

/// Polarisation angle at which a linearly polarised beam drives pi, sigma+
/// and sigma- equally; used for the (unpolarised) hyperfine pumper.
inline const double kMagicAngle = std::acos(1.0 / std::sqrt(3.0));

class GroundPopulations {
 public:
  GroundPopulations() { p_.fill(0.0); }
  explicit GroundPopulations(const std::array<double, kGroundCount>& p) : p_(p) {}

  static GroundPopulations uniform() {
    GroundPopulations g;
    g.p_.fill(1.0 / kGroundCount);
    return g;
  }

  static GroundPopulations uniform_in(int f) {
    GroundPopulations g;
    for (std::size_t i = 0; i < kGroundCount; ++i) {
      if (angular::sublevel_at(i).f == angular::HalfInt(f)) g.p_[i] = 1.0 / (2 * f + 1);
    }
    return g;
  }

  static GroundPopulations pure(Sublevel s) {
    GroundPopulations g;
    g[s] = 1.0;
    return g;
  }

  double& operator[](Sublevel s) { return p_[angular::index_of(s)]; }
  double operator[](Sublevel s) const { return p_[angular::index_of(s)]; }
  double& at(std::size_t i) { return p_.at(i); }
  double at(std::size_t i) const { return p_.at(i); }

  double total() const { return std::accumulate(p_.begin(), p_.end(), 0.0); }
  double level_total(int f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < kGroundCount; ++i) {
      if (angular::sublevel_at(i).f == angular::HalfInt(f)) sum += p_[i];
    }
    return sum;
  }
  double clock_state() const { return (*this)[Sublevel{3, 0}]; }

  const std::array<double, kGroundCount>& values() const { return p_; }
  std::array<double, kGroundCount>& values() { return p_; }

  /// Throws std::invalid_argument unless entries are >= 0 and sum to 1.
  void validate(double tolerance = 1e-9) const {
    for (const double v : p_) {
      if (!(v >= 0.0)) throw std::invalid_argument("negative population");
    }
    if (std::abs(total() - 1.0) > tolerance) {
      throw std::invalid_argument("populations do not sum to 1");
    }
  }

 private:
  std::array<double, kGroundCount> p_;
};

/// A resonant laser addressing one ground hyperfine level (F -> F').
struct PumpLaser {
  int ground_f = 4;
  int excited_f = 4;
  double saturation = 1.0;
  double polarization_angle_rad = 0.0;  // relative to the bias field

  /// Weights of q = -1, 0, +1: sin^2/2, cos^2, sin^2/2.
  std::array<double, 3> polarization_weights() const {
    const double c = std::cos(polarization_angle_rad);
    const double pi_weight = c * c;
    const double sigma_weight = 0.5 * (1.0 - pi_weight);
    return {sigma_weight, pi_weight, sigma_weight};
  }
};

/// Laser (c): empties F=4 through F'=4.
inline PumpLaser hyperfine_pumper(double saturation = 1.0,
                                  double angle = kMagicAngle) {
  return {4, 4, saturation, angle};
}

/// Laser (a) used for dark-state pumping: F=3 -> F'=3.
inline PumpLaser repumper(double angle, double saturation = 1.0) {
  return {3, 3, saturation, angle};
}

struct PumpResult {
  GroundPopulations populations;
  double mean_photons = 0.0;
  /// Per-axis rms velocity added by recoil: v_r * sqrt(N/3).
  double mean_recoil_speed_addition = 0.0;
};

inline double recoil_speed_for(double photons) {
  return kRecoilVelocity * std::sqrt(std::max(photons, 0.0) / 3.0);
}

/// Precomputed loss rates R_g and gain matrix A(g <- g') for a laser set.
/// dp/dt = A p - R p, with each column of A summing to R.
class RateModel {
 public:
  explicit RateModel(std::span<const PumpLaser> lasers) {
    rates_.fill(0.0);
    for (auto& row : gain_) row.fill(0.0);
    for (const PumpLaser& laser : lasers) {
      if (laser.saturation < 0.0) {
        throw std::invalid_argument("negative laser saturation");
      }
      if (laser.ground_f != 3 && laser.ground_f != 4) {
        throw std::invalid_argument("laser ground level must be F=3 or F=4");
      }
      if (laser.excited_f < 2 || laser.excited_f > 5) {
        throw std::invalid_argument("laser excited level must be F'=2..5");
      }
      add(laser);
    }
  }

  const std::array<double, kGroundCount>& rates() const { return rates_; }
  double max_rate() const { return *std::max_element(rates_.begin(), rates_.end()); }

  /// One explicit Euler step; returns photons scattered during it.
  double step(std::array<double, kGroundCount>& p, double dt) const {
    std::array<double, kGroundCount> next{};
    double photons = 0.0;
    for (std::size_t g = 0; g < kGroundCount; ++g) {
      photons += rates_[g] * p[g];
      double inflow = 0.0;
      for (std::size_t src = 0; src < kGroundCount; ++src) {
        inflow += gain_[g][src] * p[src];
      }
      next[g] = p[g] + dt * (inflow - rates_[g] * p[g]);
    }
    p = next;
    return photons * dt;
  }

  double photon_rate(const std::array<double, kGroundCount>& p) const {
    double r = 0.0;
    for (std::size_t g = 0; g < kGroundCount; ++g) r += rates_[g] * p[g];
    return r;
  }

 private:
  void add(const PumpLaser& laser) {
    const auto weights = laser.polarization_weights();
    for (std::size_t g = 0; g < kGroundCount; ++g) {
      const Sublevel from = angular::sublevel_at(g);
      if (from.f != angular::HalfInt(laser.ground_f)) continue;
      for (int q = -1; q <= 1; ++q) {
        const angular::ExcitedSublevel e{laser.excited_f, from.m + angular::HalfInt(q)};
        const double strength = angular::dipole_strength(from, q, e);
        if (strength == 0.0) continue;
        const double rate = 0.5 * laser.saturation *
                            weights[static_cast<std::size_t>(q + 1)] * strength;
        if (rate == 0.0) continue;
        rates_[g] += rate;
        for (std::size_t to = 0; to < kGroundCount; ++to) {
          const double branch =
              angular::decay_probability_exact(e, angular::sublevel_at(to))
                  .convert_to<double>();
          gain_[to][g] += rate * branch;
        }
      }
    }
  }

  std::array<double, kGroundCount> rates_{};
  std::array<std::array<double, kGroundCount>, kGroundCount> gain_{};
};

/// Per-sublevel photon scattering rate in units of Gamma:
///   R_g = sum_lasers (1/2) s0 sum_q w_q S(g, q, (F', m+q)).
/// Depends only on the lasers; the population argument is validated.
inline std::array<double, kGroundCount> scattering_rates(
    const GroundPopulations& pop, std::span<const PumpLaser> lasers) {
  pop.validate();
  return RateModel(lasers).rates();
}

using TrajectoryObserver =
    std::function<void(double time, const GroundPopulations&, double photons)>;

struct EvolveOptions {
  /// Stop early once cumulative photons reach this value.
  double photon_limit = std::numeric_limits<double>::infinity();
  /// With an infinite duration: stop once the scattering rate falls below this.
  double completion_rate = 1e-15;
  TrajectoryObserver observer;
  std::size_t observe_every = 1;
};

/// Explicit Euler integration of the rate equations for `duration` (1/Gamma;
/// infinity runs until the photon rate drops below options.completion_rate).
inline PumpResult evolve(const GroundPopulations& pop,
                         std::span<const PumpLaser> lasers, double duration,
                         double dt, const EvolveOptions& options = {}) {
  pop.validate();
  if (!(duration >= 0.0)) throw std::invalid_argument("negative duration");
  const RateModel model(lasers);
  if (!(dt > 0.0) || model.max_rate() * dt > 0.1 + 1e-12) {
    throw StepSizeError("pumping step too large: max rate * dt must be <= 0.1");
  }

  auto p = pop.values();
  double photons = 0.0;
  double t = 0.0;
  std::size_t steps = 0;
  const bool to_completion = std::isinf(duration);
  auto observe = [&] {
    if (options.observer && steps % std::max<std::size_t>(options.observe_every, 1) == 0) {
      options.observer(t, GroundPopulations(p), photons);
    }
  };
  observe();

  while (true) {
    if (!to_completion && t >= duration) break;
    const double rate = model.photon_rate(p);
    if (to_completion && rate < options.completion_rate) break;
    if (photons >= options.photon_limit) break;
    double h = to_completion ? dt : std::min(dt, duration - t);
    // Shorten the last step so the photon limit is met exactly.
    if (rate > 0.0 && photons + rate * h > options.photon_limit) {
      h = (options.photon_limit - photons) / rate;
    }
    photons += model.step(p, h);
    t += h;
    ++steps;
    observe();
    if (photons >= options.photon_limit * (1.0 - 1e-15)) break;
  }
  if (options.observer && steps % std::max<std::size_t>(options.observe_every, 1) != 0) {
    options.observer(t, GroundPopulations(p), photons);
  }
  return {GroundPopulations(p), photons, recoil_speed_for(photons)};
}

/// Step size with max rate * dt = 0.02.
inline double default_step(std::span<const PumpLaser> lasers) {
  const double r = RateModel(lasers).max_rate();
  return r > 0.0 ? 0.02 / r : 1.0;
}

/// Hyperfine pumping with the F=4 -> F'=4 laser alone.
inline PumpResult one_laser_select(
    const GroundPopulations& pop, double saturation = 1.0,
    double duration = std::numeric_limits<double>::infinity()) {
  const std::array lasers{hyperfine_pumper(saturation)};
  return evolve(pop, lasers, duration, default_step(lasers));
}

struct TwoLaserOptions {
  double pumper_saturation = 1.0;
  double repumper_saturation = 1.0;
};

struct TwoLaserResult {
  PumpResult result;    // after the two-laser stage; photons counted from baseline
  PumpResult baseline;  // one-laser selection of the same input
  double enhancement = 1.0;
  double total_photons() const { return baseline.mean_photons + result.mean_photons; }
};

/// Dark-state selection: hyperfine pumping to completion (the one-laser
/// baseline), then F=4->F'=4 plus a linearly polarised F=3->F'=3 beam at
/// `angle` until the mean photon number reaches `photon_budget`.
inline TwoLaserResult two_laser_select(const GroundPopulations& pop, double angle,
                                       double photon_budget,
                                       const TwoLaserOptions& options = {}) {
  if (!(photon_budget >= 0.0)) throw std::invalid_argument("negative photon budget");
  TwoLaserResult out;
  out.baseline = one_laser_select(pop, options.pumper_saturation);
  out.result = PumpResult{out.baseline.populations, 0.0, 0.0};
  if (photon_budget > 0.0) {
    const std::array lasers{hyperfine_pumper(options.pumper_saturation),
                            repumper(angle, options.repumper_saturation)};
    EvolveOptions evolve_options;
    evolve_options.photon_limit = photon_budget;
    out.result = evolve(out.baseline.populations, lasers,
                        std::numeric_limits<double>::infinity(),
                        default_step(lasers), evolve_options);
  }
  const double base = out.baseline.populations.clock_state();
  out.enhancement = base > 0.0 ? out.result.populations.clock_state() / base : 0.0;
  return out;
}

}  // namespace fountain::pumping
