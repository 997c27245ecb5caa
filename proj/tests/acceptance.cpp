// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fountain/angular.hpp"
#include "fountain/ballistics.hpp"
#include "fountain/clockloop.hpp"
#include "fountain/detection.hpp"
#include "fountain/interrogation.hpp"
#include "fountain/pumping.hpp"

using namespace fountain;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;
int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << fmt::format("[{}] {:>2} {}: {}\n", pass ? "PASS" : "FAIL", id, name, detail);
}

interrogation::FringePattern fringe_110mm(std::size_t n_atoms, double& seconds) {
  ballistics::LaunchConfig launch;
  launch.launch_speed = ballistics::launch_speed_for_apogee(0.110);
  interrogation::RamseyConfig cfg;
  cfg.velocity_sigma = 0.010;
  const auto grid = interrogation::symmetric_grid(8.0, 400);
  const auto start = std::chrono::steady_clock::now();
  auto p = interrogation::pattern(cfg, launch, grid, n_atoms, 1, 0);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return p;
}

void criterion_fringe_width(interrogation::FringePattern& out) {
  double seconds = 0.0;
  out = fringe_110mm(10000, seconds);
  const double fwhm = interrogation::fringe_metrics(out).central_fwhm_hz;
  report(1, "fringe width at 110 mm apogee", std::abs(fwhm - 1.7) <= 0.1 && seconds < 30.0,
         fmt::format("FWHM = {:.4f} Hz (1.7 +- 0.1), runtime {:.2f} s (< 30 s)", fwhm, seconds));
}

void criterion_timing() {
  const auto r = ballistics::transit(ballistics::launch_speed_for_apogee(0.3066),
                                     ballistics::LaunchConfig{});
  report(2, "fountain period", std::abs(r.big_t - 0.5) <= 0.001,
         fmt::format("T = {:.5f} s (0.500 +- 0.001)", r.big_t));
}

void criterion_photons() {
  const auto r = pumping::one_laser_select(pumping::GroundPopulations::uniform_in(4));
  const auto b = angular::branching_fraction_exact({4, 0}, 3);
  const double berr = std::abs(b.convert_to<double>() - 5.0 / 12.0);
  report(3, "hyperfine pumping photons",
         std::abs(r.mean_photons - 2.4) <= 0.01 && berr <= 1e-9 && b == angular::Rational(5, 12),
         fmt::format("photons = {:.5f} (2.4 +- 0.01), branching F'=4->F=3 = {} (5/12)",
                     r.mean_photons, b.str()));
}

void criterion_dark_state() {
  const auto s = angular::dipole_strength_exact({3, 0}, 0, {3, 0});
  report(4, "dark state", s == 0, fmt::format("S((3,0), pi, (3',0)) = {}", s.str()));
}

void criterion_clock_fraction() {
  const auto r = pumping::one_laser_select(pumping::GroundPopulations::uniform());
  const double p = r.populations.clock_state();
  report(5, "mF=0 fraction after one-laser pumping", std::abs(p - 0.14) <= 0.03,
         fmt::format("p(3,0) = {:.5f} (0.14 +- 0.03)", p));
}

void criterion_enhancement() {
  const auto trap = pumping::GroundPopulations::uniform();
  std::vector<double> e;
  for (int k = 0; k <= 18; ++k) {
    e.push_back(pumping::two_laser_select(trap, k * pi / 36, 2.0).enhancement);
  }
  const bool monotone = std::is_sorted(e.rbegin(), e.rend()) &&
                        std::adjacent_find(e.begin(), e.end()) == e.end();
  const bool peak_at_zero = std::max_element(e.begin(), e.end()) == e.begin();
  const bool factor = std::abs(e.front() - 2.5) <= 0.5;
  report(6, "two-laser enhancement", factor && monotone && peak_at_zero,
         fmt::format("enhancement(theta=0, 2 photons) = {:.4f} (2.5 +- 0.5) [{}]; "
                     "max at theta=0 and decreasing to pi/2 [{}]",
                     e.front(), factor ? "ok" : "out of band",
                     monotone && peak_at_zero ? "ok" : "not monotone"));
}

void criterion_leakage() {
  ballistics::LaunchConfig launch;
  launch.launch_speed = ballistics::launch_speed_for_apogee(ballistics::apogee_for_interval(0.5));
  launch.interaction_length = 0.004905;
  interrogation::RamseyConfig cfg;
  cfg.velocity_sigma = 0.010;
  const auto grid = interrogation::symmetric_grid(4.0, 400);
  auto ratio = [&](double eps, double phase) {
    cfg.leak_ratio = eps;
    cfg.leak_phase_rad = phase;
    return interrogation::fringe_metrics(interrogation::pattern(cfg, launch, grid, 10000, 1, 0))
        .central_to_adjacent;
  };
  const double control = ratio(0.0, 0.0);
  std::string leaks;
  bool collapse = false;
  for (const double phase : {0.0, pi / 2, pi, 3 * pi / 2}) {
    const double r = ratio(0.002, phase);
    collapse = collapse || r < 1.0;
    leaks += fmt::format("{}{:.4f}", leaks.empty() ? "" : ", ", r);
  }
  report(7, "leakage collapse of the central fringe", collapse && control >= 1.0,
         fmt::format("ratio(eps=0) = {:.4f} (>= 1); ratio(eps=0.002, phase 0, pi/2, pi, 3pi/2) = "
                     "{} (any < 1)",
                     control, leaks));
}

void criterion_snr(const interrogation::FringePattern& fringe) {
  const double survival =
      static_cast<double>(fringe.n_survivors) / static_cast<double>(fringe.n_atoms);
  const auto n = static_cast<std::uint64_t>(std::llround(1e7 * survival));
  const double clock =
      pumping::one_laser_select(pumping::GroundPopulations::uniform()).populations.clock_state();
  const double p = clock * interrogation::fringe_metrics(fringe).central_peak;
  detection::DetectionConfig single;
  detection::DetectionConfig dual;
  dual.normalization_mode = detection::NormalizationMode::dual_probe;
  const auto a = detection::snr_estimate(single, p, n, 10, 1000, 5, 0);
  const auto b = detection::snr_estimate(dual, p, n, 10, 1000, 5, 0);
  const bool band = a.snr >= 15.0 && a.snr <= 60.0;
  report(8, "S/N of a 10-cycle average at the fringe peak", band && b.snr > a.snr,
         fmt::format("single-probe S/N = {:.1f} with {} detected atoms, p = {:.4f} ([15, 60]) "
                     "[{}]; dual-probe S/N = {:.1f} > single [{}]",
                     a.snr, n, p, band ? "ok" : "out of band", b.snr,
                     b.snr > a.snr ? "ok" : "not improved"));
}

interrogation::SpinState rk4(interrogation::SpinState s, const interrogation::DriveSegment& seg,
                             int steps) {
  using C = interrogation::Complex;
  const C i{0.0, 1.0};
  const C lo = 0.5 * seg.rabi_rad_s * std::polar(1.0, -seg.phase_rad);
  const C hi = 0.5 * seg.rabi_rad_s * std::polar(1.0, seg.phase_rad);
  const double d = 0.5 * seg.detuning_rad_s;
  auto f = [&](C g, C e) { return std::pair{-i * (-d * g + lo * e), -i * (hi * g + d * e)}; };
  const double h = seg.duration_s / steps;
  C g = s.ground, e = s.excited;
  for (int k = 0; k < steps; ++k) {
    const auto [g1, e1] = f(g, e);
    const auto [g2, e2] = f(g + 0.5 * h * g1, e + 0.5 * h * e1);
    const auto [g3, e3] = f(g + 0.5 * h * g2, e + 0.5 * h * e2);
    const auto [g4, e4] = f(g + h * g3, e + h * e3);
    g += h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4);
    e += h / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
  }
  return {g, e};
}

void criterion_properties() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // unitarity over a long product
  interrogation::SpinState s{};
  for (int k = 0; k < 10000; ++k) {
    s = interrogation::propagate(s, {10 * u(rng), 10 * (u(rng) - 0.5), 2 * pi * u(rng), u(rng)});
  }
  const double drift = std::abs(s.norm() - 1.0);

  // closed-form Ramsey
  double ramsey = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double tau = 1e-3 + 9e-3 * u(rng), b = (0.2 + 3 * u(rng)) / tau;
    const double free_time = 0.6 * u(rng), delta = 2 * pi * 40 * (u(rng) - 0.5);
    const double w = std::hypot(b, delta), sn = std::sin(w * tau / 2), cs = std::cos(w * tau / 2);
    const double br = cs * std::cos(delta * free_time / 2) -
                      delta / w * sn * std::sin(delta * free_time / 2);
    const double oracle = 4 * b * b / (w * w) * sn * sn * br * br;
    ramsey = std::max(ramsey, std::abs(interrogation::ramsey_probability(delta, b, tau, free_time) -
                                       oracle));
  }

  // ODE oracle
  double ode = 0.0;
  for (int k = 0; k < 20; ++k) {
    const interrogation::DriveSegment seg{20 * u(rng), 40 * (u(rng) - 0.5), 2 * pi * u(rng),
                                          2 * u(rng)};
    const auto a = interrogation::propagate({}, seg);
    const auto b = rk4({}, seg, 20000);
    ode = std::max({ode, std::abs(a.ground - b.ground), std::abs(a.excited - b.excited)});
  }

  // 3j orthogonality, j <= 5
  double ortho = 0.0;
  for (int a = 0; a <= 10; ++a)
    for (int b = 0; b <= 10; ++b)
      for (int c = std::abs(a - b); c <= a + b; c += 2)
        for (int cp = std::abs(a - b); cp <= a + b; cp += 2)
          for (int m3 = -std::min(c, cp); m3 <= std::min(c, cp); m3 += 2) {
            if ((c - m3) % 2 || (cp - m3) % 2) continue;
            double sum = 0.0;
            for (int m1 = -a; m1 <= a; m1 += 2) {
              const int m2 = -m3 - m1;
              if (std::abs(m2) > b) continue;
              using angular::half;
              sum += angular::wigner3j(half(a), half(b), half(c), half(m1), half(m2), half(m3)) *
                     angular::wigner3j(half(a), half(b), half(cp), half(m1), half(m2), half(m3));
            }
            ortho = std::max(ortho, std::abs((c + 1) * sum - (c == cp ? 1.0 : 0.0)));
          }

  // population conservation
  double conservation = 0.0;
  pumping::EvolveOptions opts;
  opts.observer = [&](double, const pumping::GroundPopulations& p, double) {
    conservation = std::max(conservation, std::abs(p.total() - 1.0));
  };
  const std::array lasers{pumping::hyperfine_pumper(), pumping::repumper(0.5)};
  pumping::evolve(pumping::GroundPopulations::uniform(), lasers, 300.0,
                  pumping::default_step(lasers), opts);

  // Allan slope on white FM
  std::normal_distribution<double> gauss(0.0, 1e-13);
  std::vector<double> y(1 << 16);
  for (auto& v : y) v = gauss(rng);
  const auto factors = clockloop::octave_factors(y.size() / 8);
  const double slope = clockloop::log_log_slope(
      clockloop::allan_deviation(y, 1.0, std::span<const std::size_t>(factors)));

  // noiseless servo
  clockloop::FountainModel model;
  model.fringe = clockloop::ramsey_fringe(0.002, 0.498);
  model.noise = false;
  clockloop::ServoConfig servo;
  servo.fwhm_hz = 1.0;
  servo.modulation_hz = 0.5;
  servo.initial_offset_hz = 0.25;
  servo.n_cycles = 100;
  const double final_offset =
      std::abs(clockloop::run_servo(servo, model, 0.5, 1).cycles.back().offset_hz);

  const bool pass = drift < 1e-12 && ramsey < 1e-10 && ode < 1e-8 && ortho < 1e-12 &&
                    conservation < 1e-9 && std::abs(slope + 0.5) <= 0.05 && final_offset < 1e-3;
  report(9, "property suites", pass,
         fmt::format("unitarity drift {:.1e} (<1e-12), closed-form {:.1e} (<1e-10), ODE {:.1e} "
                     "(<1e-8), 3j orthogonality {:.1e} (<1e-12), conservation {:.1e} (<1e-9), "
                     "Allan slope {:.3f} (-0.5 +- 0.05), servo |offset| {:.1e} Hz after 100 "
                     "cycles (<1e-3)",
                     drift, ramsey, ode, ortho, conservation, slope, final_offset));
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  }
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) count_b += e.is_regular_file();
  if (files.size() != count_b) {
    why = "file sets differ";
    return false;
  }
  for (const auto& f : files) {
    std::ifstream x(a / f, std::ios::binary), y(b / f, std::ios::binary);
    const std::string sx{std::istreambuf_iterator<char>(x), {}};
    const std::string sy{std::istreambuf_iterator<char>(y), {}};
    if (sx != sy) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

void criterion_reproducibility() {
  const fs::path root = fs::temp_directory_path() / "fountain-acceptance";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> runs{
      {"fringe", "fig4.json"},      {"fringe", "fig5.json"},     {"angle-scan", "fig6.json"},
      {"leakage", "fig7.json"},     {"pump-scan", "pumping.json"}, {"servo", "servo.json"},
      {"strengths", "strengths.json"}};
  bool ok = true;
  std::string detail;
  for (const auto& [cmd, config] : runs) {
    std::vector<fs::path> outs;
    for (const int threads : {1, 1, 4}) {
      const fs::path out = root / fmt::format("{}-{}", config, outs.size());
      const std::string line =
          fmt::format("\"{}\" {} --config \"{}/{}\" --seed 20240601 --out \"{}\" --threads {}",
                      FOUNTAIN_SIM, cmd, CONFIG_DIR, config, out.string(), threads);
      if (std::system(line.c_str()) != 0) {
        ok = false;
        detail += fmt::format(" {} failed to run;", config);
      }
      outs.push_back(out);
    }
    std::string why;
    if (ok && !(same_tree(outs[0], outs[1], why) && same_tree(outs[0], outs[2], why))) {
      ok = false;
      detail += fmt::format(" {}: {};", config, why);
    }
  }
  fs::remove_all(root);
  report(10, "reproducibility", ok,
         ok ? fmt::format("{} commands byte-identical across repeat runs and --threads 1/4",
                          runs.size())
            : detail);
}

}  // namespace

int main() {
  interrogation::FringePattern fig4;
  criterion_fringe_width(fig4);
  criterion_timing();
  criterion_photons();
  criterion_dark_state();
  criterion_clock_fraction();
  criterion_enhancement();
  criterion_leakage();
  criterion_snr(fig4);
  criterion_properties();
  criterion_reproducibility();
  std::cout << fmt::format("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
