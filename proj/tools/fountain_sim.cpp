// fountain-sim: command-line driver for the fountain simulation.
//
//   fountain-sim <subcommand> --config <path> --seed <u64> --out <dir> [--threads N]
//
// Exit codes: 0 ok, 2 config error, 3 physics error, 4 lock lost.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fountain/angular.hpp"
#include "fountain/ballistics.hpp"
#include "fountain/clockloop.hpp"
#include "fountain/csv.hpp"
#include "fountain/detection.hpp"
#include "fountain/errors.hpp"
#include "fountain/interrogation.hpp"
#include "fountain/pumping.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace fountain;
using cli::ConfigError;
using cli::Json;
using cli::Section;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kPhysicsError = 3, kLockLost = 4 };

struct Run {
  std::string config_path;
  std::uint64_t seed = 0;
  fs::path out;
  unsigned threads = 0;
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

void echo_config(const Run& run, const Section& root) {
  Json echo = root.resolved();
  echo["seed"] = run.seed;
  write_json(run.out / "config.json", echo);
}

Json metrics_json(const interrogation::FringeMetrics& m) {
  return {{"central_peak", m.central_peak},
          {"central_amplitude", m.central_amplitude},
          {"central_fwhm_hz", m.central_fwhm_hz},
          {"side_amplitudes", m.side_amplitudes},
          {"central_to_adjacent", m.central_to_adjacent}};
}

Json pattern_json(const interrogation::FringePattern& p, const Json& config) {
  return {{"version", cli::kVersion},
          {"seed", p.seed},
          {"n_atoms", p.n_atoms},
          {"n_survivors", p.n_survivors},
          {"rabi_rad_s", p.rabi_rad_s},
          {"mean_tau_s", p.mean_tau_s},
          {"mean_big_t_s", p.mean_big_t_s},
          {"config", config}};
}

void write_pattern(const fs::path& path, const interrogation::FringePattern& p,
                   const cli::Preparation& prep) {
  csv::Writer w(path.string(), {"detuning_hz", "probability", "signal"});
  for (std::size_t i = 0; i < p.detunings_hz.size(); ++i) {
    w.row({p.detunings_hz[i], p.probabilities[i],
           prep.f4_residual + prep.clock_fraction * p.probabilities[i]});
  }
}

/// Shared fringe inputs: launch, Ramsey settings, grid and atom count.
struct FringeInputs {
  ballistics::LaunchConfig launch;
  interrogation::RamseyConfig ramsey;
  cli::GridSpec grid;
  std::size_t n_atoms = 10000;
};

FringeInputs read_fringe_inputs(Section& root) {
  FringeInputs in;
  auto launch = root.child("launch");
  in.launch = cli::read_launch(launch);
  root.adopt("launch", launch);
  auto ramsey = root.child("ramsey");
  in.ramsey = cli::read_ramsey(ramsey);
  root.adopt("ramsey", ramsey);
  auto grid = root.child("grid");
  in.grid = cli::read_grid(grid);
  root.adopt("grid", grid);
  in.n_atoms = root.get<std::size_t>("n_atoms", in.n_atoms);
  if (in.n_atoms < 1) throw ConfigError("n_atoms must be >= 1");
  return in;
}

cli::PreparationSpec read_prep_section(Section& root) {
  auto s = root.child("preparation");
  auto spec = cli::read_preparation(s);
  root.adopt("preparation", s);
  return spec;
}

cli::DetectionSpec read_detection_section(Section& root) {
  auto s = root.child("detection");
  auto spec = cli::read_detection(s);
  root.adopt("detection", s);
  return spec;
}

interrogation::FringePattern simulate(const FringeInputs& in, const Run& run) {
  const auto grid = interrogation::symmetric_grid(in.grid.half_span_hz, in.grid.points);
  return interrogation::pattern(in.ramsey, in.launch, grid, in.n_atoms, run.seed, run.threads);
}

std::uint64_t detected_atoms(const interrogation::FringePattern& p, double trap_atoms) {
  const double fraction =
      static_cast<double>(p.n_survivors) / static_cast<double>(p.n_atoms);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(trap_atoms * fraction)));
}

int cmd_fringe(const Run& run, const Json& source) {
  Section root(source, "config");
  cli::check_header(root, "fringe");
  const FringeInputs in = read_fringe_inputs(root);
  const auto prep_spec = read_prep_section(root);
  const auto det = read_detection_section(root);
  root.finish();
  echo_config(run, root);

  const cli::Preparation prep = cli::prepare(prep_spec);
  const auto p = simulate(in, run);
  const auto m = interrogation::fringe_metrics(p);

  const std::uint64_t n_det = detected_atoms(p, det.trap_atoms);
  const double peak_signal = prep.f4_residual + prep.clock_fraction * m.central_peak;
  const auto snr = detection::snr_estimate(det.config, peak_signal, n_det, det.n_cycles,
                                           det.n_repeats,
                                           stream_key(run.seed, streams::detection, 1),
                                           run.threads);

  write_pattern(run.out / "pattern.csv", p, prep);
  write_json(run.out / "pattern.json", pattern_json(p, root.resolved()));
  Json metrics = metrics_json(m);
  metrics["clock_fraction"] = prep.clock_fraction;
  metrics["f4_residual"] = prep.f4_residual;
  metrics["pumping_photons"] = prep.mean_photons;
  metrics["detected_atoms"] = n_det;
  metrics["peak_signal"] = peak_signal;
  metrics["snr"] = snr.unbounded ? Json(nullptr) : Json(snr.snr);
  metrics["snr_unbounded"] = snr.unbounded;
  metrics["snr_cycles"] = det.n_cycles;
  write_json(run.out / "metrics.json", metrics);
  return kOk;
}

int cmd_leakage(const Run& run, const Json& source) {
  Section root(source, "config");
  cli::check_header(root, "leakage");
  FringeInputs in = read_fringe_inputs(root);
  auto sweep = root.child("sweep");
  const auto ratios = sweep.get<std::vector<double>>("leak_ratios", {0.0, 0.0005, 0.002});
  const auto phases = sweep.get<std::vector<double>>(
      "leak_phases_rad", {0.0, std::numbers::pi / 2, std::numbers::pi, 3 * std::numbers::pi / 2});
  if (ratios.empty() || phases.empty()) throw ConfigError("sweep lists must not be empty");
  for (const double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("sweep.leak_ratios must be >= 0");
  }
  sweep.finish();
  root.adopt("sweep", sweep);
  root.finish();
  echo_config(run, root);

  const cli::Preparation unit{1.0, 0.0, 0.0};
  csv::Writer summary((run.out / "summary.csv").string(),
                      {"index", "leak_ratio", "leak_phase_rad", "central_amplitude",
                       "adjacent_amplitude", "central_to_adjacent", "file"});
  std::uint64_t index = 0;
  for (const double ratio : ratios) {
    for (const double phase : phases) {
      in.ramsey.leak_ratio = ratio;
      in.ramsey.leak_phase_rad = phase;
      const auto p = simulate(in, run);
      const auto m = interrogation::fringe_metrics(p);
      const std::string file = fmt::format("pattern_{:03d}.csv", index);
      write_pattern(run.out / file, p, unit);
      summary.row({index, ratio, phase, m.central_amplitude, m.side_amplitudes.front(),
                   m.central_to_adjacent, std::string_view(file)});
      ++index;
    }
  }
  return kOk;
}

int cmd_angle_scan(const Run& run, const Json& source) {
  Section root(source, "config");
  cli::check_header(root, "angle_scan");
  const FringeInputs in = read_fringe_inputs(root);
  const auto prep = read_prep_section(root);
  auto range = root.child("angles");
  const auto angles = cli::read_range(range, 0.0, std::numbers::pi / 2, 19);
  root.adopt("angles", range);
  root.finish();
  echo_config(run, root);

  // Pumping only rescales the fringe, so one Monte Carlo pattern serves every angle.
  const auto p = simulate(in, run);
  const double amplitude = interrogation::fringe_metrics(p).central_amplitude;

  csv::Writer w((run.out / "angle_scan.csv").string(),
                {"scheme", "angle_rad", "p30", "fringe_amplitude", "mean_photons",
                 "enhancement"});
  const auto trap = pumping::GroundPopulations::uniform();
  const auto base = pumping::one_laser_select(trap, prep.pumper_saturation);
  const double p30_base = base.populations.clock_state();
  w.row({std::string_view("one_laser"), 0.0, p30_base, p30_base * amplitude, base.mean_photons,
         1.0});
  for (const double angle : angles) {
    const auto r = pumping::two_laser_select(trap, angle, prep.photon_budget,
                                             {prep.pumper_saturation, prep.repumper_saturation});
    const double p30 = r.result.populations.clock_state();
    w.row({std::string_view("two_laser"), angle, p30, p30 * amplitude, r.total_photons(),
           r.enhancement});
  }
  return kOk;
}

int cmd_pump_scan(const Run& run, const Json& source) {
  Section root(source, "config");
  cli::check_header(root, "pump_scan");
  const auto prep = read_prep_section(root);
  auto range = root.child("budgets");
  const auto budgets = cli::read_range(range, 0.0, 6.0, 25);
  root.adopt("budgets", range);
  const auto observe_every = root.get<std::size_t>("trajectory_every", 10);
  if (observe_every < 1) throw ConfigError("trajectory_every must be >= 1");
  root.finish();
  for (const double b : budgets) {
    if (!(b >= 0.0)) throw ConfigError("budgets must be >= 0");
  }
  echo_config(run, root);

  const auto trap = pumping::GroundPopulations::uniform();
  const pumping::TwoLaserOptions options{prep.pumper_saturation, prep.repumper_saturation};
  csv::Writer w((run.out / "pump_scan.csv").string(),
                {"photon_budget", "p30", "f4_residual", "mean_photons", "enhancement"});
  for (const double b : budgets) {
    const auto r = pumping::two_laser_select(trap, prep.repumper_angle_rad, b, options);
    w.row({b, r.result.populations.clock_state(), r.result.populations.level_total(4),
           r.total_photons(), r.enhancement});
  }

  // Population trajectory: one-laser stage then both lasers up to the largest budget.
  std::vector<std::string> names{"stage", "time", "photons"};
  for (const auto s : angular::ground_sublevels()) {
    names.push_back(fmt::format("p_{}_{}", s.f.twice() / 2, s.m.twice() / 2));
  }
  std::ofstream traj(run.out / "trajectory.csv", std::ios::binary | std::ios::trunc);
  if (!traj) throw std::runtime_error("cannot open trajectory.csv");
  for (std::size_t i = 0; i < names.size(); ++i) traj << (i ? "," : "") << names[i];
  traj << '\n';
  auto observer_for = [&](std::string_view stage, double photon_offset) {
    return [&traj, stage, photon_offset](double t, const pumping::GroundPopulations& p,
                                         double photons) {
      traj << stage << ',' << csv::format_cell(t) << ','
           << csv::format_cell(photon_offset + photons);
      for (const double v : p.values()) traj << ',' << csv::format_cell(v);
      traj << '\n';
    };
  };
  const std::array one{pumping::hyperfine_pumper(prep.pumper_saturation)};
  pumping::EvolveOptions first;
  first.observer = observer_for("one_laser", 0.0);
  first.observe_every = observe_every;
  const auto stage1 = pumping::evolve(trap, one, std::numeric_limits<double>::infinity(),
                                      pumping::default_step(one), first);
  const double top = budgets.back() > budgets.front() ? budgets.back() : budgets.front();
  if (top > 0.0) {
    const std::array two{pumping::hyperfine_pumper(prep.pumper_saturation),
                         pumping::repumper(prep.repumper_angle_rad, prep.repumper_saturation)};
    pumping::EvolveOptions second;
    second.observer = observer_for("two_laser", stage1.mean_photons);
    second.observe_every = observe_every;
    second.photon_limit = top;
    pumping::evolve(stage1.populations, two, std::numeric_limits<double>::infinity(),
                    pumping::default_step(two), second);
  }
  return kOk;
}

int cmd_servo(const Run& run, const Json& source) {
  Section root(source, "config");
  cli::check_header(root, "servo");
  auto launch_s = root.child("launch");
  const auto launch = cli::read_launch(launch_s);
  root.adopt("launch", launch_s);
  const auto prep_spec = read_prep_section(root);
  const auto det = read_detection_section(root);
  const auto n_atoms = root.get<std::size_t>("n_atoms", 2000);
  const auto velocity_sigma = root.non_negative("velocity_sigma_m_s", 0.010);
  const bool noise = root.get<bool>("noise", true);
  auto servo_s = root.child("servo");
  clockloop::ServoConfig servo;
  const auto fwhm = servo_s.maybe<double>("fwhm_hz");
  const auto modulation = servo_s.maybe<double>("modulation_hz");
  servo.gain = servo_s.get<double>("gain", servo.gain);
  servo.cycle_time_s = servo_s.positive("cycle_time_s", servo.cycle_time_s);
  servo.n_cycles = servo_s.get<std::size_t>("n_cycles", servo.n_cycles);
  servo.initial_offset_hz = servo_s.get<double>("initial_offset_hz", servo.initial_offset_hz);
  servo_s.finish();
  if (n_atoms < 1) throw ConfigError("n_atoms must be >= 1");
  root.finish();

  // Survival fraction and mean timing from the launch geometry.
  interrogation::RamseyConfig ramsey;
  ramsey.velocity_sigma = velocity_sigma;
  const std::array<double, 1> centre{0.0};
  const auto probe = interrogation::pattern(ramsey, launch, centre, n_atoms, run.seed, run.threads);
  const double big_t = probe.mean_big_t_s;
  servo.fwhm_hz = fwhm.value_or(1.0 / (2.0 * big_t));
  servo.modulation_hz = modulation.value_or(servo.fwhm_hz / 2.0);
  servo_s.resolved()["fwhm_hz"] = servo.fwhm_hz;
  servo_s.resolved()["modulation_hz"] = servo.modulation_hz;
  root.adopt("servo", servo_s);
  try {
    servo.validate(big_t);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("servo: ") + e.what());
  }
  echo_config(run, root);
  if (servo.gain == 0.0) {
    std::cerr << "warning: servo gain is 0; the offset will never be corrected\n";
  }

  const cli::Preparation prep = cli::prepare(prep_spec);
  const auto shape = clockloop::ramsey_fringe(probe.mean_tau_s, big_t - probe.mean_tau_s,
                                              prep.clock_fraction);
  clockloop::FountainModel model;
  model.fringe = [shape, residual = prep.f4_residual](double x) { return residual + shape(x); };
  model.detection = det.config;
  model.detected_atoms = detected_atoms(probe, det.trap_atoms);
  model.noise = noise;

  const auto result = clockloop::run_servo(servo, model, big_t, run.seed);
  {
    csv::Writer w((run.out / "clock_run.csv").string(),
                  {"cycle", "side", "signal", "error", "correction_hz", "offset_hz"});
    for (const auto& c : result.cycles) {
      w.row({static_cast<std::uint64_t>(c.cycle), static_cast<std::int64_t>(c.side), c.signal,
             c.error, c.correction_hz, c.offset_hz});
    }
  }
  const auto y = result.fractional_frequency();
  const auto factors = clockloop::octave_factors(y.size());
  if (factors.empty()) throw InsufficientData("too few corrections for an Allan deviation");
  const auto adev = clockloop::allan_deviation(y, result.sample_interval_s(),
                                               std::span<const std::size_t>(factors));
  {
    csv::Writer w((run.out / "allan.csv").string(), {"tau_s", "adev", "n"});
    for (std::size_t i = 0; i < adev.taus_s.size(); ++i) {
      w.row({adev.taus_s[i], adev.adev[i], static_cast<std::uint64_t>(adev.n_samples[i])});
    }
  }
  Json summary{{"version", cli::kVersion},
               {"seed", run.seed},
               {"big_t_s", big_t},
               {"tau_s", probe.mean_tau_s},
               {"detected_atoms", model.detected_atoms},
               {"clock_fraction", prep.clock_fraction},
               {"slope_per_hz", result.slope_per_hz},
               {"final_offset_hz", result.cycles.back().offset_hz},
               {"n_corrections", y.size()}};
  // The loop filters the first few octaves; fit the slope past its time constant.
  const double tau0 = result.sample_interval_s();
  const double fit_lo = 16.0 * tau0;
  const double fit_hi = static_cast<double>(y.size()) * tau0 / 4.0;
  summary["adev_fit_tau_s"] = {fit_lo, fit_hi};
  try {
    summary["adev_log_slope"] = clockloop::log_log_slope(adev, fit_lo, fit_hi);
  } catch (const InsufficientData&) {
    summary["adev_log_slope"] = nullptr;
  }
  write_json(run.out / "servo.json", summary);
  return kOk;
}

std::string exact(const angular::Rational& r) {
  const auto num = boost::multiprecision::numerator(r);
  const auto den = boost::multiprecision::denominator(r);
  return den == 1 ? num.str() : num.str() + "/" + den.str();
}

int cmd_strengths(const Run& run, const Json& source) {
  Section root(source, "config");
  cli::check_header(root, "strengths");
  root.finish();
  echo_config(run, root);

  csv::Writer s((run.out / "strengths.csv").string(),
                {"F", "mF", "q", "Fp", "mFp", "strength", "strength_exact"});
  for (const auto& row : angular::strength_table()) {
    const std::string e = exact(row.strength);
    s.row({static_cast<std::int64_t>(row.ground.f.twice() / 2),
           static_cast<std::int64_t>(row.ground.m.twice() / 2), static_cast<std::int64_t>(row.q),
           static_cast<std::int64_t>(row.excited.f.twice() / 2),
           static_cast<std::int64_t>(row.excited.m.twice() / 2),
           row.strength.convert_to<double>(), std::string_view(e)});
  }
  csv::Writer b((run.out / "branching.csv").string(),
                {"Fp", "mFp", "F", "branching", "branching_exact"});
  for (const int fe : angular::cs::excited_f) {
    for (int me = -fe; me <= fe; ++me) {
      for (const int fg : angular::cs::ground_f) {
        const auto r = angular::branching_fraction_exact({fe, me}, fg);
        const std::string e = exact(r);
        b.row({static_cast<std::int64_t>(fe), static_cast<std::int64_t>(me),
               static_cast<std::int64_t>(fg), r.convert_to<double>(), std::string_view(e)});
      }
    }
  }
  return kOk;
}

using Command = int (*)(const Run&, const Json&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Caesium atomic fountain simulator"};
  app.set_version_flag("--version", cli::kVersion);
  app.require_subcommand(1);

  Run run;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands{
      {"fringe", {"Monte Carlo Ramsey pattern and fringe metrics", cmd_fringe}},
      {"leakage", {"Ramsey patterns under microwave leakage", cmd_leakage}},
      {"pump-scan", {"Two-laser selection against photon budget", cmd_pump_scan}},
      {"angle-scan", {"Two-laser selection against repumper polarisation", cmd_angle_scan}},
      {"servo", {"Closed-loop frequency lock and Allan deviation", cmd_servo}},
      {"strengths", {"D2 line strength and branching tables", cmd_strengths}},
  };
  Command chosen = nullptr;
  std::string chosen_name;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", run.config_path, "JSON run configuration")
        ->check(CLI::ExistingFile);
    if (name != "strengths") sub->get_option("--config")->required();
    sub->add_option("--seed", run.seed, "random seed")->required();
    sub->add_option("--out", run.out, "output directory")->required();
    sub->add_option("--threads", run.threads, "worker threads (0: all cores)");
    sub->callback([&chosen, &chosen_name, name = name, cmd = entry.second] {
      chosen = cmd;
      chosen_name = name;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    Json source = run.config_path.empty()
                      ? Json{{"schema", cli::kSchema}, {"kind", "strengths"}}
                      : cli::load_json(run.config_path);
    fs::create_directories(run.out);
    return chosen(run, source);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const LockLost& e) {
    std::cerr << "lock lost at cycle " << e.cycle() << ": " << e.what() << '\n';
    return kLockLost;
  } catch (const FountainTooLow& e) {
    std::cerr << "physics error (FountainTooLow): " << e.what() << '\n';
    return kPhysicsError;
  } catch (const PhysicsError& e) {
    std::cerr << "physics error: " << e.what() << '\n';
    return kPhysicsError;
  } catch (const std::exception& e) {
    std::cerr << chosen_name << ": " << e.what() << '\n';
    return 1;
  }
}
