#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fountain/detection.hpp"

using namespace fountain;
using namespace fountain::detection;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments signal_moments(const DetectionConfig& cfg, double p, std::uint64_t n, int draws,
                       std::uint64_t seed) {
  double s = 0.0, ss = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double v = measure_cycle(p, n, cfg, stream_key(seed, 0, k)).signal;
    s += v;
    ss += v * v;
  }
  Moments m;
  m.mean = s / draws;
  m.var = ss / draws - m.mean * m.mean;
  return m;
}

}  // namespace

TEST(MeasureCycle, ZeroProbabilityGivesZeroCounts) {
  const DetectionConfig cfg;
  for (std::uint64_t s = 0; s < 50; ++s) {
    EXPECT_EQ(measure_cycle(0.0, 10000, cfg, s).n4_counts, 0.0);
  }
}

TEST(MeasureCycle, LargeAtomNumberConvergesToProbability) {
  DetectionConfig cfg;
  cfg.arrival_jitter_frac = 0.0;
  cfg.collection_efficiency = 1.0;
  cfg.photons_per_atom = 1e6;
  const std::uint64_t n = 100000000;
  const double p = 0.3;
  const double s = measure_cycle(p, n, cfg, 5).signal;
  EXPECT_LT(std::abs(s - p) / p, 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(MeasureCycle, VarianceMatchesNoiseBudget) {
  // No jitter: Var(signal) ~ [p(1-p) + p/k + p^2/k] / n with k photons per atom collected.
  DetectionConfig cfg;
  cfg.arrival_jitter_frac = 0.0;
  const double p = 0.4;
  const std::uint64_t n = 20000;
  const double k = cfg.photons_per_atom * cfg.collection_efficiency;
  const double expected = (p * (1 - p) + p / k + p * p / k) / static_cast<double>(n);
  const Moments m = signal_moments(cfg, p, n, 20000, 17);
  EXPECT_NEAR(m.mean, p, 5.0 * std::sqrt(expected / 20000));
  EXPECT_NEAR(m.var, expected, 0.05 * expected);
}

TEST(MeasureCycle, JitterVarianceFollowsCommonFraction) {
  DetectionConfig cfg;
  cfg.projection_noise = false;
  cfg.photon_noise = false;
  cfg.arrival_jitter_frac = 0.01;
  cfg.single_probe_common_fraction = 0.25;
  const double p = 0.5;
  const Moments m = signal_moments(cfg, p, 1000, 20000, 3);
  // ratio of two factors with independent parts j sqrt(1-c): relative var 2 j^2 (1-c)
  const double expected = p * p * 2 * 1e-4 * 0.75;
  EXPECT_NEAR(m.var, expected, 0.05 * expected);
}

TEST(MeasureCycle, DualProbeIsUnbiased) {
  DetectionConfig cfg;
  cfg.normalization_mode = NormalizationMode::dual_probe;
  const int draws = 10000;
  for (const double p : {0.1, 0.5, 0.9}) {
    const auto m = signal_moments(cfg, p, 20000, draws, 17);
    EXPECT_LT(std::abs(m.mean - p), 3.0 * std::sqrt(m.var / draws)) << p;
  }
}

TEST(MeasureCycle, DeterministicForSeed) {
  const DetectionConfig cfg;
  const auto a = measure_cycle(0.2, 50000, cfg, 99);
  const auto b = measure_cycle(0.2, 50000, cfg, 99);
  EXPECT_EQ(a.signal, b.signal);
  EXPECT_EQ(a.n4_counts, b.n4_counts);
  EXPECT_NE(a.signal, measure_cycle(0.2, 50000, cfg, 100).signal);
}

TEST(MeasureCycle, RejectsBadInputs) {
  const DetectionConfig cfg;
  EXPECT_THROW(measure_cycle(1.5, 10, cfg, 0), std::invalid_argument);
  EXPECT_THROW(measure_cycle(0.5, 0, cfg, 0), std::invalid_argument);
  DetectionConfig bad;
  bad.collection_efficiency = 0.0;
  EXPECT_THROW(measure_cycle(0.5, 10, bad, 0), std::invalid_argument);
}

TEST(Snr, NoNoiseIsUnbounded) {
  DetectionConfig cfg;
  cfg.arrival_jitter_frac = 0.0;
  cfg.projection_noise = false;
  cfg.photon_noise = false;
  const auto e = snr_estimate(cfg, 0.3, 1000, 10, 20, 1);
  EXPECT_TRUE(e.unbounded);
  EXPECT_TRUE(std::isinf(e.snr));
}

TEST(Snr, DoublingCyclesGainsRootTwo) {
  const DetectionConfig cfg;
  const auto ten = snr_estimate(cfg, 0.14, 200000, 10, 2000, 8);
  const auto twenty = snr_estimate(cfg, 0.14, 200000, 20, 2000, 9);
  EXPECT_NEAR(twenty.snr / ten.snr, std::sqrt(2.0), 0.1);
}

TEST(Snr, DualProbeBeatsSingleProbe) {
  DetectionConfig single;
  DetectionConfig dual = single;
  dual.normalization_mode = NormalizationMode::dual_probe;
  const auto a = snr_estimate(single, 0.14, 1000000, 10, 400, 4);
  const auto b = snr_estimate(dual, 0.14, 1000000, 10, 400, 4);
  EXPECT_GT(b.snr, a.snr);
}

TEST(Snr, IndependentOfThreadCount) {
  const DetectionConfig cfg;
  const auto a = snr_estimate(cfg, 0.14, 100000, 10, 64, 21, 1);
  const auto b = snr_estimate(cfg, 0.14, 100000, 10, 64, 21, 6);
  EXPECT_EQ(a.snr, b.snr);
  EXPECT_EQ(a.mean, b.mean);
}
