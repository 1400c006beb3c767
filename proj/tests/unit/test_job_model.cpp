#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dias/error.hpp"
#include "dias/job_model.hpp"
#include "random_ph.hpp"

using namespace dias;

namespace {

JobClassSpec unit_spec(int maps, int reduces) {
  JobClassSpec s;
  s.map_counts = CountPmf::point(maps);
  s.reduce_counts = CountPmf::point(reduces);
  return s;
}

// Sum of exponential holding times along the single path of the chain for
// fixed task counts: a stage with n tasks spends 1/(min(j, C) mu) in the
// state with j tasks left.
double chain_mean(int maps, int reduces, int slots, double mu_o, double mu_m, double mu_s, double mu_r) {
  double total = 1.0 / mu_o + 1.0 / mu_s;
  for (int j = 1; j <= maps; ++j) total += 1.0 / (std::min(j, slots) * mu_m);
  for (int j = 1; j <= reduces; ++j) total += 1.0 / (std::min(j, slots) * mu_r);
  return total;
}

// ceil(n (10 - k) / 10) in integers, for theta = k / 10.
int kept_tasks(int n, int tenths) { return (n * (10 - tenths) + 9) / 10; }

}  // namespace

TEST(EffectiveTasks, Examples) {
  EXPECT_EQ(effective_tasks(50, 0.2), 40);
  EXPECT_EQ(effective_tasks(3, 0.0), 3);
  EXPECT_EQ(effective_tasks(3, 0.4), 2);
  EXPECT_EQ(effective_tasks(10, 0.7), 3);
  EXPECT_EQ(effective_tasks(1, 0.9), 1);
}

TEST(EffectiveTasks, MatchesIntegerOracleAndIsMonotone) {
  for (int n = 1; n <= 200; ++n) {
    int previous = n + 1;
    for (int k = 0; k <= 9; ++k) {
      const int got = effective_tasks(n, k / 10.0);
      EXPECT_EQ(got, kept_tasks(n, k)) << n << " " << k;
      EXPECT_LE(got, previous);
      EXPECT_GE(got, 1);
      previous = got;
    }
  }
}

TEST(EffectiveTasks, RejectsOutOfRangeDrop) {
  EXPECT_THROW(effective_tasks(5, 0.95), Error);
  EXPECT_THROW(effective_tasks(5, -0.1), Error);
}

TEST(WaveCount, Examples) {
  EXPECT_EQ(wave_count(40, ClusterSpec{20}), 2);
  EXPECT_EQ(wave_count(1, ClusterSpec{20}), 1);
  EXPECT_EQ(wave_count(41, ClusterSpec{20}), 3);
}

TEST(CountPmf, Validation) {
  EXPECT_THROW(CountPmf({0.5, 0.4}), Error);
  EXPECT_THROW(CountPmf({-0.1, 1.1}), Error);
  EXPECT_NEAR(CountPmf::uniform(21, 25).mean(), 23.0, 1e-12);
  EXPECT_EQ(CountPmf({0.5, 0.5, 0.0}).max_count(), 2);
}

TEST(TaskLevel, ExamplesFromChainSums) {
  EXPECT_NEAR(mean(build_task_level_ph(unit_spec(3, 1), ClusterSpec{2})), 5.0, 1e-9);
  EXPECT_NEAR(mean(build_task_level_ph(unit_spec(1, 1), ClusterSpec{4})), 4.0, 1e-9);
  auto dropped = unit_spec(3, 1);
  dropped.theta_map = 0.4;
  EXPECT_NEAR(mean(build_task_level_ph(dropped, ClusterSpec{2})), 4.5, 1e-9);
}

TEST(TaskLevel, DimensionAndStructure) {
  auto spec = unit_spec(3, 1);
  const auto d = build_task_level_ph(spec, ClusterSpec{2});
  EXPECT_EQ(d.phases(), 3u + 1u + 2u);
  EXPECT_DOUBLE_EQ(d.initial()(0), 1.0);
  // O -> M_3 at mu_o, M_3 -> M_2 at C mu_m, M_2 -> M_1 at 2 mu_m.
  EXPECT_DOUBLE_EQ(d.subgen()(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(d.subgen()(1, 2), 2.0);
  EXPECT_DOUBLE_EQ(d.subgen()(2, 3), 2.0);
  EXPECT_DOUBLE_EQ(d.subgen()(3, 4), 1.0);
}

TEST(TaskLevel, AliasedCountsShareAPhase) {
  JobClassSpec s;
  s.map_counts = CountPmf({0.0, 0.0, 0.0, 0.5, 0.5});  // 4 or 5 tasks
  s.theta_map = 0.2;                                    // both keep 4
  const auto d = build_task_level_ph(s, ClusterSpec{2});
  EXPECT_EQ(d.phases(), 4u + 1u + 2u);
  EXPECT_NEAR(d.subgen()(0, 1), 1.0, 1e-12);
}

TEST(TaskLevel, MeanMatchesChainOracleOnGrid) {
  for (int t = 1; t <= 10; ++t) {
    for (int u = 1; u <= 5; ++u) {
      for (int c = 1; c <= 4; ++c) {
        for (int k : {0, 2, 4}) {
          auto s = unit_spec(t, u);
          s.mu_overhead = 0.5;
          s.mu_map = 1.5;
          s.mu_shuffle = 2.0;
          s.mu_reduce = 0.8;
          s.theta_map = k / 10.0;
          s.theta_reduce = k / 10.0;
          const double expected =
              chain_mean(kept_tasks(t, k), kept_tasks(u, k), c, 0.5, 1.5, 2.0, 0.8);
          EXPECT_NEAR(mean(build_task_level_ph(s, ClusterSpec{c})), expected, 1e-9);
        }
      }
    }
  }
}

TEST(TaskLevel, MeanNonincreasingInDropRatios) {
  JobClassSpec s;
  s.map_counts = CountPmf::uniform(5, 30);
  s.reduce_counts = CountPmf::uniform(1, 12);
  for (int c : {1, 4, 20}) {
    double previous = 1e300;
    for (int k = 0; k <= 9; ++k) {
      s.theta_map = k / 10.0;
      const double m = mean(build_task_level_ph(s, ClusterSpec{c}));
      EXPECT_LE(m, previous + 1e-12);
      previous = m;
    }
    s.theta_map = 0.0;
    previous = 1e300;
    for (int k = 0; k <= 9; ++k) {
      s.theta_reduce = k / 10.0;
      const double m = mean(build_task_level_ph(s, ClusterSpec{c}));
      EXPECT_LE(m, previous + 1e-12);
      previous = m;
    }
    s.theta_reduce = 0.0;
  }
}

TEST(TaskLevel, MonteCarloMean) {
  JobClassSpec s;
  s.map_counts = CountPmf::uniform(3, 12);
  s.reduce_counts = CountPmf::uniform(1, 4);
  s.mu_map = 2.0;
  const auto d = build_task_level_ph(s, ClusterSpec{4});
  Rng rng(17);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += d.sample(rng);
  EXPECT_NEAR(sum / n, mean(d), 0.02 * mean(d));
}

TEST(TaskLevel, StagePhMatchesTaskLevelDifference) {
  JobClassSpec s;
  s.map_counts = CountPmf::uniform(2, 9);
  s.mu_map = 1.7;
  const ClusterSpec cluster{3};
  const double stage = mean(build_stage_ph(s.map_counts, 0.2, 1.7, cluster));
  s.theta_map = 0.2;
  const double job = mean(build_task_level_ph(s, cluster));
  EXPECT_NEAR(job - (1.0 + 1.0 + 1.0), stage, 1e-9);
}

TEST(WaveProbabilities, Examples) {
  const ClusterSpec c20{20};
  const auto uniform = CountPmf::uniform(1, 40);
  auto q = wave_probabilities(uniform, 0.0, c20);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_NEAR(q[0], 0.5, 1e-12);
  EXPECT_NEAR(q[1], 0.5, 1e-12);
  q = wave_probabilities(uniform, 0.2, c20);
  EXPECT_NEAR(q[0], 0.625, 1e-12);
  EXPECT_NEAR(q[1], 0.375, 1e-12);
  for (double theta : {0.0, 0.3, 0.9}) {
    q = wave_probabilities(CountPmf::point(20), theta, c20);
    EXPECT_NEAR(q[0], 1.0, 1e-12);
  }
}

TEST(WaveProbabilities, BruteForceOracle) {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int support = 1 + static_cast<int>(rng.uniform() * 60);
    const auto pmf = testkit::random_pmf(rng, support);
    for (int c : {5, 20}) {
      for (int k : {0, 1, 2, 4}) {
        const auto q = wave_probabilities(pmf, k / 10.0, ClusterSpec{c});
        std::vector<double> expected(q.size() + 1, 0.0);
        for (int t = 1; t <= support; ++t) {
          const int waves = (kept_tasks(t, k) + c - 1) / c;
          ASSERT_LE(static_cast<std::size_t>(waves), q.size());
          expected[static_cast<std::size_t>(waves - 1)] += pmf.prob(t);
        }
        double total = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) {
          EXPECT_NEAR(q[d], expected[d], 1e-12);
          total += q[d];
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
    }
  }
}

TEST(WaveLevel, PointMassTwoWavesIsSixStageSeries) {
  const auto e = make_exponential(1.0);
  const WaveProfile profile{e, {e, e}, e, {e, e}};
  const std::vector<double> q{0.0, 1.0};
  const auto d = build_wave_level_ph(profile, q, q);
  EXPECT_EQ(d.phases(), 6u);
  EXPECT_NEAR(mean(d), 6.0, 1e-9);
  const auto series = convolve(convolve(convolve(e, e), convolve(e, e)), convolve(e, e));
  for (double t : {1.0, 4.0, 9.0}) EXPECT_NEAR(cdf(d, t), cdf(series, t), 1e-9);
}

TEST(WaveLevel, ErlangStages) {
  const auto e = make_erlang(2, 2.0);
  const WaveProfile profile{e, {e}, e, {e}};
  const std::vector<double> q{1.0};
  EXPECT_NEAR(mean(build_wave_level_ph(profile, q, q)), 4.0, 1e-9);
}

TEST(WaveLevel, MixedWaveCounts) {
  const auto fast = make_exponential(1000.0);
  const auto e = make_exponential(1.0);
  const WaveProfile profile{fast, {e, e}, fast, {fast}};
  const std::vector<double> qm{0.5, 0.5};
  const std::vector<double> qr{1.0};
  EXPECT_NEAR(mean(build_wave_level_ph(profile, qm, qr)) - 3.0 / 1000.0, 1.5, 0.01);
}

TEST(WaveLevel, OneWaveJobsUseTheLastProfile) {
  const WaveProfile profile{make_exponential(1.0), {make_exponential(1.0), make_exponential(0.25)},
                            make_exponential(1.0), {make_exponential(1.0)}};
  const std::vector<double> qm{0.5, 0.5};
  const std::vector<double> qr{1.0};
  // One-wave jobs run only wave 2 (mean 4), two-wave jobs run both (mean 5).
  EXPECT_NEAR(mean(build_wave_level_ph(profile, qm, qr)), 1.0 + 4.5 + 1.0 + 1.0, 1e-9);
}

TEST(WaveLevel, ProfileTooShort) {
  const auto e = make_exponential(1.0);
  const WaveProfile profile{e, {e}, e, {e}};
  const std::vector<double> q{0.5, 0.5};
  try {
    build_wave_level_ph(profile, q, std::vector<double>{1.0});
    FAIL() << "expected ProfileTooShort";
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ProfileTooShort);
  }
}

TEST(WaveLevel, AgreesWithTaskLevelForSingleWaves) {
  // t, u <= C: one wave each; give each wave an exponential with the stage's
  // task-level mean.
  for (int t : {1, 3, 5}) {
    for (int u : {1, 2}) {
      const ClusterSpec cluster{5};
      auto spec = unit_spec(t, u);
      spec.mu_map = 1.3;
      spec.mu_reduce = 0.7;
      const double map_mean = mean(build_stage_ph(spec.map_counts, 0.0, 1.3, cluster));
      const double reduce_mean = mean(build_stage_ph(spec.reduce_counts, 0.0, 0.7, cluster));
      const WaveProfile profile{make_exponential(1.0), {make_exponential(1.0 / map_mean)}, make_exponential(1.0),
                                {make_exponential(1.0 / reduce_mean)}};
      const std::vector<double> q{1.0};
      EXPECT_NEAR(mean(build_wave_level_ph(profile, q, q)), mean(build_task_level_ph(spec, cluster)), 1e-9);
    }
  }
}

TEST(Overhead, Interpolation) {
  EXPECT_DOUBLE_EQ(overhead_mean(0.0, 10.0, 4.0), 10.0);
  EXPECT_NEAR(overhead_mean(0.9, 10.0, 4.0), 4.0, 1e-12);
  EXPECT_NEAR(overhead_mean(0.45, 10.0, 4.0), 7.0, 1e-12);
  EXPECT_THROW(overhead_mean(0.95, 10.0, 4.0), Error);
}

TEST(JobClassSpec, Validation) {
  auto s = unit_spec(2, 2);
  s.mu_map = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s.mu_map = 1.0;
  s.theta_map = 0.91;
  EXPECT_THROW(s.validate(), Error);
  EXPECT_THROW(validate_cluster(ClusterSpec{0}), Error);
}
