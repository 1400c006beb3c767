#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "dias/error.hpp"
#include "dias/simulator.hpp"
#include "log_checks.hpp"

using namespace dias;

namespace {

// n one-second tasks on a single slot: processing time n, all of it
// droppable map work.
ClassWorkload fixed_job(int tasks) {
  ClassWorkload w;
  w.setup = TimeDist::zero();
  w.stages.push_back(StageSpec{"map", CountPmf::point(tasks), TimeDist::deterministic(1.0), {}, DropTarget::Map,
                               TimeDist::zero()});
  return w;
}

Scenario two_job_trace(SchedulingPolicy policy) {
  Scenario s;
  s.classes = {fixed_job(10), fixed_job(5)};
  s.arrival_trace = {{0.0, 1}, {2.0, 2}};
  s.policy = std::move(policy);
  s.horizon = 100.0;
  s.warmup = 0.0;
  return s;
}

SprintConfig ample_sprint(std::vector<std::optional<double>> timeouts) {
  SprintConfig c;
  c.timeouts = std::move(timeouts);
  c.speed_factor = 2.5;
  c.budget = 1e9;
  c.budget_cap = 1e9;
  return c;
}

const JobRecord& job_of_class(const SimulationMetrics& m, int k) {
  for (const auto& j : m.log) {
    if (j.job_class == k) return j;
  }
  throw std::runtime_error("no job");
}

void expect_clean_log(const Scenario& s, const SimulationMetrics& m) {
  const auto check = testkit::all_log_checks(s, m);
  EXPECT_TRUE(check.ok) << check.detail;
}

ClassWorkload exponential_job(double rate) {
  ClassWorkload w;
  w.setup = TimeDist::zero();
  w.stages.push_back(StageSpec{"service", CountPmf::point(1), TimeDist::exponential(rate), {}, DropTarget::None,
                               TimeDist::zero()});
  return w;
}

}  // namespace

TEST(Simulator, SingleJobInEmptySystem) {
  Scenario s;
  s.classes = {fixed_job(10)};
  s.arrival_trace = {{0.0, 1}};
  s.policy = non_preemptive_policy();
  s.horizon = 50.0;
  s.warmup = 0.0;
  const auto m = run(s);
  EXPECT_DOUBLE_EQ(m.classes[0].mean_response, 10.0);
  EXPECT_DOUBLE_EQ(m.classes[0].mean_queueing, 0.0);
  EXPECT_DOUBLE_EQ(m.resource_waste, 0.0);
  expect_clean_log(s, m);
}

TEST(Simulator, NonPreemptiveHandTrace) {
  const auto s = two_job_trace(non_preemptive_policy());
  const auto m = run(s);
  EXPECT_DOUBLE_EQ(m.classes[1].mean_response, 13.0);
  EXPECT_DOUBLE_EQ(m.classes[1].mean_queueing, 8.0);
  EXPECT_DOUBLE_EQ(m.classes[0].mean_response, 10.0);
  EXPECT_DOUBLE_EQ(m.resource_waste, 0.0);
  expect_clean_log(s, m);
}

TEST(Simulator, PreemptiveRestartHandTrace) {
  const auto s = two_job_trace(preemptive_policy());
  const auto m = run(s);
  EXPECT_DOUBLE_EQ(m.classes[1].mean_response, 5.0);
  EXPECT_DOUBLE_EQ(m.classes[0].mean_response, 17.0);
  EXPECT_DOUBLE_EQ(m.busy_time, 17.0);
  EXPECT_NEAR(m.resource_waste, 2.0 / 17.0, 1e-12);
  const auto& low = job_of_class(m, 1);
  ASSERT_EQ(low.attempts.size(), 2u);
  EXPECT_TRUE(low.attempts[0].evicted);
  EXPECT_DOUBLE_EQ(low.attempts[0].end, 2.0);
  EXPECT_DOUBLE_EQ(low.attempts[1].dispatch, 7.0);
  expect_clean_log(s, m);
}

TEST(Simulator, DifferentialApproxHandTrace) {
  const auto s = two_job_trace(differential_approx_policy({{0.2, 0.0}, {0.0, 0.0}}));
  const auto m = run(s);
  EXPECT_DOUBLE_EQ(m.classes[1].mean_response, 11.0);
  EXPECT_DOUBLE_EQ(m.classes[0].mean_response, 8.0);
  EXPECT_EQ(job_of_class(m, 1).tasks.front(), 8);
  EXPECT_DOUBLE_EQ(m.resource_waste, 0.0);
  expect_clean_log(s, m);
}

TEST(Simulator, DiasImmediateSprint) {
  Scenario s;
  s.classes = {fixed_job(10), fixed_job(5)};
  s.arrival_trace = {{0.0, 2}};
  s.policy = dias_policy({{0.0, 0.0}, {0.0, 0.0}}, ample_sprint({std::nullopt, 0.0}));
  s.horizon = 50.0;
  s.warmup = 0.0;
  const auto m = run(s);
  EXPECT_NEAR(m.classes[1].mean_execution, 2.0, 1e-12);
  EXPECT_NEAR(m.sprint_time, 2.0, 1e-12);
  expect_clean_log(s, m);
}

TEST(Simulator, SprintAfterTimeoutRescalesRemainingWork) {
  Scenario s;
  s.classes = {fixed_job(10)};
  s.arrival_trace = {{0.0, 1}};
  s.policy = dias_policy({}, ample_sprint({2.0}));
  s.horizon = 50.0;
  s.warmup = 0.0;
  const auto m = run(s);
  EXPECT_NEAR(m.classes[0].mean_execution, 2.0 + 8.0 / 2.5, 1e-12);
  expect_clean_log(s, m);
}

TEST(Simulator, SprintStopsWhenBudgetRunsOut) {
  Scenario s;
  s.classes = {fixed_job(10)};
  s.arrival_trace = {{0.0, 1}};
  auto sprint = ample_sprint({0.0});
  sprint.budget = 90.0;  // one second at the 90 W premium
  sprint.budget_cap = 90.0;
  s.policy = dias_policy({}, sprint);
  s.horizon = 50.0;
  s.warmup = 0.0;
  const auto m = run(s);
  EXPECT_NEAR(m.sprint_time, 1.0, 1e-12);
  EXPECT_NEAR(m.classes[0].mean_execution, 1.0 + 7.5, 1e-12);
  expect_clean_log(s, m);
}

TEST(Simulator, EnergyOfAFullSprint) {
  Scenario s;
  s.classes = {fixed_job(100)};
  s.arrival_trace = {{0.0, 1}};
  s.policy = dias_policy({}, ample_sprint({0.0}));
  s.horizon = 40.0;
  s.warmup = 0.0;
  const auto sprinted = run(s);
  EXPECT_NEAR(sprinted.energy, 10800.0, 1e-9);
  s.policy = non_preemptive_policy();
  const auto base = run(s);
  EXPECT_NEAR(base.energy, 18000.0, 1e-9);
  EXPECT_NEAR(sprinted.energy / base.energy, 0.6, 1e-12);
}

TEST(Simulator, BudgetCapsTotalSprintTime) {
  Scenario s;
  s.classes = {fixed_job(100)};
  for (int i = 0; i < 10; ++i) s.arrival_trace.push_back({200.0 * i, 1});
  auto sprint = ample_sprint({0.0});
  sprint.budget = 22000.0;
  sprint.budget_cap = 22000.0;
  sprint.replenish_rate = 0.0;
  s.policy = dias_policy({}, sprint);
  s.horizon = 2000.0;
  s.warmup = 0.0;
  const auto m = run(s);
  EXPECT_NEAR(m.sprint_time, 22000.0 / 90.0, 1e-9);
  expect_clean_log(s, m);
}

TEST(Simulator, ReplenishRefillsUpToCap) {
  // Job 1 drains 45 J; the 100 s idle gap refills 10 J/s but the cap holds
  // the budget at 90 J, so job 2 sprints for one second again.
  Scenario s;
  s.classes = {fixed_job(10)};
  s.arrival_trace = {{0.0, 1}, {100.0, 1}};
  auto sprint = ample_sprint({0.0});
  sprint.budget = 90.0;
  sprint.budget_cap = 90.0;
  sprint.replenish_rate = 10.0;
  s.policy = dias_policy({}, sprint);
  s.horizon = 200.0;
  s.warmup = 0.0;
  const auto m = run(s);
  EXPECT_NEAR(m.sprint_time, 2.0, 1e-12);
  expect_clean_log(s, m);
}

TEST(Simulator, HorizonTooShort) {
  Scenario s;
  s.classes = {fixed_job(1)};
  s.arrival_trace = {{1.0, 1}};
  s.policy = non_preemptive_policy();
  s.horizon = 10.0;
  s.warmup = 5.0;
  try {
    run(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HorizonTooShort);
  }
}

TEST(Simulator, ScenarioValidation) {
  Scenario s = two_job_trace(non_preemptive_policy());
  s.policy.drop_ratios = {{0.2, 0.0}, {0.0, 0.0}};
  EXPECT_THROW(run(s), Error);
  s = two_job_trace(non_preemptive_policy());
  s.arrivals = make_marked_poisson(std::vector<double>{1.0, 1.0});
  EXPECT_THROW(run(s), Error);
  s = two_job_trace(non_preemptive_policy());
  s.warmup = 100.0;
  EXPECT_THROW(run(s), Error);
  s = two_job_trace(non_preemptive_policy());
  s.policy.sprint = ample_sprint({0.0, 0.0});
  EXPECT_THROW(run(s), Error);
}

TEST(Simulator, MM1Response) {
  // Short check; the long-run version lives in the acceptance suite.
  Scenario s;
  s.classes = {exponential_job(1.0)};
  s.arrivals = make_marked_poisson(std::vector<double>{0.5});
  s.policy = non_preemptive_policy();
  s.horizon = 2e5;
  const auto agg = replicate(s, 4);
  EXPECT_NEAR(agg.classes[0].mean_response.mean, 2.0, 0.1);
}

TEST(Simulator, ReplicateOneEqualsRun) {
  Scenario s;
  s.classes = {exponential_job(1.0)};
  s.arrivals = make_marked_poisson(std::vector<double>{0.5});
  s.policy = non_preemptive_policy();
  s.horizon = 1e4;
  const auto single = run(s);
  const auto agg = replicate(s, 1);
  EXPECT_EQ(agg.classes[0].mean_response.mean, single.classes[0].mean_response);
  EXPECT_EQ(agg.classes[0].mean_response.half_width, 0.0);
}

TEST(Simulator, ReplicationsAreIndependentOfThreadCount) {
  Scenario s;
  s.classes = {exponential_job(1.0), exponential_job(2.0)};
  s.arrivals = make_marked_poisson(std::vector<double>{0.3, 0.2});
  s.policy = preemptive_policy();
  s.horizon = 5e3;
  setenv("DIAS_THREADS", "1", 1);
  const auto serial = run_replications(s, 4);
  setenv("DIAS_THREADS", "4", 1);
  const auto parallel = run_replications(s, 4);
  unsetenv("DIAS_THREADS");
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].log, parallel[i].log);
    EXPECT_EQ(serial[i].seed, s.seed + i);
  }
}

TEST(Estimate, HalfWidth) {
  const auto e = estimate({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.half_width, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
  EXPECT_TRUE(intervals_overlap({1.0, 0.5}, {1.4, 0.1}));
  EXPECT_FALSE(intervals_overlap({1.0, 0.1}, {1.4, 0.1}));
}

namespace {

Scenario random_scenario(PolicyKind kind, std::uint64_t seed) {
  Scenario s;
  s.cluster.slots = 4;
  for (int k = 0; k < 3; ++k) {
    ClassWorkload w;
    w.setup = TimeDist::exponential(2.0);
    w.stages.push_back(StageSpec{"map", CountPmf::uniform(2, 12), TimeDist::exponential(1.5 + k), {},
                                 DropTarget::Map, TimeDist::exponential(4.0)});
    w.stages.push_back(StageSpec{"reduce", CountPmf::uniform(1, 4), TimeDist::phase_type(make_erlang(2, 3.0)), {},
                                 DropTarget::Reduce, TimeDist::zero()});
    s.classes.push_back(w);
  }
  std::vector<double> rates{0.05, 0.04, 0.02};
  std::vector<double> means;
  for (const auto& c : s.classes) means.push_back(mean_processing_time(c, {}, s.cluster));
  s.arrivals = calibrate_for_utilization(make_marked_poisson(rates), means, 0.75);
  const std::vector<DropRatios> drops{{0.3, 0.1}, {0.1, 0.0}, {0.0, 0.0}};
  SprintConfig sprint;
  sprint.timeouts = {std::nullopt, 1.0, 0.0};
  sprint.budget = 500.0;
  sprint.budget_cap = 800.0;
  sprint.replenish_rate = 5.0;
  switch (kind) {
    case PolicyKind::Preemptive: s.policy = preemptive_policy(); break;
    case PolicyKind::NonPreemptive: s.policy = non_preemptive_policy(); break;
    case PolicyKind::DifferentialApprox: s.policy = differential_approx_policy(drops); break;
    case PolicyKind::DiasFull: s.policy = dias_policy(drops, sprint); break;
  }
  s.horizon = 3000.0;
  s.seed = seed;
  return s;
}

}  // namespace

class SimulatorProperties : public ::testing::TestWithParam<PolicyKind> {};

TEST_P(SimulatorProperties, LogInvariantsHold) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = random_scenario(GetParam(), seed);
    const auto m = run(s);
    expect_clean_log(s, m);
    if (GetParam() != PolicyKind::Preemptive) EXPECT_EQ(m.resource_waste, 0.0);
    const auto d = testkit::determinism(s);
    EXPECT_TRUE(d.ok) << d.detail;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPolicies, SimulatorProperties,
                         ::testing::Values(PolicyKind::Preemptive, PolicyKind::NonPreemptive,
                                           PolicyKind::DifferentialApprox, PolicyKind::DiasFull));

TEST(SimulatorProperties, WasteOnlyWithEvictions) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = run(random_scenario(PolicyKind::Preemptive, seed));
    bool evicted = false;
    for (const auto& j : m.log) evicted = evicted || j.attempts.size() > 1;
    EXPECT_EQ(m.resource_waste > 0.0, evicted);
  }
}

TEST(SimulatorProperties, ExecutionNonincreasingInMapDrop) {
  // Coupled draws: the same seed gives each job the same raw counts.
  Scenario s;
  s.cluster.slots = 5;
  ClassWorkload w;
  w.setup = TimeDist::deterministic(1.0);
  w.stages.push_back(StageSpec{"map", CountPmf::uniform(5, 40), TimeDist::deterministic(2.0), {}, DropTarget::Map,
                               TimeDist::zero()});
  s.classes = {w};
  s.arrivals = make_marked_poisson(std::vector<double>{0.02});
  s.horizon = 2e4;
  double previous = 1e300;
  for (int k = 0; k <= 9; ++k) {
    s.policy = differential_approx_policy({{k / 10.0, 0.0}});
    const double e = run(s).classes[0].mean_execution;
    EXPECT_LE(e, previous + 1e-12);
    previous = e;
  }
}

TEST(LogChecks, DetectCorruptedLogs) {
  const auto s = two_job_trace(non_preemptive_policy());
  const auto m = run(s);

  auto idle = m;
  for (auto& j : idle.log) {
    if (j.job_class == 2) {
      j.attempts[0].dispatch += 1.0;
      j.attempts[0].end += 1.0;
      j.completion += 1.0;
    }
  }
  EXPECT_FALSE(testkit::work_conservation(idle).ok);

  // A second low job jumping ahead of a waiting high job.
  auto three = two_job_trace(non_preemptive_policy());
  three.arrival_trace = {{0.0, 1}, {1.0, 1}, {2.0, 2}};
  const auto ordered = run(three);
  EXPECT_TRUE(testkit::priority_ordering(ordered).ok);
  auto swapped = ordered;
  swapped.log[1].attempts[0] = {10.0, 20.0, false, 10.0, std::nullopt, std::nullopt};
  swapped.log[1].completion = 20.0;
  swapped.log[2].attempts[0] = {20.0, 25.0, false, 5.0, std::nullopt, std::nullopt};
  swapped.log[2].completion = 25.0;
  EXPECT_TRUE(testkit::work_conservation(swapped).ok);
  EXPECT_FALSE(testkit::priority_ordering(swapped).ok);

  auto energy = m;
  energy.energy += 1.0;
  EXPECT_FALSE(testkit::energy_integral(s, energy).ok);

  auto work = m;
  work.log[0].attempts[0].base_work += 0.5;
  EXPECT_FALSE(testkit::decomposition(s, work).ok);
}
