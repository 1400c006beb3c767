#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dias/arrivals.hpp"
#include "dias/job_model.hpp"
#include "dias/workload.hpp"

namespace dias {

enum class PolicyKind { Preemptive, NonPreemptive, DifferentialApprox, DiasFull };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view name);

struct SprintConfig {
  // Delay after dispatch before sprinting, per class (index = priority - 1);
  // nullopt means the class never sprints.
  std::vector<std::optional<double>> timeouts;
  double speed_factor = 2.5;
  double budget = 0.0;          // joules available at t = 0
  double replenish_rate = 0.0;  // joules per second while not sprinting
  double budget_cap = 0.0;      // joules
};

struct PowerModel {
  double base = 180.0;    // watts while executing at base speed
  double sprint = 270.0;  // watts while sprinting
  double idle = 0.0;      // watts with no job in the engine
};

struct SchedulingPolicy {
  PolicyKind kind = PolicyKind::NonPreemptive;
  std::vector<DropRatios> drop_ratios;  // per class; empty means all zero
  std::optional<SprintConfig> sprint;

  [[nodiscard]] DropRatios drops_for(std::size_t class_index) const noexcept;
  void validate(std::size_t classes) const;
};

SchedulingPolicy preemptive_policy();
SchedulingPolicy non_preemptive_policy();
SchedulingPolicy differential_approx_policy(std::vector<DropRatios> drops);
SchedulingPolicy dias_policy(std::vector<DropRatios> drops, SprintConfig sprint);

struct Scenario {
  ClusterSpec cluster;
  std::vector<ClassWorkload> classes;  // index k - 1 holds priority k
  // Exactly one of `arrivals` and `arrival_trace` drives the run.
  std::optional<MarkedArrivalProcess> arrivals;
  std::vector<ArrivalEvent> arrival_trace;
  SchedulingPolicy policy;
  PowerModel power;
  double horizon = 0.0;
  std::optional<double> warmup;  // default 10% of horizon
  std::uint64_t seed = 1;

  [[nodiscard]] double effective_warmup() const noexcept { return warmup ? *warmup : 0.1 * horizon; }
  void validate() const;
};

// Per-job event log.
struct Attempt {
  double dispatch = 0.0;
  double end = 0.0;
  bool evicted = false;
  double base_work = 0.0;  // seconds of work at base speed drawn for this attempt
  std::optional<double> sprint_start;
  std::optional<double> sprint_end;

  friend bool operator==(const Attempt&, const Attempt&) = default;
};

struct JobRecord {
  std::uint64_t id = 0;
  int job_class = 1;
  double arrival = 0.0;
  std::vector<int> tasks;  // effective task count per stage
  std::vector<Attempt> attempts;
  double completion = 0.0;

  [[nodiscard]] double queueing() const noexcept { return attempts.back().dispatch - arrival; }
  [[nodiscard]] double execution() const noexcept { return completion - attempts.back().dispatch; }
  [[nodiscard]] double response() const noexcept { return completion - arrival; }

  friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

struct ClassMetrics {
  std::size_t jobs = 0;
  double mean_response = 0.0;
  double p95_response = 0.0;
  double mean_queueing = 0.0;
  double mean_execution = 0.0;
};

struct SimulationMetrics {
  std::vector<ClassMetrics> classes;
  double resource_waste = 0.0;  // evicted machine time / busy machine time
  double energy = 0.0;          // joules
  double busy_time = 0.0;
  double sprint_time = 0.0;
  double evicted_time = 0.0;
  double end_time = 0.0;
  std::uint64_t seed = 0;
  std::vector<JobRecord> log;  // every job, warmup included
};

SimulationMetrics run(const Scenario& scenario);

// Mean over replications and 95% normal-approximation half-width.
struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;

  [[nodiscard]] double lower() const noexcept { return mean - half_width; }
  [[nodiscard]] double upper() const noexcept { return mean + half_width; }
};

Estimate estimate(const std::vector<double>& samples);
bool intervals_overlap(const Estimate& a, const Estimate& b) noexcept;

struct AggregatedClass {
  Estimate jobs;
  Estimate mean_response;
  Estimate p95_response;
  Estimate mean_queueing;
  Estimate mean_execution;
};

struct AggregatedMetrics {
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::vector<AggregatedClass> classes;
  Estimate resource_waste;
  Estimate energy;
  Estimate busy_time;
  Estimate sprint_time;
};

AggregatedMetrics aggregate(const std::vector<SimulationMetrics>& runs);

// Runs seeds seed, seed + 1, ... and keeps the per-run results.
std::vector<SimulationMetrics> run_replications(const Scenario& scenario, int n_runs);
AggregatedMetrics replicate(const Scenario& scenario, int n_runs);

}  // namespace dias
