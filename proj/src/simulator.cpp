#include "dias/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "dias/error.hpp"
#include "dias/parallel.hpp"

namespace dias {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Preemptive: return "preemptive";
    case PolicyKind::NonPreemptive: return "non_preemptive";
    case PolicyKind::DifferentialApprox: return "differential_approx";
    case PolicyKind::DiasFull: return "dias";
  }
  return "unknown";
}

PolicyKind policy_kind_from_string(std::string_view name) {
  if (name == "preemptive" || name == "P") return PolicyKind::Preemptive;
  if (name == "non_preemptive" || name == "NP") return PolicyKind::NonPreemptive;
  if (name == "differential_approx" || name == "DA") return PolicyKind::DifferentialApprox;
  if (name == "dias" || name == "DIAS") return PolicyKind::DiasFull;
  throw Error(ErrorCode::InvalidScenario, "unknown policy kind '" + std::string(name) + "'");
}

DropRatios SchedulingPolicy::drops_for(std::size_t class_index) const noexcept {
  if (class_index < drop_ratios.size()) return drop_ratios[class_index];
  return {};
}

void SchedulingPolicy::validate(std::size_t classes) const {
  if (!drop_ratios.empty() && drop_ratios.size() != classes) {
    throw Error(ErrorCode::InvalidScenario, "drop ratios must be given for every class or none");
  }
  for (const auto& d : drop_ratios) {
    validate_drop_ratio(d.map);
    validate_drop_ratio(d.reduce);
    if ((kind == PolicyKind::Preemptive || kind == PolicyKind::NonPreemptive) &&
        (d.map != 0.0 || d.reduce != 0.0)) {
      throw Error(ErrorCode::InvalidScenario, "preemptive and non-preemptive policies do not drop tasks");
    }
  }
  if (sprint.has_value() != (kind == PolicyKind::DiasFull)) {
    throw Error(ErrorCode::InvalidScenario, "a sprint configuration is required for, and only for, dias");
  }
  if (sprint) {
    if (!(sprint->speed_factor > 1.0)) throw Error(ErrorCode::InvalidScenario, "sprint speed factor must exceed 1");
    if (!(sprint->budget >= 0.0) || !(sprint->replenish_rate >= 0.0) || !(sprint->budget_cap >= 0.0)) {
      throw Error(ErrorCode::InvalidScenario, "sprint budget, replenish rate and cap must be >= 0");
    }
    if (!sprint->timeouts.empty() && sprint->timeouts.size() != classes) {
      throw Error(ErrorCode::InvalidScenario, "sprint timeouts must be given for every class or none");
    }
    for (const auto& t : sprint->timeouts) {
      if (t && !(*t >= 0.0)) throw Error(ErrorCode::InvalidScenario, "sprint timeouts must be >= 0");
    }
  }
}

SchedulingPolicy preemptive_policy() { return {PolicyKind::Preemptive, {}, std::nullopt}; }
SchedulingPolicy non_preemptive_policy() { return {PolicyKind::NonPreemptive, {}, std::nullopt}; }
SchedulingPolicy differential_approx_policy(std::vector<DropRatios> drops) {
  return {PolicyKind::DifferentialApprox, std::move(drops), std::nullopt};
}
SchedulingPolicy dias_policy(std::vector<DropRatios> drops, SprintConfig sprint) {
  return {PolicyKind::DiasFull, std::move(drops), std::move(sprint)};
}

void Scenario::validate() const {
  validate_cluster(cluster);
  if (classes.empty()) throw Error(ErrorCode::InvalidScenario, "scenario has no job classes");
  if (arrivals.has_value() == !arrival_trace.empty()) {
    throw Error(ErrorCode::InvalidScenario, "give either an arrival process or an arrival trace");
  }
  if (arrivals && arrivals->classes() != classes.size()) {
    std::ostringstream os;
    os << "arrival process marks " << arrivals->classes() << " classes but the scenario has "
       << classes.size();
    throw Error(ErrorCode::InvalidScenario, os.str());
  }
  double previous = 0.0;
  for (const auto& a : arrival_trace) {
    if (a.job_class < 1 || static_cast<std::size_t>(a.job_class) > classes.size()) {
      throw Error(ErrorCode::InvalidScenario, "arrival trace references an unknown class");
    }
    if (!(a.time >= previous)) throw Error(ErrorCode::InvalidScenario, "arrival trace must be sorted by time");
    previous = a.time;
  }
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidScenario, "horizon must be positive");
  const double w = effective_warmup();
  if (!(w >= 0.0) || !(w < horizon)) throw Error(ErrorCode::InvalidScenario, "need 0 <= warmup < horizon");
  if (!(power.base >= 0.0) || !(power.idle >= 0.0)) {
    throw Error(ErrorCode::InvalidScenario, "power draws must be >= 0");
  }
  policy.validate(classes.size());
  if (policy.sprint && !(power.sprint > power.base)) {
    throw Error(ErrorCode::InvalidScenario, "sprint power must exceed base power");
  }
  for (std::size_t k = 0; k < classes.size(); ++k) {
    try {
      classes[k].validate();
      const auto drops = policy.drops_for(k);
      for (const auto& stage : classes[k].stages) {
        if (stage.waves.empty()) continue;
        const int depth = max_stage_waves(stage, drop_for(stage.drop, drops), cluster);
        if (static_cast<int>(stage.waves.size()) < depth) {
          std::ostringstream os;
          os << "stage '" << stage.name << "' needs " << depth << " wave profiles, has " << stage.waves.size();
          throw Error(ErrorCode::InvalidScenario, os.str());
        }
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidScenario) throw;
      throw Error(ErrorCode::InvalidScenario, "class " + std::to_string(k + 1) + ": " + e.what());
    }
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum StreamTag : std::uint64_t {
  kArrivalStream = 1,
  kCountStream = 2,
  kSetupStream = 3,
  kTaskStream = 4,
  kGapStream = 5,
};

struct PreparedStage {
  const StageSpec* spec;
  double theta;
  int depth;  // wave-profile depth in wave mode
};

struct PreparedClass {
  TimeDist setup;
  std::vector<PreparedStage> stages;
};

int draw_count(const CountPmf& pmf, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int n = 1; n <= pmf.max_count(); ++n) {
    acc += pmf.prob(n);
    if (u < acc) return n;
  }
  return pmf.max_count();
}

// Greedy list scheduling on `slots` identical slots; returns the makespan.
double list_schedule(const TimeDist& task, int tasks, int slots, Rng& rng) {
  if (tasks <= slots) {
    double longest = 0.0;
    for (int i = 0; i < tasks; ++i) longest = std::max(longest, task.sample(rng));
    return longest;
  }
  std::priority_queue<double, std::vector<double>, std::greater<>> free_at;
  for (int i = 0; i < slots; ++i) free_at.push(0.0);
  double makespan = 0.0;
  for (int i = 0; i < tasks; ++i) {
    const double start = free_at.top();
    free_at.pop();
    const double finish = start + task.sample(rng);
    makespan = std::max(makespan, finish);
    free_at.push(finish);
  }
  return makespan;
}

class Engine {
 public:
  explicit Engine(const Scenario& scenario) : sc_(scenario) {
    for (std::size_t k = 0; k < sc_.classes.size(); ++k) {
      const auto& workload = sc_.classes[k];
      const auto drops = sc_.policy.drops_for(k);
      PreparedClass prepared{effective_setup(workload, drops.map), {}};
      for (const auto& stage : workload.stages) {
        const double theta = drop_for(stage.drop, drops);
        prepared.stages.push_back({&stage, theta, max_stage_waves(stage, theta, sc_.cluster)});
      }
      classes_.push_back(std::move(prepared));
    }
    buffers_.resize(sc_.classes.size());
    if (sc_.policy.sprint) {
      const auto& s = *sc_.policy.sprint;
      budget_ = s.budget;
      budget_cap_ = std::max(s.budget_cap, s.budget);
      premium_ = sc_.power.sprint - sc_.power.base;
    }
  }

  SimulationMetrics run() {
    load_arrivals();
    for (;;) {
      if (!running_ && next_arrival_ == jobs_.size()) break;

      // Ties resolve in this order: completion, budget exhaustion, sprint
      // timer, arrival.
      std::array<double, 4> at{kInf, kInf, kInf, kInf};
      if (running_) {
        const auto& r = *running_;
        at[0] = now_ + std::max(0.0, r.work_total - r.work_done) / r.speed;
        if (r.sprinting && premium_ > 0.0) at[1] = now_ + budget_ / premium_;
        if (r.timer) at[2] = *r.timer;
      }
      if (next_arrival_ < jobs_.size()) at[3] = jobs_[next_arrival_].arrival;
      const auto kind = static_cast<std::size_t>(std::min_element(at.begin(), at.end()) - at.begin());
      advance_to(at[kind]);
      switch (kind) {
        case 0: complete(); break;
        case 1: stop_sprint(); break;
        case 2: fire_timer(); break;
        default: arrive(); break;
      }
      if (!running_) dispatch();
    }
    return collect();
  }

 private:
  struct Running {
    std::size_t job = 0;
    double work_total = 0.0;
    double work_done = 0.0;
    double speed = 1.0;
    bool sprinting = false;
    std::optional<double> timer;
  };

  void load_arrivals() {
    std::vector<ArrivalEvent> events;
    if (sc_.arrivals) {
      Rng rng(derive_seed(sc_.seed, {kArrivalStream}));
      events = sample_stream(*sc_.arrivals, sc_.horizon, rng);
    } else {
      events = sc_.arrival_trace;
    }
    jobs_.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
      JobRecord job;
      job.id = i;
      job.job_class = events[i].job_class;
      job.arrival = events[i].time;
      const auto& prepared = classes_[static_cast<std::size_t>(job.job_class - 1)];
      for (std::size_t s = 0; s < prepared.stages.size(); ++s) {
        Rng rng(derive_seed(sc_.seed, {kCountStream, job.id, s}));
        const auto& stage = prepared.stages[s];
        job.tasks.push_back(effective_tasks(draw_count(stage.spec->tasks, rng), stage.theta));
      }
      jobs_.push_back(std::move(job));
    }
  }

  double attempt_work(const JobRecord& job, std::uint64_t attempt) const {
    const auto& prepared = classes_[static_cast<std::size_t>(job.job_class - 1)];
    Rng setup_rng(derive_seed(sc_.seed, {kSetupStream, job.id, attempt}));
    double total = prepared.setup.sample(setup_rng);
    for (std::size_t s = 0; s < prepared.stages.size(); ++s) {
      const auto& stage = prepared.stages[s];
      const int n = job.tasks[s];
      Rng task_rng(derive_seed(sc_.seed, {kTaskStream, job.id, attempt, s}));
      if (!stage.spec->waves.empty()) {
        const int needed = wave_count(n, sc_.cluster);
        for (int w = stage.depth - needed; w < stage.depth; ++w) {
          total += stage.spec->waves[static_cast<std::size_t>(w)].sample(task_rng);
        }
      } else {
        total += list_schedule(stage.spec->task_time, n, sc_.cluster.slots, task_rng);
      }
      Rng gap_rng(derive_seed(sc_.seed, {kGapStream, job.id, attempt, s}));
      total += stage.spec->gap_after.sample(gap_rng);
    }
    return total;
  }

  void advance_to(double t) {
    const double dt = t - now_;
    if (dt > 0.0) {
      const bool sprinting = running_ && running_->sprinting;
      if (running_) {
        busy_ += dt;
        running_->work_done += dt * running_->speed;
      }
      if (sprinting) {
        sprint_ += dt;
        budget_ = std::max(0.0, budget_ - premium_ * dt);
      } else if (sc_.policy.sprint) {
        budget_ = std::min(budget_cap_, budget_ + sc_.policy.sprint->replenish_rate * dt);
      }
    }
    now_ = t;
  }

  Attempt& current_attempt() { return jobs_[running_->job].attempts.back(); }

  void complete() {
    auto& job = jobs_[running_->job];
    if (running_->sprinting) current_attempt().sprint_end = now_;
    current_attempt().end = now_;
    job.completion = now_;
    running_.reset();
  }

  void stop_sprint() {
    budget_ = 0.0;
    running_->sprinting = false;
    running_->speed = 1.0;
    current_attempt().sprint_end = now_;
  }

  void fire_timer() {
    running_->timer.reset();
    if (budget_ > 0.0) {
      running_->sprinting = true;
      running_->speed = sc_.policy.sprint->speed_factor;
      current_attempt().sprint_start = now_;
    }
  }

  void arrive() {
    const std::size_t id = next_arrival_++;
    const int cls = jobs_[id].job_class;
    buffers_[static_cast<std::size_t>(cls - 1)].push_back(id);
    if (sc_.policy.kind == PolicyKind::Preemptive && running_ &&
        jobs_[running_->job].job_class < cls) {
      evict();
    }
  }

  void evict() {
    auto& attempt = current_attempt();
    attempt.end = now_;
    attempt.evicted = true;
    if (running_->sprinting) attempt.sprint_end = now_;
    evicted_ += now_ - attempt.dispatch;
    const auto& job = jobs_[running_->job];
    buffers_[static_cast<std::size_t>(job.job_class - 1)].push_front(running_->job);
    running_.reset();
  }

  void dispatch() {
    for (std::size_t k = buffers_.size(); k-- > 0;) {
      auto& buffer = buffers_[k];
      if (buffer.empty()) continue;
      const std::size_t id = buffer.front();
      buffer.pop_front();
      auto& job = jobs_[id];
      Attempt attempt;
      attempt.dispatch = now_;
      attempt.base_work = attempt_work(job, job.attempts.size());
      job.attempts.push_back(attempt);
      running_ = Running{};
      running_->job = id;
      running_->work_total = attempt.base_work;
      if (sc_.policy.sprint && k < sc_.policy.sprint->timeouts.size()) {
        if (const auto& timeout = sc_.policy.sprint->timeouts[k]) running_->timer = now_ + *timeout;
      }
      return;
    }
  }

  SimulationMetrics collect() {
    SimulationMetrics m;
    m.seed = sc_.seed;
    m.busy_time = busy_;
    m.sprint_time = sprint_;
    m.evicted_time = evicted_;
    m.end_time = std::max(now_, sc_.horizon);
    m.resource_waste = busy_ > 0.0 ? evicted_ / busy_ : 0.0;
    m.energy = sc_.power.base * (busy_ - sprint_) + sc_.power.sprint * sprint_ +
               sc_.power.idle * (m.end_time - busy_);

    const double warmup = sc_.effective_warmup();
    std::vector<std::vector<const JobRecord*>> per_class(sc_.classes.size());
    std::size_t measured = 0;
    for (const auto& job : jobs_) {
      if (job.arrival < warmup) continue;
      per_class[static_cast<std::size_t>(job.job_class - 1)].push_back(&job);
      ++measured;
    }
    if (measured == 0) {
      throw Error(ErrorCode::HorizonTooShort, "no jobs arrived after the warmup period");
    }
    for (const auto& jobs : per_class) {
      ClassMetrics cm;
      cm.jobs = jobs.size();
      if (jobs.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        cm.mean_response = cm.p95_response = cm.mean_queueing = cm.mean_execution = nan;
      } else {
        std::vector<double> responses;
        responses.reserve(jobs.size());
        double q = 0.0;
        double e = 0.0;
        for (const auto* job : jobs) {
          responses.push_back(job->response());
          q += job->queueing();
          e += job->execution();
        }
        const auto n = static_cast<double>(jobs.size());
        cm.mean_response = std::accumulate(responses.begin(), responses.end(), 0.0) / n;
        cm.mean_queueing = q / n;
        cm.mean_execution = e / n;
        std::sort(responses.begin(), responses.end());
        const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
        cm.p95_response = responses[std::max<std::size_t>(rank, 1) - 1];
      }
      m.classes.push_back(cm);
    }
    m.log = std::move(jobs_);
    return m;
  }

  const Scenario& sc_;
  std::vector<PreparedClass> classes_;
  std::vector<JobRecord> jobs_;
  std::vector<std::deque<std::size_t>> buffers_;
  std::size_t next_arrival_ = 0;
  std::optional<Running> running_;
  double now_ = 0.0;
  double busy_ = 0.0;
  double sprint_ = 0.0;
  double evicted_ = 0.0;
  double budget_ = 0.0;
  double budget_cap_ = 0.0;
  double premium_ = 0.0;
};

}  // namespace

SimulationMetrics run(const Scenario& scenario) {
  scenario.validate();
  return Engine(scenario).run();
}

Estimate estimate(const std::vector<double>& samples) {
  Estimate e;
  if (samples.empty()) return e;
  const auto n = static_cast<double>(samples.size());
  e.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - e.mean) * (x - e.mean);
    e.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return e;
}

bool intervals_overlap(const Estimate& a, const Estimate& b) noexcept {
  return a.lower() <= b.upper() && b.lower() <= a.upper();
}

AggregatedMetrics aggregate(const std::vector<SimulationMetrics>& runs) {
  AggregatedMetrics out;
  out.runs = runs.size();
  if (runs.empty()) return out;
  out.seed = runs.front().seed;
  auto collect = [&](auto&& field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(field(r));
    return estimate(v);
  };
  for (std::size_t k = 0; k < runs.front().classes.size(); ++k) {
    AggregatedClass c;
    c.jobs = collect([k](const SimulationMetrics& r) { return static_cast<double>(r.classes[k].jobs); });
    c.mean_response = collect([k](const SimulationMetrics& r) { return r.classes[k].mean_response; });
    c.p95_response = collect([k](const SimulationMetrics& r) { return r.classes[k].p95_response; });
    c.mean_queueing = collect([k](const SimulationMetrics& r) { return r.classes[k].mean_queueing; });
    c.mean_execution = collect([k](const SimulationMetrics& r) { return r.classes[k].mean_execution; });
    out.classes.push_back(c);
  }
  out.resource_waste = collect([](const SimulationMetrics& r) { return r.resource_waste; });
  out.energy = collect([](const SimulationMetrics& r) { return r.energy; });
  out.busy_time = collect([](const SimulationMetrics& r) { return r.busy_time; });
  out.sprint_time = collect([](const SimulationMetrics& r) { return r.sprint_time; });
  return out;
}

std::vector<SimulationMetrics> run_replications(const Scenario& scenario, int n_runs) {
  if (n_runs < 1) throw Error(ErrorCode::InvalidScenario, "need at least one replication");
  scenario.validate();
  std::vector<SimulationMetrics> results(static_cast<std::size_t>(n_runs));
  parallel_for(results.size(), [&](std::size_t i) {
    Scenario copy = scenario;
    copy.seed = scenario.seed + i;
    results[i] = Engine(copy).run();
  });
  return results;
}

AggregatedMetrics replicate(const Scenario& scenario, int n_runs) {
  return aggregate(run_replications(scenario, n_runs));
}

}  // namespace dias
