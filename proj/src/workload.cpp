#include "dias/workload.hpp"

#include <cmath>
#include <sstream>

#include "dias/error.hpp"

namespace dias {

TimeDist TimeDist::deterministic(double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
    throw Error(ErrorCode::InvalidDistribution, "deterministic duration must be >= 0");
  }
  return TimeDist(seconds);
}

TimeDist TimeDist::phase_type(PhaseTypeDist dist) { return TimeDist(std::move(dist)); }

double TimeDist::sample(Rng& rng) const {
  if (const auto* d = ph()) return d->sample(rng);
  return std::get<double>(impl_);
}

double TimeDist::mean() const {
  if (const auto* d = ph()) return dias::mean(*d);
  return std::get<double>(impl_);
}

TimeDist TimeDist::scaled(double factor) const {
  if (const auto* d = ph()) return TimeDist(d->scaled(factor));
  return TimeDist(std::get<double>(impl_) * factor);
}

bool TimeDist::is_exponential() const noexcept {
  const auto* d = ph();
  return d != nullptr && d->phases() == 1 && d->mass_at_zero() <= PhaseTypeDist::kTolerance;
}

double drop_for(DropTarget target, const DropRatios& ratios) noexcept {
  switch (target) {
    case DropTarget::Map: return ratios.map;
    case DropTarget::Reduce: return ratios.reduce;
    case DropTarget::None: break;
  }
  return 0.0;
}

void ClassWorkload::validate() const {
  if (stages.empty()) throw Error(ErrorCode::InvalidSpec, "class '" + name + "' has no stages");
  if (overhead_at_90 && !(*overhead_at_90 > 0.0)) {
    throw Error(ErrorCode::NonPositiveRate, "overhead at maximum drop must be positive");
  }
  if (overhead_at_90 && !(setup.mean() > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "overhead interpolation needs a setup with positive mean");
  }
}

ClassWorkload task_level_workload(const JobClassSpec& spec, std::string name) {
  spec.validate();
  ClassWorkload w;
  w.name = std::move(name);
  w.setup = TimeDist::exponential(spec.mu_overhead);
  w.stages.push_back(StageSpec{"map", spec.map_counts, TimeDist::exponential(spec.mu_map), {},
                               DropTarget::Map, TimeDist::exponential(spec.mu_shuffle)});
  w.stages.push_back(StageSpec{"reduce", spec.reduce_counts, TimeDist::exponential(spec.mu_reduce), {},
                               DropTarget::Reduce, TimeDist::zero()});
  return w;
}

ClassWorkload deterministic_workload(const JobClassSpec& spec, std::string name) {
  spec.validate();
  ClassWorkload w;
  w.name = std::move(name);
  w.setup = TimeDist::deterministic(1.0 / spec.mu_overhead);
  w.stages.push_back(StageSpec{"map", spec.map_counts, TimeDist::deterministic(1.0 / spec.mu_map), {},
                               DropTarget::Map, TimeDist::deterministic(1.0 / spec.mu_shuffle)});
  w.stages.push_back(StageSpec{"reduce", spec.reduce_counts,
                               TimeDist::deterministic(1.0 / spec.mu_reduce), {}, DropTarget::Reduce,
                               TimeDist::zero()});
  return w;
}

ClassWorkload wave_level_workload(const JobClassSpec& spec, const WaveProfile& profile,
                                  std::string name) {
  ClassWorkload w;
  w.name = std::move(name);
  w.setup = TimeDist::phase_type(profile.setup);
  std::vector<TimeDist> map_waves;
  for (const auto& d : profile.map_waves) map_waves.push_back(TimeDist::phase_type(d));
  std::vector<TimeDist> reduce_waves;
  for (const auto& d : profile.reduce_waves) reduce_waves.push_back(TimeDist::phase_type(d));
  w.stages.push_back(StageSpec{"map", spec.map_counts, TimeDist::exponential(spec.mu_map),
                               std::move(map_waves), DropTarget::Map,
                               TimeDist::phase_type(profile.shuffle)});
  w.stages.push_back(StageSpec{"reduce", spec.reduce_counts, TimeDist::exponential(spec.mu_reduce),
                               std::move(reduce_waves), DropTarget::Reduce, TimeDist::zero()});
  return w;
}

TimeDist effective_setup(const ClassWorkload& workload, double theta_map) {
  if (!workload.overhead_at_90) return workload.setup;
  const double base = workload.setup.mean();
  const double target = overhead_mean(theta_map, base, *workload.overhead_at_90);
  return workload.setup.scaled(target / base);
}

int max_stage_waves(const StageSpec& stage, double theta, const ClusterSpec& cluster) {
  return wave_count(effective_tasks(stage.tasks.max_count(), theta), cluster);
}

namespace {

void require_wave_depth(const StageSpec& stage, int depth) {
  if (static_cast<int>(stage.waves.size()) < depth) {
    std::ostringstream os;
    os << "stage '" << stage.name << "' has " << stage.waves.size() << " wave profiles but may need "
       << depth << " waves";
    throw Error(ErrorCode::ProfileTooShort, os.str());
  }
}

// Chain of the last d of D waves, entered with probability q(d).
std::optional<PhaseTypeDist> wave_stage_ph(const StageSpec& stage, double theta,
                                           const ClusterSpec& cluster) {
  const auto q = wave_probabilities(stage.tasks, theta, cluster);
  const int depth = static_cast<int>(q.size());
  require_wave_depth(stage, depth);
  std::vector<const PhaseTypeDist*> waves;
  for (int w = 0; w < depth; ++w) {
    const auto* d = stage.waves[static_cast<std::size_t>(w)].ph();
    if (d == nullptr) return std::nullopt;
    waves.push_back(d);
  }
  std::vector<Eigen::Index> offset(waves.size() + 1, 0);
  for (std::size_t i = 0; i < waves.size(); ++i) {
    offset[i + 1] = offset[i] + static_cast<Eigen::Index>(waves[i]->phases());
  }
  const Eigen::Index dim = offset.back();
  Eigen::VectorXd initial = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(waves[i]->phases());
    a.block(offset[i], offset[i], n, n) = waves[i]->subgen();
    if (i + 1 < waves.size()) {
      const auto m = static_cast<Eigen::Index>(waves[i + 1]->phases());
      a.block(offset[i], offset[i + 1], n, m) = waves[i]->exit() * waves[i + 1]->initial().transpose();
    }
  }
  for (int d = 1; d <= depth; ++d) {
    const std::size_t entry = static_cast<std::size_t>(depth - d);
    initial.segment(offset[entry], static_cast<Eigen::Index>(waves[entry]->phases())) +=
        q[static_cast<std::size_t>(d - 1)] * waves[entry]->initial();
  }
  return PhaseTypeDist(std::move(initial), std::move(a));
}

struct PhAccumulator {
  std::optional<PhaseTypeDist> acc;
  bool representable = true;

  void add(const TimeDist& piece) {
    if (piece.is_zero()) return;
    if (const auto* d = piece.ph()) {
      add(*d);
    } else {
      representable = false;
    }
  }
  void add(const PhaseTypeDist& d) { acc = acc ? convolve(*acc, d) : d; }
};

}  // namespace

std::optional<PhaseTypeDist> processing_time_ph(const ClassWorkload& workload, const DropRatios& drops,
                                                const ClusterSpec& cluster) {
  workload.validate();
  PhAccumulator total;
  total.add(effective_setup(workload, drops.map));
  for (const auto& stage : workload.stages) {
    const double theta = drop_for(stage.drop, drops);
    if (!stage.waves.empty()) {
      auto ph = wave_stage_ph(stage, theta, cluster);
      if (!ph) return std::nullopt;
      total.add(*ph);
    } else if (stage.task_time.is_exponential()) {
      const double rate = -stage.task_time.ph()->subgen()(0, 0);
      total.add(build_stage_ph(stage.tasks, theta, rate, cluster));
    } else {
      return std::nullopt;
    }
    total.add(stage.gap_after);
    if (!total.representable) return std::nullopt;
  }
  if (!total.representable) return std::nullopt;
  return total.acc;
}

double mean_processing_time(const ClassWorkload& workload, const DropRatios& drops,
                            const ClusterSpec& cluster) {
  workload.validate();
  double total = effective_setup(workload, drops.map).mean();
  for (const auto& stage : workload.stages) {
    const double theta = drop_for(stage.drop, drops);
    if (!stage.waves.empty()) {
      const auto q = wave_probabilities(stage.tasks, theta, cluster);
      const int depth = static_cast<int>(q.size());
      require_wave_depth(stage, depth);
      for (int d = 1; d <= depth; ++d) {
        double waves_mean = 0.0;
        for (int w = depth - d; w < depth; ++w) waves_mean += stage.waves[static_cast<std::size_t>(w)].mean();
        total += q[static_cast<std::size_t>(d - 1)] * waves_mean;
      }
    } else if (stage.task_time.is_deterministic()) {
      const double task = stage.task_time.mean();
      for (int n = 1; n <= stage.tasks.max_count(); ++n) {
        total += stage.tasks.prob(n) * wave_count(effective_tasks(n, theta), cluster) * task;
      }
    } else {
      total += mean(build_stage_ph(stage.tasks, theta, 1.0 / stage.task_time.mean(), cluster));
    }
    total += stage.gap_after.mean();
  }
  return total;
}

}  // namespace dias
