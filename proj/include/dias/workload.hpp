#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dias/job_model.hpp"
#include "dias/phase_type.hpp"
#include "dias/rng.hpp"

namespace dias {

// Duration distribution for one piece of simulated work: a fixed value or a
// phase-type draw.
class TimeDist {
 public:
  static TimeDist deterministic(double seconds);
  static TimeDist phase_type(PhaseTypeDist dist);
  static TimeDist exponential(double rate) { return phase_type(make_exponential(rate)); }
  static TimeDist zero() { return deterministic(0.0); }

  double sample(Rng& rng) const;
  [[nodiscard]] double mean() const;
  [[nodiscard]] TimeDist scaled(double factor) const;

  [[nodiscard]] bool is_deterministic() const noexcept { return std::holds_alternative<double>(impl_); }
  [[nodiscard]] bool is_zero() const noexcept { return is_deterministic() && std::get<double>(impl_) == 0.0; }
  [[nodiscard]] const PhaseTypeDist* ph() const noexcept { return std::get_if<PhaseTypeDist>(&impl_); }
  // True for a one-phase PH without an atom at zero.
  [[nodiscard]] bool is_exponential() const noexcept;

 private:
  explicit TimeDist(std::variant<double, PhaseTypeDist> impl) : impl_(std::move(impl)) {}
  std::variant<double, PhaseTypeDist> impl_;
};

enum class DropTarget { None, Map, Reduce };

// One synchronised parallel stage of a job. Tasks run on the cluster slots;
// when `waves` is non-empty every wave takes a single drawn duration instead
// of per-task draws.
struct StageSpec {
  std::string name;
  CountPmf tasks = CountPmf::point(1);
  TimeDist task_time = TimeDist::exponential(1.0);
  std::vector<TimeDist> waves;
  DropTarget drop = DropTarget::None;
  TimeDist gap_after = TimeDist::zero();
};

// How jobs of one priority class are realised: a setup period followed by
// stages in series. The standard shape is setup, map, shuffle gap, reduce.
struct ClassWorkload {
  std::string name;
  TimeDist setup = TimeDist::exponential(1.0);
  std::vector<StageSpec> stages;
  // Mean setup time when the map drop ratio is at its maximum; the setup
  // distribution is rescaled linearly in between.
  std::optional<double> overhead_at_90;

  void validate() const;
};

struct DropRatios {
  double map = 0.0;
  double reduce = 0.0;

  friend bool operator==(const DropRatios&, const DropRatios&) = default;
};

double drop_for(DropTarget target, const DropRatios& ratios) noexcept;

// Setup, map, shuffle, reduce with exponential task times at the class rates.
ClassWorkload task_level_workload(const JobClassSpec& spec, std::string name = {});
// Same shape with every duration fixed at its mean.
ClassWorkload deterministic_workload(const JobClassSpec& spec, std::string name = {});
// Wave-level realisation: task counts from `spec`, durations from the profile.
ClassWorkload wave_level_workload(const JobClassSpec& spec, const WaveProfile& profile,
                                  std::string name = {});

// Setup distribution after applying overhead interpolation for `theta_map`.
TimeDist effective_setup(const ClassWorkload& workload, double theta_map);

// Number of waves a stage may need after dropping (the wave-profile depth).
int max_stage_waves(const StageSpec& stage, double theta, const ClusterSpec& cluster);

// Exact processing-time PH when every piece of the workload is phase-type
// with exponential per-task times (or wave mode); nullopt otherwise.
std::optional<PhaseTypeDist> processing_time_ph(const ClassWorkload& workload, const DropRatios& drops,
                                                const ClusterSpec& cluster);

// Mean processing time. Exact for the cases processing_time_ph covers and for
// deterministic task times; other per-task PHs use an exponential task model
// with the same mean.
double mean_processing_time(const ClassWorkload& workload, const DropRatios& drops,
                            const ClusterSpec& cluster);

}  // namespace dias
