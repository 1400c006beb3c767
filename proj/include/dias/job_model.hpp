#pragma once

#include <map>
#include <span>
#include <vector>

#include "dias/phase_type.hpp"

namespace dias {

// Largest drop ratio the model accepts (the maximum profiled drop).
inline constexpr double kMaxDropRatio = 0.9;

// Probability mass over task counts 1..max_count().
class CountPmf {
 public:
  // probs[i] = P(count == i + 1); must sum to 1 within 1e-9.
  explicit CountPmf(std::vector<double> probs);

  static CountPmf point(int count);
  static CountPmf uniform(int lo, int hi);
  static CountPmf from_map(const std::map<int, double>& masses);

  [[nodiscard]] int max_count() const noexcept { return static_cast<int>(probs_.size()); }
  [[nodiscard]] double prob(int count) const noexcept;
  [[nodiscard]] const std::vector<double>& probs() const noexcept { return probs_; }
  [[nodiscard]] double mean() const noexcept;

 private:
  std::vector<double> probs_;
};

struct ClusterSpec {
  int slots = 1;
};

// Per-priority workload description (rates are per second).
struct JobClassSpec {
  int priority = 1;
  CountPmf map_counts = CountPmf::point(1);
  CountPmf reduce_counts = CountPmf::point(1);
  double mu_map = 1.0;
  double mu_reduce = 1.0;
  double mu_overhead = 1.0;
  double mu_shuffle = 1.0;
  double theta_map = 0.0;
  double theta_reduce = 0.0;

  void validate() const;
};

void validate_cluster(const ClusterSpec& cluster);
void validate_drop_ratio(double theta);

// Stage PHs for the wave-level model. map_waves[d] is the (d+1)-th map wave.
struct WaveProfile {
  PhaseTypeDist setup;
  std::vector<PhaseTypeDist> map_waves;
  PhaseTypeDist shuffle;
  std::vector<PhaseTypeDist> reduce_waves;
};

// ceil(n (1 - theta)), the number of tasks left after dropping.
int effective_tasks(int n, double theta);

// ceil(n_eff / C).
int wave_count(int n_eff, const ClusterSpec& cluster);

// Task-level job processing time over phases
//   O, M_{N_m'}, ..., M_1, S, R_{N_r'}, ..., R_1
// where N' is the effective maximum count after dropping.
PhaseTypeDist build_task_level_ph(const JobClassSpec& spec, const ClusterSpec& cluster);

// One parallel stage on its own: entry into M_{t'} with probability of t'
// effective tasks, tasks completing one at a time with min(t, C) busy slots.
PhaseTypeDist build_stage_ph(const CountPmf& counts, double theta, double task_rate,
                             const ClusterSpec& cluster);

// Probability that a stage needs d waves, index d - 1.
std::vector<double> wave_probabilities(const CountPmf& counts, double theta,
                                       const ClusterSpec& cluster);

// Wave-level job processing time. With D waves available for a stage, a job
// needing d waves runs waves D-d+1 .. D. D is the largest wave count that has
// positive probability.
PhaseTypeDist build_wave_level_ph(const WaveProfile& profile, std::span<const double> q_map,
                                  std::span<const double> q_reduce);

// Linear interpolation of the mean setup overhead between no drop and the
// maximum drop ratio.
double overhead_mean(double theta, double overhead_at_0, double overhead_at_90);

}  // namespace dias
