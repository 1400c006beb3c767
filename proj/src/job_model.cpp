#include "dias/job_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dias/error.hpp"

namespace dias {
namespace {

constexpr double kPmfTolerance = 1e-9;

void require_positive_rate(double rate, const char* what) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    std::ostringstream os;
    os << what << " must be positive (got " << rate << ")";
    throw Error(ErrorCode::NonPositiveRate, os.str());
  }
}

void require_full_mass(const PhaseTypeDist& d, const char* what) {
  if (d.mass_at_zero() > PhaseTypeDist::kTolerance) {
    std::ostringstream os;
    os << what << " has an atom at zero; wave-level stages need a full initial vector";
    throw Error(ErrorCode::InvalidDistribution, os.str());
  }
}

int last_positive(std::span<const double> q) {
  int last = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) last = static_cast<int>(i) + 1;
  }
  return last;
}

void validate_wave_pmf(std::span<const double> q, const char* what) {
  double total = 0.0;
  for (double p : q) {
    if (!(p >= 0.0)) throw Error(ErrorCode::InvalidPmf, std::string(what) + " has a negative mass");
    total += p;
  }
  if (std::abs(total - 1.0) > kPmfTolerance) {
    throw Error(ErrorCode::InvalidPmf, std::string(what) + " does not sum to 1");
  }
}

}  // namespace

CountPmf::CountPmf(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorCode::InvalidPmf, "task-count pmf is empty");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::InvalidPmf, "task-count pmf has a negative or non-finite mass");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kPmfTolerance) {
    std::ostringstream os;
    os << "task-count pmf sums to " << total << ", expected 1";
    throw Error(ErrorCode::InvalidPmf, os.str());
  }
  while (probs_.size() > 1 && probs_.back() == 0.0) probs_.pop_back();
}

CountPmf CountPmf::point(int count) {
  if (count < 1) throw Error(ErrorCode::InvalidPmf, "task count must be >= 1");
  std::vector<double> probs(static_cast<std::size_t>(count), 0.0);
  probs.back() = 1.0;
  return CountPmf(std::move(probs));
}

CountPmf CountPmf::uniform(int lo, int hi) {
  if (lo < 1 || hi < lo) throw Error(ErrorCode::InvalidPmf, "uniform task counts need 1 <= lo <= hi");
  std::vector<double> probs(static_cast<std::size_t>(hi), 0.0);
  const double p = 1.0 / static_cast<double>(hi - lo + 1);
  for (int n = lo; n <= hi; ++n) probs[static_cast<std::size_t>(n - 1)] = p;
  return CountPmf(std::move(probs));
}

CountPmf CountPmf::from_map(const std::map<int, double>& masses) {
  if (masses.empty()) throw Error(ErrorCode::InvalidPmf, "task-count pmf is empty");
  if (masses.begin()->first < 1) throw Error(ErrorCode::InvalidPmf, "task counts start at 1");
  std::vector<double> probs(static_cast<std::size_t>(masses.rbegin()->first), 0.0);
  for (const auto& [n, p] : masses) probs[static_cast<std::size_t>(n - 1)] = p;
  return CountPmf(std::move(probs));
}

double CountPmf::prob(int count) const noexcept {
  if (count < 1 || count > max_count()) return 0.0;
  return probs_[static_cast<std::size_t>(count - 1)];
}

double CountPmf::mean() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) m += static_cast<double>(i + 1) * probs_[i];
  return m;
}

void validate_drop_ratio(double theta) {
  if (!(theta >= 0.0 && theta <= kMaxDropRatio + 1e-12)) {
    std::ostringstream os;
    os << "drop ratio " << theta << " outside [0, " << kMaxDropRatio << "]";
    throw Error(ErrorCode::DropRatioOutOfRange, os.str());
  }
}

void validate_cluster(const ClusterSpec& cluster) {
  if (cluster.slots < 1) throw Error(ErrorCode::InvalidSpec, "cluster needs at least one slot");
}

void JobClassSpec::validate() const {
  if (priority < 1) throw Error(ErrorCode::InvalidSpec, "priority must be >= 1");
  require_positive_rate(mu_map, "map task rate");
  require_positive_rate(mu_reduce, "reduce task rate");
  require_positive_rate(mu_overhead, "overhead rate");
  require_positive_rate(mu_shuffle, "shuffle rate");
  validate_drop_ratio(theta_map);
  validate_drop_ratio(theta_reduce);
}

int effective_tasks(int n, double theta) {
  if (n < 1) throw Error(ErrorCode::InvalidSpec, "task count must be >= 1");
  validate_drop_ratio(theta);
  // 10 * (1 - 0.7) is 3.0000000000000004 in binary floating point; snap to the
  // nearest integer before taking the ceiling.
  const double kept = static_cast<double>(n) * (1.0 - theta);
  const double nearest = std::round(kept);
  const double value = std::abs(kept - nearest) < 1e-9 * std::max(1.0, kept) ? nearest : std::ceil(kept);
  return std::max(1, static_cast<int>(value));
}

int wave_count(int n_eff, const ClusterSpec& cluster) {
  validate_cluster(cluster);
  if (n_eff < 1) throw Error(ErrorCode::InvalidSpec, "effective task count must be >= 1");
  return (n_eff + cluster.slots - 1) / cluster.slots;
}

PhaseTypeDist build_stage_ph(const CountPmf& counts, double theta, double task_rate,
                             const ClusterSpec& cluster) {
  validate_cluster(cluster);
  require_positive_rate(task_rate, "task rate");
  const int top = effective_tasks(counts.max_count(), theta);
  const int c = cluster.slots;

  // Phase index i holds "top - i tasks left".
  Eigen::VectorXd initial = Eigen::VectorXd::Zero(top);
  for (int t = 1; t <= counts.max_count(); ++t) {
    const double p = counts.prob(t);
    if (p > 0.0) initial(top - effective_tasks(t, theta)) += p;
  }
  Eigen::MatrixXd subgen = Eigen::MatrixXd::Zero(top, top);
  for (int left = top; left >= 1; --left) {
    const int i = top - left;
    const double rate = static_cast<double>(std::min(left, c)) * task_rate;
    subgen(i, i) = -rate;
    if (left > 1) subgen(i, i + 1) = rate;
  }
  return PhaseTypeDist(std::move(initial), std::move(subgen));
}

PhaseTypeDist build_task_level_ph(const JobClassSpec& spec, const ClusterSpec& cluster) {
  spec.validate();
  validate_cluster(cluster);
  const int c = cluster.slots;
  const int nm = effective_tasks(spec.map_counts.max_count(), spec.theta_map);
  const int nr = effective_tasks(spec.reduce_counts.max_count(), spec.theta_reduce);
  const int dim = nm + nr + 2;

  const int overhead = 0;
  auto map_phase = [&](int left) { return 1 + (nm - left); };
  const int shuffle = 1 + nm;
  auto reduce_phase = [&](int left) { return shuffle + 1 + (nr - left); };

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(dim, dim);

  f(overhead, overhead) = -spec.mu_overhead;
  for (int t = 1; t <= spec.map_counts.max_count(); ++t) {
    const double p = spec.map_counts.prob(t);
    if (p > 0.0) f(overhead, map_phase(effective_tasks(t, spec.theta_map))) += spec.mu_overhead * p;
  }
  for (int t = nm; t >= 1; --t) {
    const double rate = (t >= c ? c : t) * spec.mu_map;
    f(map_phase(t), map_phase(t)) = -rate;
    f(map_phase(t), t > 1 ? map_phase(t - 1) : shuffle) = rate;
  }

  f(shuffle, shuffle) = -spec.mu_shuffle;
  for (int u = 1; u <= spec.reduce_counts.max_count(); ++u) {
    const double p = spec.reduce_counts.prob(u);
    if (p > 0.0) {
      f(shuffle, reduce_phase(effective_tasks(u, spec.theta_reduce))) += spec.mu_shuffle * p;
    }
  }
  for (int u = nr; u >= 1; --u) {
    const double rate = (u >= c ? c : u) * spec.mu_reduce;
    f(reduce_phase(u), reduce_phase(u)) = -rate;
    if (u > 1) f(reduce_phase(u), reduce_phase(u - 1)) = rate;
  }

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(dim);
  phi(overhead) = 1.0;
  return PhaseTypeDist(std::move(phi), std::move(f));
}

std::vector<double> wave_probabilities(const CountPmf& counts, double theta,
                                       const ClusterSpec& cluster) {
  validate_cluster(cluster);
  validate_drop_ratio(theta);
  const int max_waves = wave_count(effective_tasks(counts.max_count(), theta), cluster);
  std::vector<double> q(static_cast<std::size_t>(max_waves), 0.0);
  const int c = cluster.slots;
  // Bucket raw counts by effective count, then effective counts by wave.
  const int top = effective_tasks(counts.max_count(), theta);
  std::vector<double> by_effective(static_cast<std::size_t>(top) + 1, 0.0);
  for (int t = 1; t <= counts.max_count(); ++t) {
    by_effective[static_cast<std::size_t>(effective_tasks(t, theta))] += counts.prob(t);
  }
  for (int d = 1; d <= max_waves; ++d) {
    double mass = 0.0;
    for (int te = (d - 1) * c + 1; te <= std::min(d * c, top); ++te) {
      mass += by_effective[static_cast<std::size_t>(te)];
    }
    q[static_cast<std::size_t>(d - 1)] = mass;
  }
  return q;
}

PhaseTypeDist build_wave_level_ph(const WaveProfile& profile, std::span<const double> q_map,
                                  std::span<const double> q_reduce) {
  validate_wave_pmf(q_map, "map wave pmf");
  validate_wave_pmf(q_reduce, "reduce wave pmf");
  const int dm = last_positive(q_map);
  const int dr = last_positive(q_reduce);
  if (static_cast<std::size_t>(dm) > profile.map_waves.size() ||
      static_cast<std::size_t>(dr) > profile.reduce_waves.size()) {
    std::ostringstream os;
    os << "wave profile has " << profile.map_waves.size() << " map / "
       << profile.reduce_waves.size() << " reduce waves but the job may need " << dm << " / " << dr;
    throw Error(ErrorCode::ProfileTooShort, os.str());
  }

  // Block layout: setup, map waves 0..dm-1, shuffle, reduce waves 0..dr-1.
  std::vector<const PhaseTypeDist*> blocks;
  blocks.push_back(&profile.setup);
  for (int d = 0; d < dm; ++d) blocks.push_back(&profile.map_waves[static_cast<std::size_t>(d)]);
  blocks.push_back(&profile.shuffle);
  for (int d = 0; d < dr; ++d) blocks.push_back(&profile.reduce_waves[static_cast<std::size_t>(d)]);
  for (const auto* b : blocks) require_full_mass(*b, "wave-level stage");

  std::vector<Eigen::Index> offset(blocks.size() + 1, 0);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    offset[i + 1] = offset[i] + static_cast<Eigen::Index>(blocks[i]->phases());
  }
  const Eigen::Index dim = offset.back();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(blocks[i]->phases());
    a.block(offset[i], offset[i], n, n) = blocks[i]->subgen();
  }
  auto link = [&](std::size_t from, std::size_t to, double weight) {
    if (weight == 0.0) return;
    const auto& src = *blocks[from];
    const auto& dst = *blocks[to];
    a.block(offset[from], offset[to], static_cast<Eigen::Index>(src.phases()),
            static_cast<Eigen::Index>(dst.phases())) +=
        weight * src.exit() * dst.initial().transpose();
  };

  const std::size_t setup = 0;
  const std::size_t first_map = 1;
  const std::size_t shuffle = first_map + static_cast<std::size_t>(dm);
  const std::size_t first_reduce = shuffle + 1;

  for (int d = 1; d <= dm; ++d) {
    link(setup, first_map + static_cast<std::size_t>(dm - d), q_map[static_cast<std::size_t>(d - 1)]);
  }
  for (int w = 0; w + 1 < dm; ++w) {
    link(first_map + static_cast<std::size_t>(w), first_map + static_cast<std::size_t>(w + 1), 1.0);
  }
  link(first_map + static_cast<std::size_t>(dm - 1), shuffle, 1.0);
  for (int d = 1; d <= dr; ++d) {
    link(shuffle, first_reduce + static_cast<std::size_t>(dr - d),
         q_reduce[static_cast<std::size_t>(d - 1)]);
  }
  for (int w = 0; w + 1 < dr; ++w) {
    link(first_reduce + static_cast<std::size_t>(w), first_reduce + static_cast<std::size_t>(w + 1), 1.0);
  }

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(dim);
  alpha.head(static_cast<Eigen::Index>(profile.setup.phases())) = profile.setup.initial();
  return PhaseTypeDist(std::move(alpha), std::move(a));
}

double overhead_mean(double theta, double overhead_at_0, double overhead_at_90) {
  validate_drop_ratio(theta);
  if (!(overhead_at_0 > 0.0) || !(overhead_at_90 > 0.0)) {
    throw Error(ErrorCode::NonPositiveRate, "overhead means must be positive");
  }
  return overhead_at_0 + (theta / kMaxDropRatio) * (overhead_at_90 - overhead_at_0);
}

}  // namespace dias
