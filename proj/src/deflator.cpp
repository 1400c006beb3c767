#include "dias/deflator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dias/error.hpp"
#include "dias/parallel.hpp"

namespace dias {
namespace {

constexpr double kEps = 1e-9;

double extrapolate(const AccuracyCurve::Point& a, const AccuracyCurve::Point& b, double theta) {
  return a.error_percent + (b.error_percent - a.error_percent) * (theta - a.drop_ratio) / (b.drop_ratio - a.drop_ratio);
}

}  // namespace

AccuracyCurve::AccuracyCurve(std::vector<Point> points, std::optional<double> measured_up_to)
    : points_(std::move(points)) {
  if (points_.size() < 2) throw Error(ErrorCode::InvalidCurve, "accuracy curve needs at least two knots");
  if (points_.front().drop_ratio != 0.0 || points_.front().error_percent != 0.0) {
    throw Error(ErrorCode::InvalidCurve, "accuracy curve must start at (0, 0)");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].drop_ratio > points_[i - 1].drop_ratio)) {
      throw Error(ErrorCode::InvalidCurve, "accuracy curve drop ratios must increase strictly");
    }
    if (points_[i].error_percent < points_[i - 1].error_percent) {
      throw Error(ErrorCode::InvalidCurve, "accuracy curve errors must be nondecreasing");
    }
  }
  if (points_.back().drop_ratio > kMaxDropRatio + 1e-12) {
    throw Error(ErrorCode::InvalidCurve, "accuracy curve extends past the maximum drop ratio");
  }
  measured_up_to_ = measured_up_to.value_or(points_.back().drop_ratio);
}

AccuracyCurve AccuracyCurve::default_curve() {
  std::vector<Point> knots{{0.0, 0.0}, {0.1, 8.5}, {0.2, 15.0}, {0.4, 32.0}};
  const double slope = (32.0 - 15.0) / (0.4 - 0.2);
  knots.push_back({kMaxDropRatio, 32.0 + slope * (kMaxDropRatio - 0.4)});
  return AccuracyCurve(std::move(knots), 0.4);
}

double error_of(const AccuracyCurve& curve, double theta) {
  validate_drop_ratio(theta);
  const auto& p = curve.points();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (theta == p[i].drop_ratio) return p[i].error_percent;
  }
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (theta < p[i].drop_ratio) return extrapolate(p[i - 1], p[i], theta);
  }
  return extrapolate(p[p.size() - 2], p.back(), theta);
}

double max_drop_for_accuracy(const AccuracyCurve& curve, double max_error) {
  if (!(max_error >= 0.0)) throw Error(ErrorCode::InvalidTargets, "maximum error must be >= 0");
  std::vector<AccuracyCurve::Point> p = curve.points();
  if (p.back().drop_ratio < kMaxDropRatio) {
    p.push_back({kMaxDropRatio, extrapolate(p[p.size() - 2], p.back(), kMaxDropRatio)});
  }
  double best = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].error_percent <= max_error) {
      best = p[i].drop_ratio;
      continue;
    }
    if (p[i - 1].error_percent <= max_error) {
      const double span = p[i].error_percent - p[i - 1].error_percent;
      best = p[i - 1].drop_ratio + (max_error - p[i - 1].error_percent) / span * (p[i].drop_ratio - p[i - 1].drop_ratio);
    }
    break;
  }
  return std::min(best, kMaxDropRatio);
}

void TargetSpec::validate(std::size_t n_classes) const {
  if (classes.size() != n_classes) {
    std::ostringstream os;
    os << "targets cover " << classes.size() << " classes, scenario has " << n_classes;
    throw Error(ErrorCode::InvalidTargets, os.str());
  }
  if (!(latency_weight >= 0.0) || !(accuracy_weight >= 0.0) || latency_weight + accuracy_weight <= 0.0) {
    throw Error(ErrorCode::InvalidTargets, "objective weights must be >= 0 and not all zero");
  }
  for (const auto& c : classes) {
    if (!(c.max_relative_error >= 0.0)) throw Error(ErrorCode::InvalidTargets, "maximum error must be >= 0");
    if ((c.max_mean_latency && !(*c.max_mean_latency >= 0.0)) ||
        (c.max_p95_latency && !(*c.max_p95_latency >= 0.0))) {
      throw Error(ErrorCode::InvalidTargets, "latency caps must be >= 0");
    }
  }
}

Predictor simulation_predictor(int replications) {
  return [replications](const Scenario& scenario) {
    const auto agg = replicate(scenario, replications);
    std::vector<std::pair<Estimate, Estimate>> out;
    out.reserve(agg.classes.size());
    for (const auto& c : agg.classes) out.emplace_back(c.mean_response, c.p95_response);
    return out;
  };
}

Scenario candidate_scenario(const Scenario& base, const Candidate& candidate) {
  const std::size_t n = base.classes.size();
  if (candidate.theta.size() != n || candidate.timeout.size() != n) {
    throw Error(ErrorCode::InvalidTargets, "candidate must give a drop ratio and timeout per class");
  }
  Scenario s = base;
  std::vector<DropRatios> drops(n);
  for (std::size_t k = 0; k < n; ++k) {
    drops[k] = {candidate.theta[k], base.policy.drops_for(k).reduce};
  }
  const bool sprints = std::any_of(candidate.timeout.begin(), candidate.timeout.end(),
                                   [](const auto& t) { return t.has_value(); });
  if (sprints) {
    if (!base.policy.sprint) {
      throw Error(ErrorCode::InvalidTargets, "sprint timeouts need a sprint configuration in the scenario");
    }
    SprintConfig sprint = *base.policy.sprint;
    sprint.timeouts = candidate.timeout;
    s.policy = dias_policy(std::move(drops), std::move(sprint));
  } else {
    s.policy = differential_approx_policy(std::move(drops));
  }
  return s;
}

void apply_feasibility(CandidateRow& row, const TargetSpec& targets) {
  double violation = 0.0;
  for (std::size_t k = 0; k < row.predictions.size() && k < targets.classes.size(); ++k) {
    const auto& t = targets.classes[k];
    const auto& p = row.predictions[k];
    if (p.relative_error > t.max_relative_error + kEps) {
      violation += (p.relative_error - t.max_relative_error) / std::max(1.0, t.max_relative_error);
    }
    auto over = [](double value, double cap) {
      if (std::isnan(value)) return 1.0;
      if (value <= cap) return 0.0;
      return cap > 0.0 ? value / cap - 1.0 : 1.0 + value;
    };
    if (t.max_mean_latency) {
      const double v = row.screened_out ? p.mean_processing : p.mean_latency.mean;
      violation += over(v, *t.max_mean_latency);
    }
    if (t.max_p95_latency && !row.screened_out) violation += over(p.p95_latency.mean, *t.max_p95_latency);
  }
  if (row.screened_out) violation = std::max(violation, 1.0);
  row.violation = violation;
  row.feasible = !row.screened_out && violation == 0.0;
}

FeasibilityTable enumerate_candidates(const Scenario& base, const TargetSpec& targets,
                                      const AccuracyCurve& curve, const std::vector<double>& theta_grid,
                                      const std::vector<std::optional<double>>& timeout_grid,
                                      const Predictor& predictor) {
  base.validate();
  const std::size_t n = base.classes.size();
  targets.validate(n);
  if (theta_grid.empty() || timeout_grid.empty()) {
    throw Error(ErrorCode::InvalidTargets, "candidate grids must be non-empty");
  }

  // Per-class options: drop ratios allowed by the accuracy target, timeouts
  // only where sprinting is configured.
  std::vector<std::vector<double>> thetas(n);
  std::vector<std::vector<std::optional<double>>> timeouts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double limit = max_drop_for_accuracy(curve, targets.classes[k].max_relative_error);
    for (double th : theta_grid) {
      validate_drop_ratio(th);
      if (th <= limit + kEps && std::find(thetas[k].begin(), thetas[k].end(), th) == thetas[k].end()) {
        thetas[k].push_back(th);
      }
    }
    if (thetas[k].empty()) thetas[k].push_back(0.0);
    std::sort(thetas[k].begin(), thetas[k].end());
    if (base.policy.sprint) {
      timeouts[k] = timeout_grid;
    } else {
      timeouts[k] = {std::nullopt};
    }
  }

  std::vector<Candidate> candidates;
  Candidate current{std::vector<double>(n), std::vector<std::optional<double>>(n)};
  std::function<void(std::size_t)> expand = [&](std::size_t k) {
    if (k == n) {
      candidates.push_back(current);
      return;
    }
    for (double th : thetas[k]) {
      for (const auto& to : timeouts[k]) {
        current.theta[k] = th;
        current.timeout[k] = to;
        expand(k + 1);
      }
    }
  };
  expand(0);

  std::vector<double> rates(n, 0.0);
  if (base.arrivals) {
    rates = class_rates(*base.arrivals);
  } else {
    for (const auto& a : base.arrival_trace) rates[static_cast<std::size_t>(a.job_class - 1)] += 1.0 / base.horizon;
  }

  FeasibilityTable table(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& row = table[i];
    row.candidate = candidates[i];
    row.predictions.resize(n);
    const Scenario s = candidate_scenario(base, row.candidate);
    double load = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      auto& p = row.predictions[k];
      p.relative_error = error_of(curve, row.candidate.theta[k]);
      double processing = mean_processing_time(s.classes[k], s.policy.drops_for(k), s.cluster);
      // A sprinting class can at best run at speed_factor for its whole job.
      if (row.candidate.timeout[k] && s.policy.sprint) processing /= s.policy.sprint->speed_factor;
      p.mean_processing = processing;
      load += rates[k] * processing;
      const auto& cap = targets.classes[k].max_mean_latency;
      if (cap && processing > *cap) {
        row.screened_out = true;
        row.screen_reason = "mean processing time of class " + std::to_string(k + 1) + " exceeds its latency cap";
      }
    }
    row.offered_load = load;
    if (load >= 1.0) {
      row.screened_out = true;
      row.screen_reason = "offered load is at least 1";
    }
  }

  parallel_for(table.size(), [&](std::size_t i) {
    auto& row = table[i];
    if (row.screened_out) return;
    std::vector<std::pair<Estimate, Estimate>> latencies;
    try {
      latencies = predictor(candidate_scenario(base, row.candidate));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::PredictorFailure, std::string("predictor failed: ") + e.what());
    }
    if (latencies.size() != n) throw Error(ErrorCode::PredictorFailure, "predictor returned wrong class count");
    for (std::size_t k = 0; k < n; ++k) {
      row.predictions[k].mean_latency = latencies[k].first;
      row.predictions[k].p95_latency = latencies[k].second;
    }
  });
  for (auto& row : table) apply_feasibility(row, targets);
  return table;
}

Normalization normalization_of(const FeasibilityTable& table) {
  Normalization norm;
  if (table.empty()) return norm;
  const std::size_t n = table.front().predictions.size();
  const double inf = std::numeric_limits<double>::infinity();
  norm.latency_min.assign(n, inf);
  norm.latency_max.assign(n, -inf);
  norm.error_min.assign(n, inf);
  norm.error_max.assign(n, -inf);
  for (const auto& row : table) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto& p = row.predictions[k];
      norm.error_min[k] = std::min(norm.error_min[k], p.relative_error);
      norm.error_max[k] = std::max(norm.error_max[k], p.relative_error);
      if (row.screened_out || std::isnan(p.mean_latency.mean)) continue;
      norm.latency_min[k] = std::min(norm.latency_min[k], p.mean_latency.mean);
      norm.latency_max[k] = std::max(norm.latency_max[k], p.mean_latency.mean);
    }
  }
  return norm;
}

double candidate_score(const CandidateRow& row, const Normalization& norm, const TargetSpec& targets) {
  auto scaled = [](double v, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    return (v - lo) / (hi - lo);
  };
  const std::size_t n = row.predictions.size();
  if (n == 0) return 0.0;
  double latency = 0.0;
  double error = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = row.predictions[k];
    latency += row.screened_out ? 1.0 : scaled(p.mean_latency.mean, norm.latency_min[k], norm.latency_max[k]);
    error += scaled(p.relative_error, norm.error_min[k], norm.error_max[k]);
  }
  return (targets.latency_weight * latency + targets.accuracy_weight * error) / static_cast<double>(n);
}

namespace {

// Tie-break: smaller total drop, then smaller drops from the highest
// priority down, then smaller timeouts (none counts as infinite).
bool preferred_on_tie(const Candidate& a, const Candidate& b) {
  const double sa = std::accumulate(a.theta.begin(), a.theta.end(), 0.0);
  const double sb = std::accumulate(b.theta.begin(), b.theta.end(), 0.0);
  if (std::abs(sa - sb) > kEps) return sa < sb;
  for (std::size_t k = a.theta.size(); k-- > 0;) {
    if (std::abs(a.theta[k] - b.theta[k]) > kEps) return a.theta[k] < b.theta[k];
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = a.timeout.size(); k-- > 0;) {
    const double ta = a.timeout[k].value_or(inf);
    const double tb = b.timeout[k].value_or(inf);
    if (ta != tb) return ta < tb;
  }
  return false;
}

}  // namespace

PlanResult choose(FeasibilityTable table, const TargetSpec& targets) {
  if (table.empty()) throw Error(ErrorCode::InvalidTargets, "feasibility table is empty");
  PlanResult result;
  result.normalization = normalization_of(table);
  const bool any_feasible = std::any_of(table.begin(), table.end(), [](const auto& r) { return r.feasible; });

  std::optional<std::size_t> best;
  double best_key = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table[i];
    if (any_feasible && !row.feasible) continue;
    // Without feasible rows the least-violating candidate wins.
    const double key = any_feasible ? candidate_score(row, result.normalization, targets) : row.violation;
    if (!best || key < best_key - 1e-12 ||
        (std::abs(key - best_key) <= 1e-12 && preferred_on_tie(row.candidate, table[*best].candidate))) {
      best = i;
      best_key = key;
    }
  }
  result.chosen = *best;
  result.feasible = any_feasible;
  result.score = candidate_score(table[*best], result.normalization, targets);
  result.table = std::move(table);
  return result;
}

}  // namespace dias
