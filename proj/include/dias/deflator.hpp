#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dias/simulator.hpp"

namespace dias {

// Relative error (%) as a function of the drop ratio, piecewise linear
// through the knots.
class AccuracyCurve {
 public:
  struct Point {
    double drop_ratio;
    double error_percent;
  };

  // Knots must start at (0, 0), increase strictly in drop ratio, be
  // nondecreasing in error, and stay within [0, 0.9]. Beyond the last knot
  // the last segment is extended linearly; `measured_up_to` records where
  // measurements end.
  explicit AccuracyCurve(std::vector<Point> points, std::optional<double> measured_up_to = std::nullopt);

  // Measured text-analytics curve, linearly extended to 0.9.
  static AccuracyCurve default_curve();

  [[nodiscard]] const std::vector<Point>& points() const noexcept { return points_; }
  [[nodiscard]] double measured_up_to() const noexcept { return measured_up_to_; }
  [[nodiscard]] bool is_extrapolated(double theta) const noexcept { return theta > measured_up_to_ + 1e-12; }

 private:
  std::vector<Point> points_;
  double measured_up_to_;
};

double error_of(const AccuracyCurve& curve, double theta);
// Largest drop ratio in [0, 0.9] whose error stays within max_error.
double max_drop_for_accuracy(const AccuracyCurve& curve, double max_error);

struct ClassTarget {
  double max_relative_error = 0.0;  // percent
  std::optional<double> max_mean_latency;
  std::optional<double> max_p95_latency;
};

struct TargetSpec {
  std::vector<ClassTarget> classes;  // index = priority - 1
  double latency_weight = 1.0;
  double accuracy_weight = 0.0;

  void validate(std::size_t n_classes) const;
};

struct Candidate {
  std::vector<double> theta;                   // map drop ratio per class
  std::vector<std::optional<double>> timeout;  // sprint timeout per class

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ClassPrediction {
  Estimate mean_latency;
  Estimate p95_latency;
  double mean_processing = 0.0;  // analytic screen value
  double relative_error = 0.0;   // percent, from the accuracy curve
};

struct CandidateRow {
  Candidate candidate;
  bool screened_out = false;  // rejected by the analytic screen, not simulated
  std::string screen_reason;
  double offered_load = 0.0;
  std::vector<ClassPrediction> predictions;
  bool feasible = false;
  double violation = 0.0;  // 0 when feasible
};

using FeasibilityTable = std::vector<CandidateRow>;

// Returns per-class latency estimates for a fully specified scenario.
using Predictor = std::function<std::vector<std::pair<Estimate, Estimate>>(const Scenario&)>;

Predictor simulation_predictor(int replications = 10);

// Scenario a candidate stands for: drop ratios on the map stages, sprint
// timeouts where the base scenario defines a sprint configuration.
Scenario candidate_scenario(const Scenario& base, const Candidate& candidate);

// Recomputes feasible / violation for a row from its stored predictions.
void apply_feasibility(CandidateRow& row, const TargetSpec& targets);

FeasibilityTable enumerate_candidates(const Scenario& base, const TargetSpec& targets,
                                      const AccuracyCurve& curve, const std::vector<double>& theta_grid,
                                      const std::vector<std::optional<double>>& timeout_grid,
                                      const Predictor& predictor);

struct Normalization {
  std::vector<double> latency_min;
  std::vector<double> latency_max;
  std::vector<double> error_min;
  std::vector<double> error_max;
};

struct PlanResult {
  std::size_t chosen = 0;  // index into table
  bool feasible = false;
  double score = 0.0;
  Normalization normalization;
  FeasibilityTable table;

  [[nodiscard]] const CandidateRow& chosen_row() const { return table.at(chosen); }
};

// Weighted min-max score over the table; smaller is better.
double candidate_score(const CandidateRow& row, const Normalization& norm, const TargetSpec& targets);
Normalization normalization_of(const FeasibilityTable& table);

PlanResult choose(FeasibilityTable table, const TargetSpec& targets);

}  // namespace dias
