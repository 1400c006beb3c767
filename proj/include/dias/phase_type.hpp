#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "dias/rng.hpp"

namespace dias {

// Continuous phase-type distribution: time to absorption of a CTMC with
// transient sub-generator `subgen` entered according to `initial`.
// Any initial mass missing from 1 is an atom at zero.
//
// Values are immutable after construction and validated on the way in, so a
// PhaseTypeDist that exists is always a proper distribution.
class PhaseTypeDist {
 public:
  static constexpr double kTolerance = 1e-9;

  PhaseTypeDist(Eigen::VectorXd initial, Eigen::MatrixXd subgen);

  [[nodiscard]] std::size_t phases() const noexcept {
    return static_cast<std::size_t>(initial_.size());
  }
  [[nodiscard]] const Eigen::VectorXd& initial() const noexcept { return initial_; }
  [[nodiscard]] const Eigen::MatrixXd& subgen() const noexcept { return subgen_; }
  [[nodiscard]] const Eigen::VectorXd& exit() const noexcept { return exit_; }

  // Probability of an immediate (zero-length) absorption.
  [[nodiscard]] double mass_at_zero() const noexcept;

  // Phase-walk draw of the underlying CTMC.
  double sample(Rng& rng) const;

  // Same distribution with time stretched by `factor` (mean scales by it).
  [[nodiscard]] PhaseTypeDist scaled(double factor) const;

 private:
  Eigen::VectorXd initial_;
  Eigen::MatrixXd subgen_;
  Eigen::VectorXd exit_;
  // Per-row cumulative jump probabilities; the last column is absorption.
  Eigen::MatrixXd jump_cdf_;
  Eigen::VectorXd initial_cdf_;
};

// Throws Error(InvalidDistribution / SingularSubgenerator) if (initial,
// subgen) is not a proper PH representation.
void validate_phase_type(const Eigen::VectorXd& initial, const Eigen::MatrixXd& subgen);
[[nodiscard]] bool is_valid_phase_type(const Eigen::VectorXd& initial,
                                       const Eigen::MatrixXd& subgen) noexcept;

PhaseTypeDist make_exponential(double rate);
PhaseTypeDist make_erlang(int phases, double rate);
// Erlang with the given number of phases and mean.
PhaseTypeDist make_erlang_with_mean(int phases, double mean);

// n-th raw moment n! * alpha (-A)^{-n} 1, computed by repeated LU solves.
double moment(const PhaseTypeDist& d, int order);
double mean(const PhaseTypeDist& d);
double variance(const PhaseTypeDist& d);
// Squared coefficient of variation.
double scv(const PhaseTypeDist& d);

// F(t) = 1 - alpha exp(A t) 1 by uniformization.
double cdf(const PhaseTypeDist& d, double t);
// Smallest t with cdf(t) >= p, found by bracketing and bisection.
double quantile(const PhaseTypeDist& d, double p);

// Distribution of the sum of independent draws from a and b.
PhaseTypeDist convolve(const PhaseTypeDist& a, const PhaseTypeDist& b);

}  // namespace dias
