#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "dias/rng.hpp"

namespace dias {

// Marked Markovian arrival process MMAP[K]: hidden transitions in d0,
// class-k arrivals in marked[k-1].
class MarkedArrivalProcess {
 public:
  static constexpr double kTolerance = 1e-9;

  MarkedArrivalProcess(Eigen::MatrixXd d0, std::vector<Eigen::MatrixXd> marked);

  [[nodiscard]] std::size_t states() const noexcept { return static_cast<std::size_t>(d0_.rows()); }
  [[nodiscard]] std::size_t classes() const noexcept { return marked_.size(); }
  [[nodiscard]] const Eigen::MatrixXd& d0() const noexcept { return d0_; }
  [[nodiscard]] const std::vector<Eigen::MatrixXd>& marked() const noexcept { return marked_; }

  // D = D0 + sum_k Dk.
  [[nodiscard]] Eigen::MatrixXd generator() const;

  // All matrices multiplied by `factor`: same event sequence, time compressed.
  [[nodiscard]] MarkedArrivalProcess scaled(double factor) const;

 private:
  Eigen::MatrixXd d0_;
  std::vector<Eigen::MatrixXd> marked_;
};

struct ArrivalEvent {
  double time = 0.0;
  int job_class = 1;  // 1-based, matches the marking index

  friend bool operator==(const ArrivalEvent&, const ArrivalEvent&) = default;
};

MarkedArrivalProcess make_marked_poisson(std::span<const double> rates);

// Stationary per-class arrival rates pi * Dk * 1.
std::vector<double> class_rates(const MarkedArrivalProcess& process);

// Uniform rescaling so that sum_k lambda_k E[S_k] equals target_rho.
MarkedArrivalProcess calibrate_for_utilization(const MarkedArrivalProcess& process,
                                               std::span<const double> mean_service,
                                               double target_rho);

double offered_load(const MarkedArrivalProcess& process, std::span<const double> mean_service);

// Simulates the CTMC of D up to `horizon` and returns the marked events.
std::vector<ArrivalEvent> sample_stream(const MarkedArrivalProcess& process, double horizon, Rng& rng);

}  // namespace dias
