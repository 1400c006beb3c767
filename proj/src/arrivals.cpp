#include "dias/arrivals.hpp"

#include <cmath>
#include <sstream>

#include "dias/error.hpp"

namespace dias {
namespace {

constexpr double kTol = MarkedArrivalProcess::kTolerance;

void validate_process(const Eigen::MatrixXd& d0, const std::vector<Eigen::MatrixXd>& marked) {
  const auto m = d0.rows();
  if (m == 0 || d0.cols() != m) throw Error(ErrorCode::InvalidProcess, "D0 must be square and non-empty");
  if (marked.empty()) throw Error(ErrorCode::InvalidProcess, "MMAP needs at least one marked matrix");
  if (!d0.allFinite()) throw Error(ErrorCode::InvalidProcess, "D0 has non-finite entries");
  Eigen::MatrixXd total = d0;
  for (std::size_t k = 0; k < marked.size(); ++k) {
    const auto& dk = marked[k];
    if (dk.rows() != m || dk.cols() != m) {
      throw Error(ErrorCode::InvalidProcess, "marked matrices must match D0 in size");
    }
    if (!dk.allFinite() || (dk.array() < 0.0).any()) {
      std::ostringstream os;
      os << "D" << k + 1 << " has a negative or non-finite entry";
      throw Error(ErrorCode::InvalidProcess, os.str());
    }
    total += dk;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(d0(i, i) < 0.0)) throw Error(ErrorCode::InvalidProcess, "D0 diagonal must be negative");
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j && d0(i, j) < 0.0) throw Error(ErrorCode::InvalidProcess, "D0 off-diagonal must be >= 0");
    }
    const double row = total.row(i).sum();
    if (std::abs(row) > kTol * std::max(1.0, -d0(i, i))) {
      std::ostringstream os;
      os << "row " << i << " of D sums to " << row << ", expected 0";
      throw Error(ErrorCode::InvalidProcess, os.str());
    }
  }
}

}  // namespace

MarkedArrivalProcess::MarkedArrivalProcess(Eigen::MatrixXd d0, std::vector<Eigen::MatrixXd> marked)
    : d0_(std::move(d0)), marked_(std::move(marked)) {
  validate_process(d0_, marked_);
}

Eigen::MatrixXd MarkedArrivalProcess::generator() const {
  Eigen::MatrixXd d = d0_;
  for (const auto& dk : marked_) d += dk;
  return d;
}

MarkedArrivalProcess MarkedArrivalProcess::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::InvalidProcess, "scale factor must be positive");
  }
  std::vector<Eigen::MatrixXd> marked;
  marked.reserve(marked_.size());
  for (const auto& dk : marked_) marked.push_back(dk * factor);
  return MarkedArrivalProcess(d0_ * factor, std::move(marked));
}

MarkedArrivalProcess make_marked_poisson(std::span<const double> rates) {
  if (rates.empty()) throw Error(ErrorCode::AllRatesZero, "no arrival classes given");
  double total = 0.0;
  std::vector<Eigen::MatrixXd> marked;
  for (double r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw Error(ErrorCode::InvalidProcess, "arrival rates must be >= 0");
    total += r;
    marked.push_back(Eigen::MatrixXd::Constant(1, 1, r));
  }
  if (!(total > 0.0)) throw Error(ErrorCode::AllRatesZero, "all arrival rates are zero");
  return MarkedArrivalProcess(Eigen::MatrixXd::Constant(1, 1, -total), std::move(marked));
}

std::vector<double> class_rates(const MarkedArrivalProcess& process) {
  const Eigen::MatrixXd d = process.generator();
  const auto m = d.rows();
  Eigen::RowVectorXd pi(m);
  if (m == 1) {
    pi(0) = 1.0;
  } else {
    // pi D = 0 with pi 1 = 1; a unique solution needs rank(D) = m - 1.
    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(d);
    rank_check.setThreshold(1e-12);
    if (rank_check.rank() != m - 1) {
      throw Error(ErrorCode::NoStationaryDistribution,
                  "arrival generator has no unique stationary distribution");
    }
    Eigen::MatrixXd system(m + 1, m);
    system.topRows(m) = d.transpose();
    system.row(m).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs(m) = 1.0;
    pi = system.colPivHouseholderQr().solve(rhs).transpose();
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
  }
  std::vector<double> rates;
  rates.reserve(process.classes());
  for (const auto& dk : process.marked()) rates.push_back((pi * dk).sum());
  return rates;
}

double offered_load(const MarkedArrivalProcess& process, std::span<const double> mean_service) {
  const auto rates = class_rates(process);
  if (mean_service.size() != rates.size()) {
    throw Error(ErrorCode::InvalidProcess, "need one mean service time per arrival class");
  }
  double rho = 0.0;
  for (std::size_t k = 0; k < rates.size(); ++k) rho += rates[k] * mean_service[k];
  return rho;
}

MarkedArrivalProcess calibrate_for_utilization(const MarkedArrivalProcess& process,
                                               std::span<const double> mean_service,
                                               double target_rho) {
  if (!(target_rho > 0.0 && target_rho < 1.0)) {
    throw Error(ErrorCode::InvalidProcess, "target utilization must be in (0, 1)");
  }
  const double rho = offered_load(process, mean_service);
  if (!(rho > 0.0)) throw Error(ErrorCode::ZeroOfferedLoad, "offered load is zero; cannot rescale");
  return process.scaled(target_rho / rho);
}

std::vector<ArrivalEvent> sample_stream(const MarkedArrivalProcess& process, double horizon, Rng& rng) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidProcess, "horizon must be positive");
  const auto m = static_cast<Eigen::Index>(process.states());
  const auto k_count = static_cast<Eigen::Index>(process.classes());

  // Outcome table per state: entries (class, next state) with cumulative
  // probabilities; class 0 is a hidden D0 transition.
  struct Outcome {
    double cumulative;
    int mark;
    Eigen::Index next;
  };
  std::vector<std::vector<Outcome>> table(static_cast<std::size_t>(m));
  std::vector<double> exit_rate(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double out = -process.d0()(i, i);
    exit_rate[static_cast<std::size_t>(i)] = out;
    double acc = 0.0;
    auto& row = table[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i && process.d0()(i, j) > 0.0) {
        acc += process.d0()(i, j) / out;
        row.push_back({acc, 0, j});
      }
    }
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const auto& dk = process.marked()[static_cast<std::size_t>(k)];
      for (Eigen::Index j = 0; j < m; ++j) {
        if (dk(i, j) > 0.0) {
          acc += dk(i, j) / out;
          row.push_back({acc, static_cast<int>(k) + 1, j});
        }
      }
    }
    if (!row.empty()) row.back().cumulative = 1.0;
  }

  // Initial state from the stationary distribution of D.
  Eigen::Index state = 0;
  if (m > 1) {
    const Eigen::MatrixXd d = process.generator();
    Eigen::MatrixXd system(m + 1, m);
    system.topRows(m) = d.transpose();
    system.row(m).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs(m) = 1.0;
    Eigen::VectorXd pi = system.colPivHouseholderQr().solve(rhs).cwiseMax(0.0);
    pi /= pi.sum();
    const double u = rng.uniform();
    double acc = 0.0;
    for (state = 0; state + 1 < m; ++state) {
      acc += pi(state);
      if (u < acc) break;
    }
  }

  std::vector<ArrivalEvent> events;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(exit_rate[static_cast<std::size_t>(state)]);
    if (t > horizon) break;
    const auto& row = table[static_cast<std::size_t>(state)];
    const double u = rng.uniform();
    std::size_t pick = 0;
    while (pick + 1 < row.size() && u >= row[pick].cumulative) ++pick;
    const auto& outcome = row[pick];
    state = outcome.next;
    // Equal timestamps have probability 0 in exact arithmetic and only arise
    // through rounding; dropping them keeps the stream strictly increasing.
    if (outcome.mark > 0 && (events.empty() || t > events.back().time)) {
      events.push_back({t, outcome.mark});
    }
  }
  return events;
}

}  // namespace dias
