#include "dias/phase_type.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dias/error.hpp"

namespace dias {
namespace {

constexpr double kTol = PhaseTypeDist::kTolerance;

std::string describe_violation(const Eigen::VectorXd& initial, const Eigen::MatrixXd& subgen) {
  const auto n = initial.size();
  if (n == 0) return "phase-type distribution needs at least one phase";
  if (subgen.rows() != n || subgen.cols() != n) {
    std::ostringstream os;
    os << "sub-generator is " << subgen.rows() << "x" << subgen.cols() << " but initial vector has "
       << n << " entries";
    return os.str();
  }
  if (!initial.allFinite() || !subgen.allFinite()) return "non-finite entry";
  for (Eigen::Index i = 0; i < n; ++i) {
    if (initial(i) < -kTol || initial(i) > 1.0 + kTol) {
      std::ostringstream os;
      os << "initial probability " << initial(i) << " at phase " << i << " outside [0,1]";
      return os.str();
    }
  }
  const double total = initial.sum();
  if (total > 1.0 + kTol) return "initial probabilities sum above 1";
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(subgen(i, i) < 0.0)) {
      std::ostringstream os;
      os << "diagonal entry " << i << " is " << subgen(i, i) << ", must be negative";
      return os.str();
    }
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && subgen(i, j) < 0.0) {
        std::ostringstream os;
        os << "negative off-diagonal rate at (" << i << "," << j << ")";
        return os.str();
      }
      row += subgen(i, j);
    }
    // Row conservation: exit rate = -row sum must be nonnegative.
    if (row > kTol * std::max(1.0, -subgen(i, i))) {
      std::ostringstream os;
      os << "row " << i << " has outflow below inflow (row sum " << row << ")";
      return os.str();
    }
  }
  return {};
}

bool is_invertible(const Eigen::MatrixXd& subgen) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(-subgen);
  lu.setThreshold(1e-13);
  return lu.isInvertible();
}

}  // namespace

void validate_phase_type(const Eigen::VectorXd& initial, const Eigen::MatrixXd& subgen) {
  if (auto why = describe_violation(initial, subgen); !why.empty()) {
    throw Error(ErrorCode::InvalidDistribution, why);
  }
  if (!is_invertible(subgen)) {
    throw Error(ErrorCode::SingularSubgenerator,
                "sub-generator is singular: some phase never reaches absorption");
  }
}

bool is_valid_phase_type(const Eigen::VectorXd& initial, const Eigen::MatrixXd& subgen) noexcept {
  try {
    validate_phase_type(initial, subgen);
    return true;
  } catch (...) {
    return false;
  }
}

PhaseTypeDist::PhaseTypeDist(Eigen::VectorXd initial, Eigen::MatrixXd subgen)
    : initial_(std::move(initial)), subgen_(std::move(subgen)) {
  validate_phase_type(initial_, subgen_);
  initial_ = initial_.cwiseMax(0.0);
  exit_ = (-subgen_.rowwise().sum()).cwiseMax(0.0);

  const auto n = subgen_.rows();
  jump_cdf_.resize(n, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double out = -subgen_(i, i);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) acc += subgen_(i, j) / out;
      jump_cdf_(i, j) = acc;
    }
    jump_cdf_(i, n) = 1.0;
  }
  initial_cdf_.resize(n);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += initial_(i);
    initial_cdf_(i) = acc;
  }
}

double PhaseTypeDist::mass_at_zero() const noexcept {
  return std::clamp(1.0 - initial_.sum(), 0.0, 1.0);
}

double PhaseTypeDist::sample(Rng& rng) const {
  const auto n = subgen_.rows();
  const double u0 = rng.uniform();
  Eigen::Index phase = 0;
  while (phase < n && u0 >= initial_cdf_(phase)) ++phase;
  if (phase == n) return 0.0;

  double t = 0.0;
  for (;;) {
    t += rng.exponential(-subgen_(phase, phase));
    const double u = rng.uniform();
    Eigen::Index next = 0;
    while (next < n && (next == phase || u >= jump_cdf_(phase, next))) ++next;
    if (next == n) return t;
    phase = next;
  }
}

PhaseTypeDist PhaseTypeDist::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::NonPositiveRate, "time scale factor must be positive");
  }
  return PhaseTypeDist(initial_, subgen_ / factor);
}

PhaseTypeDist make_exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw Error(ErrorCode::NonPositiveRate, "exponential rate must be positive");
  }
  return PhaseTypeDist(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, -rate));
}

PhaseTypeDist make_erlang(int phases, double rate) {
  if (phases < 1) throw Error(ErrorCode::ZeroPhases, "Erlang needs at least one phase");
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw Error(ErrorCode::NonPositiveRate, "Erlang phase rate must be positive");
  }
  Eigen::VectorXd initial = Eigen::VectorXd::Zero(phases);
  initial(0) = 1.0;
  Eigen::MatrixXd subgen = Eigen::MatrixXd::Zero(phases, phases);
  for (int i = 0; i < phases; ++i) {
    subgen(i, i) = -rate;
    if (i + 1 < phases) subgen(i, i + 1) = rate;
  }
  return PhaseTypeDist(std::move(initial), std::move(subgen));
}

PhaseTypeDist make_erlang_with_mean(int phases, double mean_time) {
  if (!(mean_time > 0.0)) throw Error(ErrorCode::NonPositiveRate, "Erlang mean must be positive");
  return make_erlang(phases, static_cast<double>(phases) / mean_time);
}

double moment(const PhaseTypeDist& d, int order) {
  if (order < 1) throw Error(ErrorCode::InvalidDistribution, "moment order must be >= 1");
  const Eigen::MatrixXd neg = -d.subgen();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(neg);
  if (!(lu.rcond() > 1e-14)) {
    throw Error(ErrorCode::SingularSubgenerator, "sub-generator numerically singular");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.phases()));
  double factorial = 1.0;
  for (int k = 1; k <= order; ++k) {
    x = lu.solve(x);
    factorial *= k;
  }
  return factorial * d.initial().dot(x);
}

double mean(const PhaseTypeDist& d) { return moment(d, 1); }

double variance(const PhaseTypeDist& d) {
  const double m1 = moment(d, 1);
  return moment(d, 2) - m1 * m1;
}

double scv(const PhaseTypeDist& d) {
  const double m1 = moment(d, 1);
  return variance(d) / (m1 * m1);
}

double cdf(const PhaseTypeDist& d, double t) {
  if (t < 0.0 || std::isnan(t)) throw Error(ErrorCode::NegativeTime, "cdf needs t >= 0");
  if (t == 0.0) return d.mass_at_zero();
  if (std::isinf(t)) return 1.0;

  const Eigen::MatrixXd& a = d.subgen();
  const auto n = a.rows();
  const double q = a.diagonal().cwiseAbs().maxCoeff() * (1.0 + 1e-12);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n) + a / q;

  // Split the horizon so that each uniformization step has a Poisson mean of
  // at most 64; exp(-64) is far from underflow.
  constexpr double kMaxStepMass = 64.0;
  constexpr double kTailPerStep = 1e-13;
  const double total = q * t;
  const auto steps = static_cast<long>(std::ceil(total / kMaxStepMass));
  const double lambda = total / static_cast<double>(steps);

  Eigen::RowVectorXd v = d.initial().transpose();
  for (long s = 0; s < steps; ++s) {
    double weight = std::exp(-lambda);
    double cumulative = weight;
    Eigen::RowVectorXd term = v;
    Eigen::RowVectorXd acc = weight * term;
    for (int k = 1; 1.0 - cumulative > kTailPerStep && k < 100000; ++k) {
      term = term * p;
      weight *= lambda / k;
      cumulative += weight;
      acc += weight * term;
      // Once past the mode the remaining mass is bounded by the vector norm.
      if (k > lambda && term.sum() < kTailPerStep) break;
    }
    v = acc;
  }
  return std::clamp(1.0 - v.sum(), 0.0, 1.0);
}

double quantile(const PhaseTypeDist& d, double prob) {
  if (!(prob >= 0.0 && prob < 1.0)) {
    throw Error(ErrorCode::InvalidDistribution, "quantile probability must be in [0,1)");
  }
  if (prob <= d.mass_at_zero()) return 0.0;
  double hi = std::max(mean(d), 1e-12);
  while (cdf(d, hi) < prob) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(d, mid) < prob ? lo : hi) = mid;
  }
  return hi;
}

PhaseTypeDist convolve(const PhaseTypeDist& a, const PhaseTypeDist& b) {
  const auto na = static_cast<Eigen::Index>(a.phases());
  const auto nb = static_cast<Eigen::Index>(b.phases());
  Eigen::VectorXd initial(na + nb);
  initial.head(na) = a.initial();
  initial.tail(nb) = a.mass_at_zero() * b.initial();

  Eigen::MatrixXd subgen = Eigen::MatrixXd::Zero(na + nb, na + nb);
  subgen.topLeftCorner(na, na) = a.subgen();
  subgen.topRightCorner(na, nb) = a.exit() * b.initial().transpose();
  subgen.bottomRightCorner(nb, nb) = b.subgen();
  return PhaseTypeDist(std::move(initial), std::move(subgen));
}

}  // namespace dias
