#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dias/error.hpp"
#include "dias/phase_type.hpp"
#include "random_ph.hpp"

using namespace dias;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

double erlang_cdf(int k, double rate, double t) {
  double term = std::exp(-rate * t);
  double sum = 0.0;
  for (int n = 0; n < k; ++n) {
    sum += term;
    term *= rate * t / (n + 1);
  }
  return 1.0 - sum;
}

// Raw moment of an Erlang(k, rate): k (k+1) ... (k+n-1) / rate^n.
double erlang_moment(int k, double rate, int n) {
  double m = 1.0;
  for (int i = 0; i < n; ++i) m *= (k + i) / rate;
  return m;
}

}  // namespace

TEST(PhaseType, ExponentialMomentsMatchClosedForm) {
  for (double rate : {0.1, 0.5, 2.0, 7.5}) {
    const auto d = make_exponential(rate);
    for (int n = 1; n <= 4; ++n) {
      EXPECT_NEAR(moment(d, n), factorial(n) / std::pow(rate, n), 1e-9 * factorial(n) / std::pow(rate, n));
    }
    EXPECT_NEAR(scv(d), 1.0, 1e-9);
  }
}

TEST(PhaseType, ErlangMomentsMatchClosedForm) {
  for (int k : {1, 2, 5, 12}) {
    for (double rate : {0.3, 1.0, 4.0}) {
      const auto d = make_erlang(k, rate);
      for (int n = 1; n <= 3; ++n) {
        const double expected = erlang_moment(k, rate, n);
        EXPECT_NEAR(moment(d, n), expected, 1e-9 * expected);
      }
      EXPECT_NEAR(variance(d), k / (rate * rate), 1e-9 * k / (rate * rate));
      EXPECT_NEAR(scv(d), 1.0 / k, 1e-9);
    }
  }
}

TEST(PhaseType, ErlangWithMean) {
  const auto d = make_erlang_with_mean(4, 10.0);
  EXPECT_NEAR(mean(d), 10.0, 1e-9);
  EXPECT_NEAR(scv(d), 0.25, 1e-9);
}

TEST(PhaseType, ExponentialCdf) {
  const auto d = make_exponential(0.7);
  for (double t : {0.0, 0.01, 0.5, 1.0, 3.0, 10.0, 40.0}) {
    EXPECT_NEAR(cdf(d, t), 1.0 - std::exp(-0.7 * t), 1e-6) << t;
  }
}

TEST(PhaseType, ErlangCdf) {
  for (int k : {2, 3, 8}) {
    const auto d = make_erlang(k, 1.5);
    for (double t : {0.1, 1.0, 2.5, 5.0, 12.0}) EXPECT_NEAR(cdf(d, t), erlang_cdf(k, 1.5, t), 1e-6);
  }
}

TEST(PhaseType, LargeTimeCdfStaysAccurate) {
  const auto d = make_erlang(3, 20.0);
  EXPECT_NEAR(cdf(d, 0.3), erlang_cdf(3, 20.0, 0.3), 1e-6);
  EXPECT_NEAR(cdf(d, 100.0), 1.0, 1e-9);
}

TEST(PhaseType, HypoexponentialConvolution) {
  const double a = 1.0;
  const double b = 3.0;
  const auto d = convolve(make_exponential(a), make_exponential(b));
  EXPECT_EQ(d.phases(), 2u);
  EXPECT_NEAR(mean(d), 1.0 / a + 1.0 / b, 1e-9);
  EXPECT_NEAR(variance(d), 1.0 / (a * a) + 1.0 / (b * b), 1e-9);
  for (double t : {0.2, 1.0, 4.0}) {
    const double expected = 1.0 - (b * std::exp(-a * t) - a * std::exp(-b * t)) / (b - a);
    EXPECT_NEAR(cdf(d, t), expected, 1e-6);
  }
}

TEST(PhaseType, ConvolutionOfErlangsIsErlang) {
  const auto d = convolve(make_erlang(2, 2.0), make_erlang(3, 2.0));
  const auto e = make_erlang(5, 2.0);
  for (int n = 1; n <= 3; ++n) EXPECT_NEAR(moment(d, n), moment(e, n), 1e-9 * moment(e, n));
  for (double t : {0.5, 2.0, 5.0}) EXPECT_NEAR(cdf(d, t), cdf(e, t), 1e-9);
}

TEST(PhaseType, ConvolutionCarriesAtomAtZero) {
  // First term is zero with probability 0.4.
  Eigen::VectorXd alpha(1);
  alpha << 0.6;
  Eigen::MatrixXd a(1, 1);
  a << -2.0;
  const PhaseTypeDist first(alpha, a);
  EXPECT_NEAR(first.mass_at_zero(), 0.4, 1e-12);
  const auto sum = convolve(first, make_exponential(1.0));
  EXPECT_NEAR(mean(sum), 0.6 * 0.5 + 1.0, 1e-9);
  EXPECT_NEAR(sum.mass_at_zero(), 0.0, 1e-12);
}

TEST(PhaseType, PointMassAtZero) {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd a(1, 1);
  a << -1.0;
  const PhaseTypeDist d(alpha, a);
  EXPECT_DOUBLE_EQ(mean(d), 0.0);
  EXPECT_DOUBLE_EQ(cdf(d, 0.0), 1.0);
  Rng rng(3);
  EXPECT_DOUBLE_EQ(d.sample(rng), 0.0);
}

TEST(PhaseType, Quantile) {
  const auto d = make_exponential(2.0);
  for (double p : {0.1, 0.5, 0.95, 0.999}) EXPECT_NEAR(quantile(d, p), -std::log(1.0 - p) / 2.0, 1e-6);
}

TEST(PhaseType, ValidationRejectsBadRepresentations) {
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Schema;
  };
  Eigen::VectorXd alpha(2);
  alpha << 0.5, 0.5;
  Eigen::MatrixXd positive_diag(2, 2);
  positive_diag << 1.0, 0.0, 0.0, -1.0;
  EXPECT_EQ(code_of([&] { PhaseTypeDist(alpha, positive_diag); }), ErrorCode::InvalidDistribution);

  Eigen::MatrixXd negative_off(2, 2);
  negative_off << -1.0, -0.5, 0.0, -1.0;
  EXPECT_EQ(code_of([&] { PhaseTypeDist(alpha, negative_off); }), ErrorCode::InvalidDistribution);

  Eigen::MatrixXd rate_surplus(2, 2);
  rate_surplus << -1.0, 2.0, 0.0, -1.0;
  EXPECT_EQ(code_of([&] { PhaseTypeDist(alpha, rate_surplus); }), ErrorCode::InvalidDistribution);

  Eigen::VectorXd too_much(2);
  too_much << 0.7, 0.6;
  EXPECT_EQ(code_of([&] { PhaseTypeDist(too_much, make_erlang(2, 1.0).subgen()); }), ErrorCode::InvalidDistribution);

  Eigen::MatrixXd trapped(2, 2);
  trapped << -1.0, 1.0, 1.0, -1.0;
  EXPECT_EQ(code_of([&] { PhaseTypeDist(alpha, trapped); }), ErrorCode::SingularSubgenerator);

  EXPECT_EQ(code_of([&] { make_exponential(0.0); }), ErrorCode::NonPositiveRate);
  EXPECT_EQ(code_of([&] { make_erlang(0, 1.0); }), ErrorCode::ZeroPhases);
  EXPECT_EQ(code_of([&] { cdf(make_exponential(1.0), -1.0); }), ErrorCode::NegativeTime);
  EXPECT_FALSE(is_valid_phase_type(alpha, trapped));
  EXPECT_TRUE(is_valid_phase_type(alpha, make_erlang(2, 1.0).subgen()));
}

TEST(PhaseType, ScaledStretchesTime) {
  const auto d = make_erlang(3, 1.0);
  const auto s = d.scaled(2.5);
  EXPECT_NEAR(mean(s), 2.5 * mean(d), 1e-9);
  EXPECT_NEAR(cdf(s, 5.0), cdf(d, 2.0), 1e-9);
}

TEST(PhaseType, SampleMeanMatchesMoment) {
  const auto d = convolve(make_erlang(3, 2.0), make_exponential(0.5));
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += d.sample(rng);
  const double sd = std::sqrt(variance(d) / n);
  EXPECT_NEAR(sum / n, mean(d), 5.0 * sd);
}

TEST(PhaseType, SamplingIsDeterministicPerSeed) {
  const auto d = make_erlang(4, 1.0);
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(d.sample(a), d.sample(b));
}

// Properties over random representations.
TEST(PhaseTypeProperties, CdfIsMonotoneAndBounded) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = testkit::random_ph(rng, 5);
    double previous = 0.0;
    for (double t = 0.0; t < 30.0; t += 0.37) {
      const double f = cdf(d, t);
      EXPECT_GE(f, previous - 1e-12);
      EXPECT_GE(f, -1e-12);
      EXPECT_LE(f, 1.0 + 1e-12);
      previous = f;
    }
  }
}

TEST(PhaseTypeProperties, ConvolutionAddsMeansAndVariances) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = testkit::random_ph(rng, 4);
    const auto b = testkit::random_ph(rng, 4);
    const auto c = convolve(a, b);
    EXPECT_NEAR(mean(c), mean(a) + mean(b), 1e-9 * (mean(a) + mean(b)));
    EXPECT_NEAR(variance(c), variance(a) + variance(b), 1e-8 * (variance(a) + variance(b)));
  }
}

TEST(PhaseTypeProperties, MeanMatchesIntegratedSurvival) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = testkit::random_ph(rng, 3);
    // Trapezoid rule on 1 - F over a long window.
    const double h = 0.01;
    double integral = 0.0;
    double prev = 1.0 - cdf(d, 0.0);
    for (double t = h; t < 80.0; t += h) {
      const double cur = 1.0 - cdf(d, t);
      integral += 0.5 * h * (prev + cur);
      prev = cur;
    }
    EXPECT_NEAR(integral, mean(d), 1e-3 * mean(d));
  }
}

TEST(PhaseTypeProperties, ExitIsNegativeRowSum) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = testkit::random_ph(rng, 6);
    const Eigen::VectorXd expected = -d.subgen().rowwise().sum();
    EXPECT_LT((d.exit() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(d.exit().minCoeff(), 0.0);
  }
}
