#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sievelab/condition_audit.hpp"

using namespace sievelab;

namespace {

// Imhof inversion for P(sum lambda_j Z_j^2 > x), Simpson on [0, U].
double imhof_exceedance(const std::vector<double>& lambda, double x) {
  auto f = [&](double u) {
    if (u == 0.0) {
      double s = 0.0;
      for (double l : lambda) s += l;
      return 0.5 * (s - x);
    }
    double theta = -0.5 * x * u, log_rho = 0.0;
    for (double l : lambda) {
      theta += 0.5 * std::atan(l * u);
      log_rho += 0.25 * std::log1p(l * l * u * u);
    }
    return std::sin(theta) / (u * std::exp(log_rho));
  };
  const double U = 2e4;
  const long steps = 4000000;
  const double h = U / steps;
  double acc = f(0.0) + f(U);
  for (long i = 1; i < steps; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return 0.5 + acc * h / 3.0 / std::numbers::pi;
}

}  // namespace

TEST(WhiteNoiseDivergence, Example) {
  const std::vector<double> a{0.3, -0.4}, b{0.0, 0.0};
  const auto d = kl_white_noise(a, b, 10.0);
  EXPECT_NEAR(d.K, 1.25, 1e-15);
  EXPECT_NEAR(d.V2, 2.5, 1e-15);
  EXPECT_EQ(kl_white_noise(a, a, 10.0).K, 0.0);
  const std::vector<double> shorter{0.1};
  EXPECT_THROW(kl_white_noise(a, shorter, 10.0), InvalidArgument);
}

TEST(WhiteNoiseDivergence, LogRatioMomentsMatch) {
  const std::vector<double> t0{0.5, 0.2, -0.1, 0.05}, t{0.4, 0.3, 0.0, 0.0};
  const double n = 50.0;
  const auto d = kl_white_noise(t0, t, n);
  const auto r = simulate_log_ratios(t0, t, n, 200000, 3);
  const auto ms = mean_and_se(r);
  EXPECT_LT(std::abs(ms.mean - d.K), 4 * ms.se);
  double var = 0.0;
  for (double v : r) var += (v - ms.mean) * (v - ms.mean);
  var /= static_cast<double>(r.size() - 1);
  // se of a Gaussian sample variance: V sqrt(2 / (N - 1))
  EXPECT_LT(std::abs(var - d.V2), 4 * d.V2 * std::sqrt(2.0 / 199999.0));
}

TEST(WhiteNoiseDivergence, LogRatioIsExactAtGivenData) {
  const std::vector<double> t0{1.0, 0.0}, t{0.0, 0.0}, x{1.0, 0.0};
  // n = 2: log N(1;1,1/2) - log N(1;0,1/2) = n/2
  EXPECT_NEAR(log_likelihood_ratio(t0, t, 2.0, x), 1.0, 1e-15);
}

TEST(MomentCheck, EvenMoments) {
  EXPECT_EQ(even_gaussian_moment(0), 1.0);
  EXPECT_EQ(even_gaussian_moment(2), 1.0);
  EXPECT_EQ(even_gaussian_moment(4), 3.0);
  EXPECT_EQ(even_gaussian_moment(6), 15.0);
  EXPECT_THROW(even_gaussian_moment(3), InvalidArgument);
  const std::vector<double> t0{0.3, -0.4}, t{0.0, 0.0};
  for (int m : {2, 4}) {
    const auto c = vm_moment_check(t0, t, 10.0, m, 200000, 7);
    EXPECT_TRUE(c.ok) << m;
    EXPECT_NEAR(c.bound, even_gaussian_moment(m) * std::pow(2.5, m / 2.0), 1e-12);
    EXPECT_NEAR(c.empirical / c.bound, 1.0, m == 2 ? 0.02 : 0.05);
  }
}

TEST(SieveIndices, Examples) {
  AuditConfig a;
  const auto s = jn_kn(1000.0, 0.1, a);
  EXPECT_EQ(s.j_n, 1u);
  EXPECT_EQ(s.k_n, 2u);
  a.L_kind = SlowVarying::Constant;
  EXPECT_EQ(jn_kn(1000.0, 0.1, a).k_n, static_cast<std::size_t>(2 * std::log(1000.0)));
  EXPECT_EQ(jn_kn(1000.0, 0.0, a).j_n, 0u);
  EXPECT_THROW(jn_kn(2.0, 0.1, a), InvalidArgument);
  AuditConfig bad;
  bad.j0 = 0.0;
  EXPECT_THROW(jn_kn(1000.0, 0.1, bad), InvalidArgument);
}

TEST(AuditA1, ValuesAndBounds) {
  const auto truth = make_polylog_truth(1.0, 10000);
  const double n = 4096.0;
  const double eps = std::pow(std::log(n) / n, 1.0 / 3.0);
  const auto a = audit_A1(truth, n, eps, AuditConfig{});
  ASSERT_GE(a.j_n, 1u);
  const double tail = truth.energy_after(a.j_n);
  EXPECT_NEAR(a.K_val, n * tail / 2, 1e-12 * a.K_val);
  EXPECT_NEAR(a.V_val, 15.0 * std::pow(n * tail, 3.0), 1e-12 * a.V_val);
  EXPECT_NEAR(a.K_bound, n * eps * eps, 1e-12);
  EXPECT_TRUE(a.ok);
}

TEST(AuditA1, ZeroRadiusFails) {
  const auto truth = make_polylog_truth(1.0, 1000);
  const auto a = audit_A1(truth, 4096.0, 0.0, AuditConfig{});
  EXPECT_FALSE(a.ok);
  EXPECT_EQ(a.j_n, 0u);
  EXPECT_GT(a.K_val, 0.0);
}

TEST(AuditA1, DivergenceFallsAsRadiusGrows) {
  const auto truth = make_polylog_truth(1.5, 10000);
  double prev = INFINITY;
  for (double eps = 0.05; eps < 1.0; eps += 0.05) {
    const auto a = audit_A1(truth, 1e4, eps, AuditConfig{});
    EXPECT_LE(a.K_val, prev);
    prev = a.K_val;
  }
}

TEST(AuditThetaTau, HandComputed) {
  const TruthVector truth({0.5, 0.25, 0.1}, SobolevSpec{1.0, 1.0});
  SievePriorConfig prior;
  const auto a = audit_theta_tau(truth, prior, 3, 100.0);
  const double expect = (0.25 + 0.0625 * 4 + 0.01 * 9) / (3 * std::log(100.0));
  EXPECT_NEAR(a.C_min, expect, 1e-15);
  EXPECT_EQ(a.ceiling, 1.0);
  EXPECT_TRUE(a.ok);
  AuditConfig tight;
  tight.theta_tau_ceiling = expect / 2;
  EXPECT_FALSE(audit_theta_tau(truth, prior, 3, 100.0, tight).ok);
  EXPECT_THROW(audit_theta_tau(truth, prior, 4, 100.0), InvalidArgument);
}

TEST(NormTail, MatchesImhofInversion) {
  SievePriorConfig prior;
  const auto tau2 = scale_sequence(prior, 5);
  for (double c : {1.5, 2.0, 3.0}) {
    const auto a = norm_tail(prior, 5, c, 1000000, 13);
    const double exact = imhof_exceedance(tau2, c * c);
    EXPECT_LT(std::abs(a.estimate - exact), 4 * std::sqrt(exact * (1 - exact) / 1e6)) << c;
    EXPECT_LE(exact, a.chernoff) << c;
    EXPECT_LE(a.estimate, a.chernoff) << c;
  }
}

TEST(NormTail, ChernoffEdges) {
  const std::vector<double> unit{1.0};
  EXPECT_LE(chernoff_norm_tail(unit, 0.0), 1.0);
  EXPECT_GT(chernoff_norm_tail(unit, 0.5), 0.9);
  // one chi-square: P(Z^2 > c^2) <= c exp((1 - c^2)/2)
  EXPECT_NEAR(chernoff_norm_tail(unit, 3.0), 3.0 * std::exp(-4.0), 1e-6);
  EXPECT_NEAR(log_mgf_scaled_chisq(unit, 0.25), -0.5 * std::log(0.5), 1e-15);
}

TEST(NormTail, PolynomialThresholdIsNegligible) {
  SievePriorConfig prior;
  const auto a = audit_lemma2_norm_tail(prior, 60, 0.5, 4096.0, 10000, 1);
  EXPECT_EQ(a.threshold, 64.0);
  EXPECT_EQ(a.estimate, 0.0);
  EXPECT_LT(a.chernoff, 1e-300);
}
