#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sievelab/risk_lab.hpp"

using namespace sievelab;

namespace {

SievePriorConfig default_prior() { return SievePriorConfig{}; }

// Straightforward re-derivation: full Gaussian log densities for every model
// k <= J, plain normalisation, posterior mean from the mixture.
struct SlowReplicate {
  double freq_loss = 0.0;
  double posterior_loss = 0.0;
  double pointwise = 0.0;
};

SlowReplicate slow_replicate(const TruthVector& truth, double n, std::size_t J, const CounterRng& stream,
                             double lambda) {
  std::vector<double> x(J);
  for (std::size_t j = 0; j < J; ++j) x[j] = truth.coeffs()[j] + stream.normal(j) / std::sqrt(n);
  auto log_norm = [](double v, double var) { return -0.5 * std::log(2 * std::numbers::pi * var) - v * v / (2 * var); };
  std::vector<long double> logm(J);
  long double hi = -1e300L;
  for (std::size_t k = 1; k <= J; ++k) {
    long double l = -lambda + k * std::log(lambda) - std::lgamma(k + 1.0) - std::log(1 - std::exp(-lambda));
    for (std::size_t j = 1; j <= J; ++j) {
      const double tau2 = 1.0 / (double(j) * j);
      l += j <= k ? log_norm(x[j - 1], tau2 + 1 / n) : log_norm(x[j - 1], 1 / n);
    }
    logm[k - 1] = l;
    hi = std::max(hi, l);
  }
  long double z = 0;
  for (auto l : logm) z += std::exp(l - hi);
  std::vector<double> w(J);
  for (std::size_t k = 0; k < J; ++k) w[k] = static_cast<double>(std::exp(logm[k] - hi) / z);
  SlowReplicate out;
  for (std::size_t j = 1; j <= J; ++j) {
    double u = 0;
    for (std::size_t k = j; k <= J; ++k) u += w[k - 1];
    const double tau2 = 1.0 / (double(j) * j);
    const double s = tau2 / (tau2 + 1 / n);
    const double m = s * x[j - 1];
    const double t = truth(j);
    out.freq_loss += (u * m - t) * (u * m - t);
    out.posterior_loss += u * ((m - t) * (m - t) + s / n) + (1 - u) * t * t;
    out.pointwise += u * m;
  }
  out.freq_loss += truth.energy_after(J);
  out.posterior_loss += truth.energy_after(J);
  return out;
}

}  // namespace

TEST(EpsilonN, ExponentAndScale) {
  EXPECT_NEAR(epsilon_n(1.0, 1000.0), std::pow(std::log(1000.0) / 1000.0, 1.0 / 3.0), 1e-15);
  EXPECT_NEAR(epsilon_n(2.0, 1000.0, 3.0), 3.0 * std::pow(std::log(1000.0) / 1000.0, 0.4), 1e-14);
  const double slope = (std::log(epsilon_n(1.5, 1e8)) - std::log(epsilon_n(1.5, 1e6))) /
                       (std::log(std::log(1e8) / 1e8) - std::log(std::log(1e6) / 1e6));
  EXPECT_NEAR(slope, 1.5 / 4.0, 1e-12);
  EXPECT_THROW(epsilon_n(0.5, 100.0), InvalidArgument);
}

TEST(Penalty, Values) {
  EXPECT_NEAR(penalty_exponent(1.0), 1.0 / 6.0, 1e-15);
  const double star = (1.0 + std::numbers::sqrt2) / 2.0;
  EXPECT_NEAR(penalty_exponent(star), 3.0 - 2.0 * std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(penalty_exponent(star), 0.171573, 1e-6);
  EXPECT_NEAR(penalty_exponent(0.5 + 1e-9), 0.0, 1e-8);
  EXPECT_LT(penalty_exponent(1e6), 1e-6);
}

TEST(Penalty, ArgmaxIsInteriorCriticalPoint) {
  const double star = (1.0 + std::numbers::sqrt2) / 2.0;
  EXPECT_NEAR(penalty_argmax(0.6, 100.0, 0.01), star, 1e-6);
  EXPECT_NEAR(penalty_argmax(0.51, 5.0, 0.2), star, 1e-6);
  EXPECT_NEAR(penalty_argmax(2.0, 100.0, 0.01), 2.0, 1e-9);
  EXPECT_NEAR(penalty_argmax(0.6, 1.0, 0.01), 1.0, 1e-9);
}

TEST(Penalty, UnimodalOnFineGrid) {
  const double star = (1.0 + std::numbers::sqrt2) / 2.0;
  double prev = penalty_exponent(0.5 + 1e-6);
  for (double b = 0.51; b < 50.0; b += 0.01) {
    const double p = penalty_exponent(b);
    if (b < star - 0.01) {
      EXPECT_GT(p, prev) << b;
    } else if (b > star + 0.01) {
      EXPECT_LT(p, prev) << b;
    }
    prev = p;
  }
}

TEST(FitRate, ExactPowerLaw) {
  std::vector<RatePoint> pts;
  for (int e = 9; e <= 17; ++e) {
    const double n = std::ldexp(1.0, e);
    pts.push_back({n, 3.0 * std::pow(n / std::log(n), -2.0 / 3.0)});
  }
  const auto fit = fit_rate(pts, Abscissa::LogNOverLogN, -2.0 / 3.0);
  EXPECT_NEAR(fit.slope, -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-10);
  EXPECT_LT(fit.slope_se, 1e-12);
  EXPECT_DOUBLE_EQ(fit.target, -2.0 / 3.0);
  const auto plain = fit_rate(pts, Abscissa::LogN);
  EXPECT_GT(plain.slope, -2.0 / 3.0);
}

TEST(FitRate, JitteredPowerLawRecoversSlope) {
  std::vector<RatePoint> pts;
  const CounterRng rng(4);
  for (int e = 9; e <= 17; ++e) {
    const double n = std::ldexp(1.0, e);
    pts.push_back({n, std::pow(n, -0.8) * std::exp(0.02 * rng.normal(e))});
  }
  const auto fit = fit_rate(pts, Abscissa::LogN);
  EXPECT_LT(std::abs(fit.slope + 0.8), 4 * fit.slope_se);
  EXPECT_GT(fit.slope_se, 0.0);
}

TEST(FitRate, Rejections) {
  std::vector<RatePoint> three{{10, 1}, {20, 0.5}, {40, 0.25}};
  EXPECT_THROW(fit_rate(three, Abscissa::LogN), InvalidArgument);
  std::vector<RatePoint> bad{{10, 1}, {20, 0.5}, {40, 0.0}, {80, 0.1}};
  EXPECT_THROW(fit_rate(bad, Abscissa::LogN), InvalidArgument);
}

TEST(Replicates, AgreeWithSlowReimplementation) {
  const auto truth = make_polylog_truth(1.0, 10000);
  const double n = 256.0;
  const CounterRng root(1);
  const auto w = basis_weights(BasisKind::AllOnes, 0.0, truth.size());
  ReplicateSettings settings;
  const auto fast = run_replicates(truth, default_prior(), n, 20, 1, &w, settings);
  const double f0 = truth_functional(truth, w);
  for (std::size_t r = 0; r < 20; ++r) {
    const auto slow = slow_replicate(truth, n, 128, root.derive(r), 1.0);
    EXPECT_NEAR(fast[r].freq_loss, slow.freq_loss, 1e-10) << r;
    EXPECT_NEAR(fast[r].posterior_loss, slow.posterior_loss, 1e-10) << r;
    EXPECT_NEAR(fast[r].pointwise_sq, (slow.pointwise - f0) * (slow.pointwise - f0), 1e-10) << r;
  }
}

TEST(Replicates, FrozenGlobalRisk) {
  // beta = 1 polylog truth, n = 256, 200 replicates, seed 1.
  const auto truth = make_polylog_truth(1.0, 10000);
  const auto g = global_risk_experiment(truth, default_prior(), 256.0, 200, 1);
  EXPECT_EQ(g.freq.replicates, 200u);
  EXPECT_NEAR(g.freq.mean, 0.027555091999883152, 1e-12);
  EXPECT_NEAR(g.posterior.mean, 0.041792415933835446, 1e-12);
  double fsum = 0, psum = 0;
  for (std::size_t r = 0; r < 200; ++r) {
    const auto slow = slow_replicate(truth, 256.0, 128, CounterRng(1).derive(r), 1.0);
    fsum += slow.freq_loss;
    psum += slow.posterior_loss;
  }
  EXPECT_NEAR(fsum / 200, g.freq.mean, 1e-11);
  EXPECT_NEAR(psum / 200, g.posterior.mean, 1e-11);
}

TEST(Replicates, FrozenPointwiseRisk) {
  const double star = (1.0 + std::numbers::sqrt2) / 2.0;
  const auto truth = make_polylog_truth(star, 10000);
  const auto w = basis_weights(BasisKind::AllOnes, 0.0, truth.size());
  const auto p = pointwise_risk_experiment(truth, default_prior(), 4096.0, w, 200, 1);
  EXPECT_NEAR(p.mean, 0.034942649187861698, 1e-12);
  const double f0 = truth_functional(truth, w);
  double sum = 0;
  for (std::size_t r = 0; r < 200; ++r) {
    const auto slow = slow_replicate(truth, 4096.0, 320, CounterRng(1).derive(r), 1.0);
    sum += (slow.pointwise - f0) * (slow.pointwise - f0);
  }
  EXPECT_NEAR(sum / 200, p.mean, 1e-11);
}

TEST(Replicates, PosteriorLossDominatesFrequentistLoss) {
  const auto truth = make_polylog_truth(1.5, 10000);
  const auto out = run_replicates(truth, default_prior(), 2048.0, 100, 9, nullptr, ReplicateSettings{});
  for (const auto& o : out) EXPECT_GE(o.posterior_loss, o.freq_loss);
}

TEST(Replicates, StandardErrorShrinksWithReplicates) {
  const auto truth = make_polylog_truth(1.0, 10000);
  const auto a = global_risk_experiment(truth, default_prior(), 1024.0, 400, 2);
  const auto b = global_risk_experiment(truth, default_prior(), 1024.0, 1600, 2);
  const double ratio = (b.freq.se * b.freq.se) / (a.freq.se * a.freq.se);
  EXPECT_GT(ratio, 0.15);
  EXPECT_LT(ratio, 0.4);
}

TEST(Replicates, ZeroWeightsGiveZeroPointwiseRisk) {
  std::vector<double> c(200, 0.0);
  c[0] = 0.5;
  const TruthVector spike(c, SobolevSpec{1.0, 1.0});
  const BasisWeights zero{std::vector<double>(200, 0.0), BasisKind::AllOnes, 0.0};
  const auto out = run_replicates(spike, default_prior(), 100.0, 50, 3, &zero, ReplicateSettings{});
  for (const auto& o : out) {
    EXPECT_EQ(o.pointwise_sq, 0.0);
    EXPECT_GT(o.freq_loss, 0.0);
    EXPECT_TRUE(std::isfinite(o.freq_loss));
  }
}

TEST(Replicates, ThreadCountDoesNotChangeResults) {
  const auto truth = make_polylog_truth(1.0, 10000);
  ReplicateSettings one, four;
  four.threads = 4;
  one.u_probe_index = four.u_probe_index = 3;
  const auto a = run_replicates(truth, default_prior(), 4096.0, 64, 5, nullptr, one);
  const auto b = run_replicates(truth, default_prior(), 4096.0, 64, 5, nullptr, four);
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_EQ(a[r].freq_loss, b[r].freq_loss);
    EXPECT_EQ(a[r].posterior_loss, b[r].posterior_loss);
    EXPECT_EQ(a[r].u_probe, b[r].u_probe);
  }
}

TEST(Replicates, SizingGrowsObservationRange) {
  const auto truth = make_polylog_truth(3.0, 2000);
  ReplicateSettings tiny;
  tiny.J_obs_initial = 2;
  const auto a = run_replicates(truth, default_prior(), 1e6, 10, 6, nullptr, tiny);
  const auto b = run_replicates(truth, default_prior(), 1e6, 10, 6, nullptr, ReplicateSettings{});
  for (std::size_t r = 0; r < a.size(); ++r) EXPECT_NEAR(a[r].freq_loss, b[r].freq_loss, 1e-15);
}

TEST(Contraction, TailMassFallsWithMAndN) {
  ExperimentGrid grid;
  grid.betas = {1.0};
  grid.ns = {256.0, 65536.0};
  grid.replicates = 60;
  grid.Ms = {0.1, 1.0, 10.0};
  const auto rows = contraction_experiment(grid);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); i += 3) {
    EXPECT_GE(rows[i].tail_mass.mean, rows[i + 1].tail_mass.mean);
    EXPECT_GE(rows[i + 1].tail_mass.mean, rows[i + 2].tail_mass.mean);
  }
  EXPECT_LT(rows[5].tail_mass.mean, 0.05);
  EXPECT_NEAR(rows[0].radius_sq, 0.1 * std::pow(epsilon_n(1.0, 256.0), 2), 1e-15);
}

TEST(Grid, Validation) {
  ExperimentGrid grid;
  EXPECT_THROW(grid.validate(), InvalidArgument);
  grid.betas = {1.0};
  grid.ns = {100.0, 50.0};
  EXPECT_THROW(grid.validate(), InvalidArgument);
  grid.ns = {50.0, 100.0};
  EXPECT_NO_THROW(grid.validate());
  grid.ns = {50.0, 1e10};
  EXPECT_EQ(grid.resolved_J_store(), 800000u);
}
