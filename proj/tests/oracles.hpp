#pragma once

// Test-only oracles, written independently of the library's computation paths.

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using hp = boost::multiprecision::cpp_bin_float_50;

inline hp gaussian_density(const hp& x, const hp& var) {
  return exp(-x * x / (2 * var)) / sqrt(2 * boost::math::constants::pi<hp>() * var);
}

/// Posterior model weights over k = 1..K from the unnormalised masses
/// pi(k) prod_{j<=k} N(X_j; 0, tau_j^2 + 1/n) prod_{k<j<=K} N(X_j; 0, 1/n),
/// with pi(k) the Poisson(lambda) mass restricted to 1..K.
inline std::vector<double> direct_posterior_weights(const std::vector<double>& x, double n, double lambda,
                                                    double tau0, double q, std::size_t K) {
  std::vector<hp> mass(K);
  hp total = 0;
  const hp nn = n;
  for (std::size_t k = 1; k <= K; ++k) {
    hp factorial = 1;
    for (std::size_t i = 2; i <= k; ++i) factorial *= i;
    hp m = exp(hp(-lambda)) * pow(hp(lambda), static_cast<int>(k)) / factorial;
    for (std::size_t j = 1; j <= K; ++j) {
      const hp xj = x[j - 1];
      const hp tau2 = hp(tau0) * pow(hp(j), hp(-2 * q));
      m *= j <= k ? gaussian_density(xj, tau2 + 1 / nn) : gaussian_density(xj, 1 / nn);
    }
    mass[k - 1] = m;
    total += m;
  }
  std::vector<double> w(K);
  for (std::size_t k = 0; k < K; ++k) w[k] = static_cast<double>(mass[k] / total);
  return w;
}

/// P(|Y - a| >= b) for Y ~ N(mean, var); 1 when b <= 0.
inline double exceed_1d(double mean, double var, double a, double b) {
  if (b <= 0.0) return 1.0;
  const boost::math::normal_distribution<double> z;
  const double sd = std::sqrt(var);
  return boost::math::cdf(z, (a - b - mean) / sd) + boost::math::cdf(boost::math::complement(z, (a + b - mean) / sd));
}

/// P( sum_{j<=k} (theta_j - t0_j)^2 + fixed >= r ) for independent Gaussian
/// theta_1 ~ N(m1, v1), theta_2 ~ N(m2, v2), k in {1, 2}; the second
/// coordinate is integrated by the trapezoid rule over the first.
inline double exceed_up_to_two(int k, double r, double fixed, double m1, double v1, double t01, double m2, double v2,
                               double t02) {
  if (k == 1) return exceed_1d(m1, v1, t01, std::sqrt(std::max(r - fixed, 0.0)) * (r > fixed ? 1.0 : 0.0));
  const double sd1 = std::sqrt(v1);
  const int nodes = 40000;
  const double lo = m1 - 12 * sd1, hi = m1 + 12 * sd1;
  const double h = (hi - lo) / nodes;
  double acc = 0.0;
  for (int i = 0; i <= nodes; ++i) {
    const double y = lo + h * i;
    const double dens = std::exp(-(y - m1) * (y - m1) / (2 * v1)) / std::sqrt(2 * std::numbers::pi * v1);
    const double rest = r - fixed - (y - t01) * (y - t01);
    const double p = rest > 0.0 ? exceed_1d(m2, v2, t02, std::sqrt(rest)) : 1.0;
    acc += (i == 0 || i == nodes ? 0.5 : 1.0) * dens * p;
  }
  return acc * h;
}

}  // namespace oracle
