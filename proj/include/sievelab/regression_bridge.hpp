#pragma once

// Fixed-design regression y_i = f(t_i) + sigma xi_i, t_i = i / n, mapped onto
// the sequence model through the discrete orthogonality of the Fourier basis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sievelab/errors.hpp"
#include "sievelab/model_core.hpp"
#include "sievelab/numerics.hpp"
#include "sievelab/rng.hpp"

namespace sievelab {

struct RegressionData {
  std::size_t n = 0;
  std::vector<double> t;
  std::vector<double> y;
  double sigma = 1.0;
};

/// Largest basis index usable with n design points: J <= n - 1 and Fourier
/// frequency floor(J / 2) <= floor((n - 1) / 2).
inline bool within_frequency_cap(std::size_t n, std::size_t J) {
  return n >= 2 && J >= 1 && J <= n - 1 && J / 2 <= (n - 1) / 2;
}

inline void require_frequency_cap(std::size_t n, std::size_t J) {
  require(within_frequency_cap(n, J),
          "basis size J = " + std::to_string(J) + " violates the sub-Nyquist cap for n = " + std::to_string(n));
}

inline double design_point(std::size_t i, std::size_t n) { return static_cast<double>(i) / static_cast<double>(n); }

/// max_{j,k <= J} | (1/n) sum_i psi_j(t_i) psi_k(t_i) - delta_jk |.
inline double check_discrete_orthogonality(std::size_t n, std::size_t J) {
  require_frequency_cap(n, J);
  std::vector<double> psi(n * J);
  for (std::size_t j = 1; j <= J; ++j)
    for (std::size_t i = 1; i <= n; ++i) psi[(j - 1) * n + (i - 1)] = fourier_basis(j, design_point(i, n));
  double worst = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = j; k < J; ++k) {
      CompensatedSum acc;
      for (std::size_t i = 0; i < n; ++i) acc.add(psi[j * n + i] * psi[k * n + i]);
      const double dev = std::abs(acc.value() / static_cast<double>(n) - (j == k ? 1.0 : 0.0));
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

/// f(t) = sum_j theta_j psi_j(t).
inline double evaluate_series(std::span<const double> theta, double t) {
  CompensatedSum acc;
  for (std::size_t j = 0; j < theta.size(); ++j) acc.add(theta[j] * fourier_basis(j + 1, t));
  return acc.value();
}

/// (1/n) sum_i f(t_i)^2.
inline double empirical_norm_sq(std::span<const double> theta, std::size_t n) {
  require_frequency_cap(n, theta.size());
  CompensatedSum acc;
  for (std::size_t i = 1; i <= n; ++i) {
    const double f = evaluate_series(theta, design_point(i, n));
    acc.add(f * f);
  }
  return acc.value() / static_cast<double>(n);
}

/// Regression responses from explicit standard-normal draws xi_1..xi_n.
inline RegressionData regression_with_noise(const TruthVector& truth, std::size_t n, double sigma,
                                            std::size_t J_used, std::span<const double> xi) {
  require_frequency_cap(n, J_used);
  require(J_used <= truth.size(), "J_used exceeds the stored truth");
  require(sigma >= 0.0, "sigma must be non-negative");
  require(xi.size() == n, "need one noise draw per design point");
  RegressionData data;
  data.n = n;
  data.sigma = sigma;
  data.t.resize(n);
  data.y.resize(n);
  const auto theta = truth.coeffs().first(J_used);
  for (std::size_t i = 1; i <= n; ++i) {
    data.t[i - 1] = design_point(i, n);
    data.y[i - 1] = evaluate_series(theta, data.t[i - 1]) + sigma * xi[i - 1];
  }
  return data;
}

inline RegressionData simulate_regression(const TruthVector& truth, std::size_t n, double sigma, std::size_t J_used,
                                          std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<double> xi(n);
  for (std::size_t i = 0; i < n; ++i) xi[i] = rng.normal(i);
  return regression_with_noise(truth, n, sigma, J_used, xi);
}

/// X_j = (1/n) sum_i y_i psi_j(t_i), j <= J. The coefficient noise is exactly
/// N(0, sigma^2 / n), so the observation carries precision n / sigma^2
/// (infinite when sigma = 0).
inline SequenceObservation regression_to_sequence(const RegressionData& data, std::size_t J) {
  require_frequency_cap(data.n, J);
  require(data.y.size() == data.n && data.t.size() == data.n, "regression data size mismatch");
  SequenceObservation obs;
  obs.x.resize(J);
  for (std::size_t j = 1; j <= J; ++j) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < data.n; ++i) acc.add(data.y[i] * fourier_basis(j, data.t[i]));
    obs.x[j - 1] = acc.value() / static_cast<double>(data.n);
  }
  obs.n = data.sigma > 0.0 ? static_cast<double>(data.n) / (data.sigma * data.sigma)
                           : std::numeric_limits<double>::infinity();
  return obs;
}

/// Columns i, t_i, y_i.
inline void write_regression_csv(std::ostream& os, const RegressionData& data) {
  os << "i,t_i,y_i\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < data.n; ++i) os << (i + 1) << ',' << data.t[i] << ',' << data.y[i] << '\n';
}

/// Reads the columns written by write_regression_csv; '#' lines are skipped.
/// The design must be t_i = i / n.
inline RegressionData read_regression_csv(std::istream& is, double sigma) {
  require(sigma >= 0.0, "sigma must be non-negative");
  RegressionData data;
  data.sigma = sigma;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      require(line.rfind("i,t_i,y_i", 0) == 0, "regression CSV: expected header i,t_i,y_i");
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string a, b, c;
    require(std::getline(row, a, ',') && std::getline(row, b, ',') && std::getline(row, c),
            "regression CSV: malformed row at line " + std::to_string(line_no));
    try {
      require(std::stoull(a) == data.t.size() + 1, "regression CSV: rows must be numbered 1..n in order");
      data.t.push_back(std::stod(b));
      data.y.push_back(std::stod(c));
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const InvalidArgument*>(&e)) throw;
      throw InvalidArgument("regression CSV: bad number at line " + std::to_string(line_no));
    }
  }
  require(header && !data.y.empty(), "regression CSV: no data rows");
  data.n = data.y.size();
  for (std::size_t i = 0; i < data.n; ++i)
    require(std::abs(data.t[i] - design_point(i + 1, data.n)) <= 1e-12, "regression CSV: design must be t_i = i/n");
  for (std::size_t i = 0; i < data.n; ++i) data.t[i] = design_point(i + 1, data.n);
  return data;
}

}  // namespace sievelab
