#pragma once

// Hierarchical sieve prior: k ~ Poisson(lambda) conditioned on k >= 1, then
// theta_j / tau_j ~ N(0, 1) independently for j <= k and theta_j = 0 beyond.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "sievelab/errors.hpp"
#include "sievelab/numerics.hpp"

namespace sievelab {

struct SievePriorConfig {
  double lambda = 1.0;
  double tau0 = 1.0;
  double q = 1.0;
  /// Hard cap on the dimension support used by the posterior engine.
  std::size_t k_max = 10000;
  /// Coordinate-sum cap of the truncated prior variant. Stored and reported
  /// only; the conjugate engine ignores it.
  std::optional<double> truncation_radius;

  void validate() const {
    require(lambda > 0.0, "prior lambda must be positive");
    require(tau0 > 0.0, "prior tau0 must be positive");
    require(q > 0.5 && q <= 1.0, "prior exponent q must lie in (1/2, 1]");
    require(k_max >= 1, "prior k_max must be positive");
    require(!truncation_radius || *truncation_radius > 0.0, "truncation radius must be positive");
  }
};

/// log of e^{-lambda} lambda^k / k! / (1 - e^{-lambda}), k >= 1.
inline double log_prior_k(const SievePriorConfig& cfg, std::size_t k) {
  require(k >= 1, "log_prior_k: the prior lives on k >= 1");
  const double kd = static_cast<double>(k);
  return -cfg.lambda + kd * std::log(cfg.lambda) - boost::math::lgamma(kd + 1.0) -
         std::log(-std::expm1(-cfg.lambda));
}

/// tau_j^2 = tau0 * j^{-2q}.
inline double tau_sq(const SievePriorConfig& cfg, std::size_t j) {
  require(j >= 1, "tau_sq: index must be positive");
  return cfg.tau0 * std::pow(static_cast<double>(j), -2.0 * cfg.q);
}

/// tau_1^2 .. tau_J^2.
inline std::vector<double> scale_sequence(const SievePriorConfig& cfg, std::size_t J) {
  std::vector<double> out(J);
  for (std::size_t j = 1; j <= J; ++j) out[j - 1] = tau_sq(cfg, j);
  return out;
}

/// log sum_{k > k_n} pi(k), summed in log domain from k_n + 1 upward until
/// the terms are negligible. k_n = 0 gives log 1 = 0.
inline double log_prior_mass_dimension_tail(const SievePriorConfig& cfg, std::size_t k_n) {
  std::vector<double> terms;
  double lp = log_prior_k(cfg, k_n + 1);
  double running = lp;
  for (std::size_t k = k_n + 1;; ++k) {
    if (k > k_n + 1) lp += std::log(cfg.lambda) - std::log(static_cast<double>(k));
    terms.push_back(lp);
    running = std::max(running, lp);
    // Past the mode terms shrink geometrically by lambda / k.
    if (static_cast<double>(k) > 2.0 * cfg.lambda && lp < running - 40.0) break;
  }
  return log_sum_exp(terms);
}

inline double prior_mass_dimension_tail(const SievePriorConfig& cfg, std::size_t k_n) {
  return std::exp(log_prior_mass_dimension_tail(cfg, k_n));
}

/// Prior mass on the computational support {1, ..., k_max}.
inline double prior_support_mass(const SievePriorConfig& cfg) {
  return -std::expm1(log_prior_mass_dimension_tail(cfg, cfg.k_max));
}

struct PriorTailAudit {
  double a_fit = 0.0;
  double b_fit = 0.0;
  bool ok = false;
};

/// Tightest constants in exp(-a k log k) <= pi(k) <= exp(-b k log k) over
/// 2 <= k <= k_check.
inline PriorTailAudit audit_prior_tail(const SievePriorConfig& cfg, std::size_t k_check) {
  require(k_check >= 3, "audit_prior_tail: k_check must be at least 3");
  PriorTailAudit out;
  out.a_fit = -std::numeric_limits<double>::infinity();
  out.b_fit = std::numeric_limits<double>::infinity();
  for (std::size_t k = 2; k <= k_check; ++k) {
    const double kd = static_cast<double>(k);
    const double ratio = -log_prior_k(cfg, k) / (kd * std::log(kd));
    out.a_fit = std::max(out.a_fit, ratio);
    out.b_fit = std::min(out.b_fit, ratio);
  }
  out.ok = out.b_fit > 0.0 && std::isfinite(out.a_fit);
  return out;
}

}  // namespace sievelab
