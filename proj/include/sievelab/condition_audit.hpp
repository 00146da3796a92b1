#pragma once

// Numerical checks of the contraction conditions in the white-noise model,
// where every divergence has a closed form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sievelab/errors.hpp"
#include "sievelab/model_core.hpp"
#include "sievelab/numerics.hpp"
#include "sievelab/rng.hpp"
#include "sievelab/sieve_prior.hpp"

namespace sievelab {

/// Slowly varying function L in k_n = M0 j_n log(n) / L(n).
enum class SlowVarying { Log, Constant };

struct AuditConfig {
  double j0 = 1.0;
  double M0 = 2.0;
  int m = 6;
  /// Ceiling for the theta/tau constant; <= 0 selects L0 / tau0.
  double theta_tau_ceiling = 0.0;
  SlowVarying L_kind = SlowVarying::Log;

  void validate() const {
    require(j0 > 0.0, "audit: j0 must be positive");
    require(M0 > 1.0, "audit: M0 must exceed 1");
    require(m >= 2 && m % 2 == 0, "audit: m must be an even integer >= 2");
  }
};

struct Divergence {
  double K = 0.0;
  double V2 = 0.0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "length mismatch between parameter vectors");
  CompensatedSum acc;
  for (std::size_t j = 0; j < a.size(); ++j) acc.add((a[j] - b[j]) * (a[j] - b[j]));
  return acc.value();
}

/// K = n ||theta - theta0||^2 / 2 and V2 = n ||theta - theta0||^2.
inline Divergence kl_white_noise(std::span<const double> theta0, std::span<const double> theta, double n) {
  const double d2 = squared_distance(theta0, theta);
  return {n * d2 / 2.0, n * d2};
}

/// log p_0(X) - log p_theta(X) = n <theta0 - theta, X> - n/2 ||theta0||^2 + n/2 ||theta||^2.
inline double log_likelihood_ratio(std::span<const double> theta0, std::span<const double> theta, double n,
                                   std::span<const double> x) {
  require(theta0.size() == theta.size() && theta.size() == x.size(), "log_likelihood_ratio: length mismatch");
  CompensatedSum acc;
  for (std::size_t j = 0; j < x.size(); ++j) {
    acc.add(n * (theta0[j] - theta[j]) * x[j]);
    acc.add(0.5 * n * (theta[j] * theta[j] - theta0[j] * theta0[j]));
  }
  return acc.value();
}

/// Log-likelihood ratios at `draws` datasets simulated under theta0.
inline std::vector<double> simulate_log_ratios(std::span<const double> theta0, std::span<const double> theta,
                                               double n, std::size_t draws, std::uint64_t seed) {
  require(theta0.size() == theta.size(), "simulate_log_ratios: length mismatch");
  const CounterRng root(seed);
  std::vector<double> out(draws);
  std::vector<double> x(theta0.size());
  const double scale = 1.0 / std::sqrt(n);
  for (std::size_t d = 0; d < draws; ++d) {
    const CounterRng stream = root.derive(d);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = theta0[j] + scale * stream.normal(j);
    out[d] = log_likelihood_ratio(theta0, theta, n, x);
  }
  return out;
}

/// E|Z|^m for standard normal Z and even m: (m - 1)!!.
inline double even_gaussian_moment(int m) {
  require(m >= 0 && m % 2 == 0, "even_gaussian_moment: m must be even");
  double out = 1.0;
  for (int i = m - 1; i > 0; i -= 2) out *= i;
  return out;
}

struct MomentCheck {
  double empirical = 0.0;
  double bound = 0.0;
  bool ok = false;
};

/// Monte Carlo V_{m,0} = E|log(p0/p_theta) - K|^m against the exact Gaussian
/// value (m-1)!! n^{m/2} ||theta0 - theta||^m.
inline MomentCheck vm_moment_check(std::span<const double> theta0, std::span<const double> theta, double n, int m,
                                   std::size_t draws, std::uint64_t seed) {
  require(m >= 2 && m % 2 == 0, "vm_moment_check: m must be even and >= 2");
  require(draws >= 2, "vm_moment_check: need at least two draws");
  const Divergence div = kl_white_noise(theta0, theta, n);
  const auto ratios = simulate_log_ratios(theta0, theta, n, draws, seed);
  std::vector<double> powers(draws);
  for (std::size_t d = 0; d < draws; ++d) powers[d] = std::pow(std::abs(ratios[d] - div.K), m);
  const MeanSe ms = mean_and_se(powers);
  MomentCheck out;
  out.empirical = ms.mean;
  out.bound = even_gaussian_moment(m) * std::pow(div.V2, m / 2.0);
  const double rel = ms.mean > 0.0 ? ms.se / ms.mean : 0.0;
  out.ok = out.empirical <= out.bound * (1.0 + 4.0 * rel);
  return out;
}

struct SieveIndices {
  std::size_t j_n = 0;
  std::size_t k_n = 0;
};

/// j_n = floor(j0 n eps^2 / log n), k_n = floor(M0 j_n log n / L(n)).
inline SieveIndices jn_kn(double n, double eps_n, const AuditConfig& audit) {
  audit.validate();
  require(n >= 3.0, "jn_kn: n must be at least 3");
  require(eps_n >= 0.0, "jn_kn: eps_n must be non-negative");
  const double log_n = std::log(n);
  const double L = audit.L_kind == SlowVarying::Log ? log_n : 1.0;
  SieveIndices out;
  out.j_n = static_cast<std::size_t>(std::floor(audit.j0 * n * eps_n * eps_n / log_n));
  out.k_n = static_cast<std::size_t>(std::floor(audit.M0 * static_cast<double>(out.j_n) * log_n / L));
  return out;
}

struct A1Audit {
  bool ok = false;
  double K_val = 0.0;
  double V_val = 0.0;
  double K_bound = 0.0;
  double V_bound = 0.0;
  std::size_t j_n = 0;
};

/// Divergences between the truth and its projection on the first j_n
/// coordinates: K = n tail / 2, V_m = (m-1)!! (n tail)^{m/2}, against
/// n eps^2 and (n eps^2)^{m/2}.
inline A1Audit audit_A1(const TruthVector& truth, double n, double eps_n, const AuditConfig& audit) {
  A1Audit out;
  out.j_n = jn_kn(n, eps_n, audit).j_n;
  require(out.j_n <= truth.size(), "audit_A1: j_n exceeds the stored truth");
  const double tail = truth.energy_after(out.j_n);
  out.K_val = n * tail / 2.0;
  out.V_val = even_gaussian_moment(audit.m) * std::pow(n * tail, audit.m / 2.0);
  out.K_bound = n * eps_n * eps_n;
  out.V_bound = std::pow(out.K_bound, audit.m / 2.0);
  out.ok = out.K_val <= out.K_bound && out.V_val <= out.V_bound;
  return out;
}

struct ThetaTauAudit {
  double C_min = 0.0;
  double ceiling = 0.0;
  bool ok = false;
};

/// C_min = sum_{j <= j_n} theta_0j^2 / tau_j^2 / (j_n log n).
inline ThetaTauAudit audit_theta_tau(const TruthVector& truth, const SievePriorConfig& prior, std::size_t j_n,
                                     double n, const AuditConfig& audit = {}) {
  prior.validate();
  require(j_n >= 1 && j_n <= truth.size(), "audit_theta_tau: j_n must lie in [1, J_store]");
  require(n >= 3.0, "audit_theta_tau: n must be at least 3");
  CompensatedSum acc;
  for (std::size_t j = 1; j <= j_n; ++j) acc.add(truth(j) * truth(j) / tau_sq(prior, j));
  ThetaTauAudit out;
  out.C_min = acc.value() / (static_cast<double>(j_n) * std::log(n));
  out.ceiling = audit.theta_tau_ceiling > 0.0 ? audit.theta_tau_ceiling : truth.spec().L0 / prior.tau0;
  out.ok = std::isfinite(out.C_min) && out.C_min <= out.ceiling;
  return out;
}

struct NormTailAudit {
  double estimate = 0.0;
  double se = 0.0;
  double chernoff = 1.0;
  double threshold = 0.0;
};

/// log E exp(t S) for S = sum_j tau_j^2 Z_j^2.
inline double log_mgf_scaled_chisq(std::span<const double> tau2, double t) {
  double out = 0.0;
  for (double v : tau2) out -= 0.5 * std::log1p(-2.0 * t * v);
  return out;
}

/// Chernoff bound on P(S > c^2), optimised over t in [0, 1 / (2 max tau^2)).
inline double chernoff_norm_tail(std::span<const double> tau2, double threshold) {
  const double c2 = threshold * threshold;
  const double t_max = 0.5 / *std::max_element(tau2.begin(), tau2.end()) * (1.0 - 1e-9);
  const auto log_bound = [&](double t) { return -t * c2 + log_mgf_scaled_chisq(tau2, t); };
  const double t_star = golden_section_max([&](double t) { return -log_bound(t); }, 0.0, t_max, 1e-12 * t_max);
  return std::min(1.0, std::exp(std::min(log_bound(t_star), 0.0)));
}

/// Prior mass of { ||theta||_2 > threshold } given k_n, by Monte Carlo, with
/// the Chernoff certificate.
inline NormTailAudit norm_tail(const SievePriorConfig& prior, std::size_t k_n, double threshold, std::size_t draws,
                               std::uint64_t seed) {
  prior.validate();
  require(k_n >= 1, "norm_tail: k_n must be positive");
  require(draws >= 1, "norm_tail: draws must be positive");
  require(threshold >= 0.0, "norm_tail: threshold must be non-negative");
  const auto tau2 = scale_sequence(prior, k_n);
  const CounterRng root(seed);
  const double c2 = threshold * threshold;
  std::size_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const CounterRng stream = root.derive(d);
    double s = 0.0;
    for (std::size_t j = 0; j < k_n; ++j) {
      const double z = stream.normal(j);
      s += tau2[j] * z * z;
    }
    if (s > c2) ++hits;
  }
  NormTailAudit out;
  out.threshold = threshold;
  out.estimate = static_cast<double>(hits) / static_cast<double>(draws);
  out.se = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(draws));
  out.chernoff = chernoff_norm_tail(tau2, threshold);
  return out;
}

inline NormTailAudit audit_lemma2_norm_tail(const SievePriorConfig& prior, std::size_t k_n, double Q, double n,
                                            std::size_t draws, std::uint64_t seed) {
  require(Q > 0.0, "audit_lemma2_norm_tail: Q must be positive");
  return norm_tail(prior, k_n, std::pow(n, Q), draws, seed);
}

}  // namespace sievelab
