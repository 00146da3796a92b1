#pragma once

// Exact conjugate posterior of the sieve prior in the Gaussian sequence model.
//
// Given k, coordinate j <= k is N(s_j X_j, s_j / n) with shrinkage
// s_j = tau_j^2 / (tau_j^2 + 1/n), and coordinates past k are 0. Integrating
// theta out, model k has log mass log pi(k) + sum_{j<=k} delta_j with
//   delta_j = 1/2 [ -log(1 + n tau_j^2) + X_j^2 n (n tau_j^2) / (1 + n tau_j^2) ],
// the log ratio of the N(0, tau_j^2 + 1/n) and N(0, 1/n) densities at X_j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sievelab/errors.hpp"
#include "sievelab/model_core.hpp"
#include "sievelab/numerics.hpp"
#include "sievelab/rng.hpp"
#include "sievelab/sieve_prior.hpp"

namespace sievelab {

struct PosteriorSummary {
  std::vector<double> log_w;  // log pi(k | X), k = 1..K_eff
  std::vector<double> u;      // pi(k >= j | X)
  std::vector<double> s;      // shrinkage factors
  std::vector<double> v;      // s_j / n
  std::size_t K_eff = 0;
  double n = 0.0;

  /// u_j for any j >= 1; zero past the effective support.
  [[nodiscard]] double u_at(std::size_t j) const { return j <= K_eff ? u[j - 1] : 0.0; }
};

/// Log masses below the running maximum by more than this are dropped from
/// the effective support (relative weight below e^-50).
inline constexpr double kNegligibleLogMass = 50.0;
/// Trailing coordinates that must be negligible before an observation that
/// ends before k_max is trusted to carry the whole posterior.
inline constexpr std::size_t kTrailingGuard = 16;

/// Per-coordinate marginal-likelihood log ratio in variance-ratio form.
inline double coordinate_log_ratio(double x, double n, double tau2) {
  const double nt = n * tau2;
  return 0.5 * (-std::log1p(nt) + x * x * n * nt / (1.0 + nt));
}

inline std::vector<double> shrinkage_factors(double n, const SievePriorConfig& prior, std::size_t J) {
  require(n > 0.0, "shrinkage_factors: n must be positive");
  std::vector<double> s(J);
  for (std::size_t j = 1; j <= J; ++j) {
    const double t2 = tau_sq(prior, j);
    s[j - 1] = t2 / (t2 + 1.0 / n);
  }
  return s;
}

/// Effective support: the last k whose log mass is within kNegligibleLogMass
/// of the maximum, and at least min(ceil(4 lambda), scanned range). Throws
/// SizingError when the observation ends before k_max and the posterior still
/// carries mass within kTrailingGuard coordinates of its end.
inline PosteriorSummary compute_posterior(const SequenceObservation& obs, const SievePriorConfig& prior) {
  obs.validate();
  prior.validate();
  require(std::isfinite(obs.n), "compute_posterior: n must be finite");
  const double n = obs.n;
  const std::size_t K_scan = std::min(prior.k_max, obs.size());

  std::vector<double> log_mass(K_scan);
  CompensatedSum cumulative;
  double log_prior = log_prior_k(prior, 1);
  const double log_lambda = std::log(prior.lambda);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= K_scan; ++k) {
    if (k > 1) log_prior += log_lambda - std::log(static_cast<double>(k));
    cumulative.add(coordinate_log_ratio(obs.x[k - 1], n, tau_sq(prior, k)));
    log_mass[k - 1] = log_prior + cumulative.value();
    best = std::max(best, log_mass[k - 1]);
  }

  std::size_t K_eff = 1;
  for (std::size_t k = K_scan; k >= 1; --k) {
    if (log_mass[k - 1] >= best - kNegligibleLogMass) {
      K_eff = k;
      break;
    }
  }
  K_eff = std::max(K_eff, std::min(static_cast<std::size_t>(std::ceil(4.0 * prior.lambda)), K_scan));

  if (K_scan < prior.k_max && K_eff + kTrailingGuard > K_scan) {
    throw SizingError("posterior support reaches the end of the observation (J_obs = " +
                          std::to_string(obs.size()) + "); observe more coordinates",
                      2 * obs.size());
  }

  PosteriorSummary out;
  out.K_eff = K_eff;
  out.n = n;
  log_mass.resize(K_eff);
  // centre first: best + log(sum) would round at the ulp of |best|
  for (double& lm : log_mass) lm -= best;
  const double norm = log_sum_exp(log_mass);
  out.log_w.resize(K_eff);
  for (std::size_t k = 0; k < K_eff; ++k) out.log_w[k] = log_mass[k] - norm;

  out.u.assign(K_eff, 0.0);
  CompensatedSum tail;
  for (std::size_t k = K_eff; k-- > 0;) {
    tail.add(std::exp(out.log_w[k]));
    out.u[k] = std::min(1.0, tail.value());
  }
  out.u[0] = 1.0;

  out.s = shrinkage_factors(n, prior, K_eff);
  out.v.resize(K_eff);
  for (std::size_t j = 0; j < K_eff; ++j) out.v[j] = out.s[j] / n;
  return out;
}

/// theta_hat_j = u_j s_j X_j for j <= K_eff.
inline std::vector<double> posterior_mean(const PosteriorSummary& post, const SequenceObservation& obs) {
  require(obs.size() >= post.K_eff, "posterior_mean: observation shorter than the support");
  std::vector<double> mean(post.K_eff);
  for (std::size_t j = 0; j < post.K_eff; ++j) mean[j] = post.u[j] * post.s[j] * obs.x[j];
  return mean;
}

/// E[ ||theta - theta_0||^2 | X ] in closed form, including the truth's
/// energy past the effective support.
inline double expected_posterior_l2_loss(const PosteriorSummary& post, const SequenceObservation& obs,
                                         const TruthVector& truth) {
  require(truth.size() >= post.K_eff, "expected_posterior_l2_loss: truth shorter than the support");
  require(obs.size() >= post.K_eff, "expected_posterior_l2_loss: observation shorter than the support");
  CompensatedSum acc;
  for (std::size_t j = 0; j < post.K_eff; ++j) {
    const double t0 = truth.coeffs()[j];
    const double bias = post.s[j] * obs.x[j] - t0;
    acc.add(post.u[j] * (bias * bias + post.v[j]) + (1.0 - post.u[j]) * t0 * t0);
  }
  acc.add(truth.energy_after(post.K_eff));
  return acc.value();
}

/// f_hat = sum_j a_j theta_hat_j over the effective support.
inline double pointwise_estimate(const PosteriorSummary& post, const SequenceObservation& obs,
                                 const BasisWeights& weights) {
  require(weights.size() >= post.K_eff, "pointwise_estimate: weights shorter than the support");
  CompensatedSum acc;
  for (std::size_t j = 0; j < post.K_eff; ++j) acc.add(weights.a[j] * post.u[j] * post.s[j] * obs.x[j]);
  return acc.value();
}

struct PosteriorSample {
  std::size_t k = 0;
  std::vector<double> theta;  // length K_eff, zero past k
};

/// Exact sampler from the conjugate mixture. Draw i reads the child stream
/// derive(i): counter 0 picks k, normal counters j pick theta_j.
class PosteriorSampler {
 public:
  PosteriorSampler(const PosteriorSummary& post, const SequenceObservation& obs)
      : cdf_(post.K_eff), mean_(post.K_eff), sd_(post.K_eff) {
    require(obs.size() >= post.K_eff, "PosteriorSampler: observation shorter than the support");
    CompensatedSum c;
    for (std::size_t k = 0; k < post.K_eff; ++k) {
      c.add(std::exp(post.log_w[k]));
      cdf_[k] = c.value();
      mean_[k] = post.s[k] * obs.x[k];
      sd_[k] = std::sqrt(post.v[k]);
    }
  }

  [[nodiscard]] std::size_t support() const noexcept { return cdf_.size(); }

  [[nodiscard]] std::size_t draw_k(const CounterRng& stream) const {
    const double target = stream.uniform(0) * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()) + 1, cdf_.size());
  }

  /// Fills theta (resized to K_eff) and returns k.
  std::size_t draw(const CounterRng& stream, std::vector<double>& theta) const {
    const std::size_t k = draw_k(stream);
    theta.assign(cdf_.size(), 0.0);
    for (std::size_t j = 0; j < k; ++j) theta[j] = mean_[j] + sd_[j] * stream.normal(j + 1);
    return k;
  }

  /// ||theta - theta_0||^2 for one draw, including the truth's tail past k.
  double squared_distance(const CounterRng& stream, const TruthVector& truth) const {
    const std::size_t k = draw_k(stream);
    CompensatedSum acc;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = mean_[j] + sd_[j] * stream.normal(j + 1) - truth.coeffs()[j];
      acc.add(d * d);
    }
    acc.add(truth.energy_after(k));
    return acc.value();
  }

 private:
  std::vector<double> cdf_;
  std::vector<double> mean_;
  std::vector<double> sd_;
};

inline std::vector<PosteriorSample> sample_posterior(const PosteriorSummary& post, const SequenceObservation& obs,
                                                     std::size_t count, std::uint64_t seed) {
  require(count >= 1, "sample_posterior: count must be positive");
  const PosteriorSampler sampler(post, obs);
  const CounterRng root(seed);
  std::vector<PosteriorSample> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i].k = sampler.draw(root.derive(i), out[i].theta);
  return out;
}

struct TailMass {
  double estimate = 0.0;
  double se = 0.0;
};

/// Monte Carlo estimate of Pi( ||theta - theta_0||^2 >= radius_sq | X ).
inline TailMass posterior_tail_mass(const PosteriorSummary& post, const SequenceObservation& obs,
                                    const TruthVector& truth, double radius_sq, std::size_t count,
                                    std::uint64_t seed) {
  require(radius_sq >= 0.0, "posterior_tail_mass: radius must be non-negative");
  require(count >= 1, "posterior_tail_mass: count must be positive");
  require(truth.size() >= post.K_eff, "posterior_tail_mass: truth shorter than the support");
  const PosteriorSampler sampler(post, obs);
  const CounterRng root(seed);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (sampler.squared_distance(root.derive(i), truth) >= radius_sq) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(count);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(count))};
}

/// Posterior masses of the shells M j eps^2 <= ||theta - theta_0||^2 < M (j+1) eps^2.
struct ShellMasses {
  double inner = 0.0;           // below M eps^2
  std::vector<double> shells;   // j = 1..j_max
  double outer = 0.0;           // at or above M (j_max + 1) eps^2
};

inline ShellMasses shell_masses(const PosteriorSummary& post, const SequenceObservation& obs,
                                const TruthVector& truth, double M, double eps_sq, std::size_t j_max,
                                std::size_t count, std::uint64_t seed) {
  require(M > 0.0 && eps_sq > 0.0, "shell_masses: M and eps_sq must be positive");
  require(j_max >= 1 && count >= 1, "shell_masses: j_max and count must be positive");
  require(truth.size() >= post.K_eff, "shell_masses: truth shorter than the support");
  const PosteriorSampler sampler(post, obs);
  const CounterRng root(seed);
  const double unit = M * eps_sq;
  std::vector<std::size_t> counts(j_max + 2, 0);
  for (std::size_t i = 0; i < count; ++i) {
    const double level = std::floor(sampler.squared_distance(root.derive(i), truth) / unit);
    const std::size_t slot = level >= static_cast<double>(j_max + 1) ? j_max + 1 : static_cast<std::size_t>(level);
    ++counts[slot];
  }
  const double total = static_cast<double>(count);
  ShellMasses out;
  out.inner = static_cast<double>(counts[0]) / total;
  out.shells.resize(j_max);
  for (std::size_t j = 1; j <= j_max; ++j) out.shells[j - 1] = static_cast<double>(counts[j]) / total;
  out.outer = static_cast<double>(counts[j_max + 1]) / total;
  return out;
}

}  // namespace sievelab
