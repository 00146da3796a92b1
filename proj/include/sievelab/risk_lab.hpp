#pragma once

// Monte Carlo risk and contraction experiments, rate fitting and the
// pointwise penalty exponent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sievelab/errors.hpp"
#include "sievelab/model_core.hpp"
#include "sievelab/numerics.hpp"
#include "sievelab/parallel.hpp"
#include "sievelab/posterior.hpp"
#include "sievelab/rng.hpp"
#include "sievelab/sieve_prior.hpp"

namespace sievelab {

struct RiskEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t replicates = 0;
};

inline RiskEstimate make_risk_estimate(std::span<const double> values) {
  const MeanSe m = mean_and_se(values);
  return {m.mean, m.se, values.size()};
}

/// eps_n(beta) = eps0 (log n / n)^{beta / (2 beta + 1)}.
inline double epsilon_n(double beta, double n, double eps0 = 1.0) {
  require(beta > 0.5, "epsilon_n: beta must exceed 1/2");
  require(n >= 2.0, "epsilon_n: n must be at least 2");
  return eps0 * std::pow(std::log(n) / n, beta / (2.0 * beta + 1.0));
}

/// Gap between the pointwise minimax exponent and the sieve-prior pointwise
/// lower-bound exponent: (2b - 1) / (2b (2b + 1)).
inline double penalty_exponent(double beta) {
  require(beta > 0.5, "penalty_exponent: beta must exceed 1/2");
  return (2.0 * beta - 1.0) / (2.0 * beta * (2.0 * beta + 1.0));
}

/// Grid argmax of the penalty on [lo, hi], refined by golden section.
inline double penalty_argmax(double lo, double hi, double step) {
  require(lo > 0.5 && hi > lo, "penalty_argmax: need 1/2 < lo < hi");
  require(step > 0.0, "penalty_argmax: step must be positive");
  double best_beta = lo;
  double best = penalty_exponent(lo);
  for (double b = lo; b <= hi; b += step) {
    const double p = penalty_exponent(b);
    if (p > best) {
      best = p;
      best_beta = b;
    }
  }
  if (penalty_exponent(hi) > best) best_beta = hi;
  const double a = std::max(lo, best_beta - step);
  const double c = std::min(hi, best_beta + step);
  return golden_section_max([](double b) { return penalty_exponent(b); }, a, c, 1e-9);
}

enum class Abscissa { LogN, LogNOverLogN };

inline double abscissa_value(double n, Abscissa kind) {
  return kind == Abscissa::LogN ? std::log(n) : std::log(n / std::log(n));
}

struct RatePoint {
  double n = 0.0;
  double risk = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double target = std::numeric_limits<double>::quiet_NaN();
  Abscissa abscissa = Abscissa::LogNOverLogN;
};

/// OLS of log(risk) on log(n) or log(n / log n).
inline RateFit fit_rate(std::span<const RatePoint> points, Abscissa abscissa,
                        double target = std::numeric_limits<double>::quiet_NaN()) {
  require(points.size() >= 4, "fit_rate: at least 4 points are required");
  std::vector<double> x, y;
  for (const auto& p : points) {
    require(p.risk > 0.0, "fit_rate: risks must be positive");
    require(p.n > std::exp(1.0), "fit_rate: n must exceed e");
    x.push_back(abscissa_value(p.n, abscissa));
    y.push_back(std::log(p.risk));
  }
  const LineFit line = ordinary_least_squares(x, y);
  return {line.slope, line.intercept, line.slope_se, target, abscissa};
}

/// Per-replicate quantities shared by the risk experiments.
struct ReplicateOutcome {
  double freq_loss = 0.0;       // ||theta_hat - theta_0||^2
  double posterior_loss = 0.0;  // E[||theta - theta_0||^2 | X]
  double pointwise_sq = 0.0;    // (f_hat - f_0)^2
  double u_probe = 0.0;         // u at the probe index
  std::size_t K_eff = 0;
};

struct ReplicateSettings {
  /// Observation length tried first; doubled on SizingError up to J_store.
  std::size_t J_obs_initial = 0;
  /// Index at which u_j is reported (0 disables).
  std::size_t u_probe_index = 0;
  std::size_t threads = 1;
};

inline std::size_t default_J_obs(const TruthVector& truth, double n) {
  const auto guess = static_cast<std::size_t>(4.0 * std::ceil(std::sqrt(n))) + 64;
  return std::min(truth.size(), guess);
}

/// Observation and posterior for one replicate stream, growing the observed
/// range until the posterior support fits.
struct FittedReplicate {
  SequenceObservation obs;
  PosteriorSummary post;
};

inline FittedReplicate fit_replicate(const TruthVector& truth, const SievePriorConfig& prior, double n,
                                     const CounterRng& stream, std::size_t J_obs) {
  J_obs = std::clamp<std::size_t>(J_obs, 1, truth.size());
  for (;;) {
    SequenceObservation obs = simulate_sequence(truth, n, J_obs, stream);
    try {
      PosteriorSummary post = compute_posterior(obs, prior);
      return {std::move(obs), std::move(post)};
    } catch (const SizingError&) {
      if (J_obs >= truth.size()) throw;
      J_obs = std::min(truth.size(), 2 * J_obs);
    }
  }
}

inline ReplicateOutcome evaluate_replicate(const TruthVector& truth, const FittedReplicate& fit,
                                           const BasisWeights* weights, double f0, std::size_t u_probe) {
  const auto& [obs, post] = fit;
  ReplicateOutcome out;
  out.K_eff = post.K_eff;
  const auto mean = posterior_mean(post, obs);
  CompensatedSum freq;
  for (std::size_t j = 0; j < post.K_eff; ++j) {
    const double d = mean[j] - truth.coeffs()[j];
    freq.add(d * d);
  }
  freq.add(truth.energy_after(post.K_eff));
  out.freq_loss = freq.value();
  out.posterior_loss = expected_posterior_l2_loss(post, obs, truth);
  if (weights != nullptr) {
    const double d = pointwise_estimate(post, obs, *weights) - f0;
    out.pointwise_sq = d * d;
  }
  if (u_probe > 0) out.u_probe = post.u_at(u_probe);
  return out;
}

/// All replicate outcomes at one (truth, n). Replicate r uses the stream
/// CounterRng(seed).derive(r); the result does not depend on `threads`.
inline std::vector<ReplicateOutcome> run_replicates(const TruthVector& truth, const SievePriorConfig& prior,
                                                    double n, std::size_t replicates, std::uint64_t seed,
                                                    const BasisWeights* weights, const ReplicateSettings& settings) {
  require(replicates >= 1, "run_replicates: replicates must be positive");
  prior.validate();
  const double f0 = weights != nullptr ? truth_functional(truth, *weights) : 0.0;
  const std::size_t J_obs = settings.J_obs_initial > 0 ? settings.J_obs_initial : default_J_obs(truth, n);
  const CounterRng root(seed);
  std::vector<ReplicateOutcome> out(replicates);
  parallel_for(replicates, settings.threads, [&](std::size_t r) {
    const FittedReplicate fit = fit_replicate(truth, prior, n, root.derive(r), J_obs);
    out[r] = evaluate_replicate(truth, fit, weights, f0, settings.u_probe_index);
  });
  return out;
}

struct GlobalRisk {
  RiskEstimate freq;
  RiskEstimate posterior;
};

template <class Field>
RiskEstimate summarize(std::span<const ReplicateOutcome> outcomes, Field field) {
  std::vector<double> values;
  values.reserve(outcomes.size());
  for (const auto& o : outcomes) values.push_back(o.*field);
  return make_risk_estimate(values);
}

/// Frequentist risk of the posterior mean and the expected posterior loss.
inline GlobalRisk global_risk_experiment(const TruthVector& truth, const SievePriorConfig& prior, double n,
                                         std::size_t replicates, std::uint64_t seed, std::size_t threads = 1) {
  ReplicateSettings settings;
  settings.threads = threads;
  const auto outcomes = run_replicates(truth, prior, n, replicates, seed, nullptr, settings);
  return {summarize(std::span<const ReplicateOutcome>(outcomes), &ReplicateOutcome::freq_loss),
          summarize(std::span<const ReplicateOutcome>(outcomes), &ReplicateOutcome::posterior_loss)};
}

/// E (f_hat(t) - f_0(t))^2 for the functional defined by `weights`.
inline RiskEstimate pointwise_risk_experiment(const TruthVector& truth, const SievePriorConfig& prior, double n,
                                              const BasisWeights& weights, std::size_t replicates,
                                              std::uint64_t seed, std::size_t threads = 1) {
  ReplicateSettings settings;
  settings.threads = threads;
  const auto outcomes = run_replicates(truth, prior, n, replicates, seed, &weights, settings);
  return summarize(std::span<const ReplicateOutcome>(outcomes), &ReplicateOutcome::pointwise_sq);
}

enum class TruthKind { Polylog, Random };

struct ExperimentGrid {
  std::vector<double> betas;
  std::vector<double> ns;
  std::size_t replicates = 200;
  SievePriorConfig prior;
  TruthKind truth_kind = TruthKind::Polylog;
  double L0 = 1.0;    // random truths only
  double fill = 1.0;  // random truths only
  std::vector<double> Ms{10.0};
  double eps0 = 1.0;
  std::uint64_t seed = 1;
  std::size_t J_store = 0;  // 0: max(10^4, 8 ceil(sqrt(n_max)))
  std::size_t posterior_draws = 200;
  std::size_t threads = 1;

  void validate() const {
    require(!betas.empty(), "grid: betas must not be empty");
    for (double b : betas) require(b > 0.5, "grid: every beta must exceed 1/2");
    require(!ns.empty(), "grid: ns must not be empty");
    for (std::size_t i = 0; i < ns.size(); ++i) {
      require(ns[i] >= 2.0, "grid: every n must be at least 2");
      require(i == 0 || ns[i] > ns[i - 1], "grid: ns must be strictly increasing");
    }
    require(replicates >= 30, "grid: at least 30 replicates are required");
    require(!Ms.empty(), "grid: at least one M is required");
    for (double m : Ms) require(m > 0.0, "grid: M must be positive");
    require(eps0 > 0.0, "grid: eps0 must be positive");
    require(posterior_draws >= 1, "grid: posterior_draws must be positive");
    prior.validate();
  }

  [[nodiscard]] std::size_t resolved_J_store() const {
    if (J_store > 0) return J_store;
    const double n_max = ns.empty() ? 1.0 : ns.back();
    return std::max<std::size_t>(10000, 8 * static_cast<std::size_t>(std::ceil(std::sqrt(n_max))));
  }

  [[nodiscard]] TruthVector make_truth(double beta) const {
    const std::size_t J = resolved_J_store();
    if (truth_kind == TruthKind::Polylog) return make_polylog_truth(beta, J);
    return make_random_sobolev_truth(SobolevSpec{beta, L0}, fill, J, seed ^ 0x5bd1e995ULL);
  }
};

struct ContractionRow {
  double beta = 0.0;
  double n = 0.0;
  double M = 0.0;
  double radius_sq = 0.0;
  RiskEstimate tail_mass;
};

/// Replicate-averaged Pi( ||theta - theta_0||^2 >= M eps_n(beta)^2 | X ) for
/// every (beta, n, M). All M share the same posterior draws, so the masses
/// are exactly non-increasing in M.
inline std::vector<ContractionRow> contraction_experiment(const ExperimentGrid& grid) {
  grid.validate();
  std::vector<ContractionRow> rows;
  for (double beta : grid.betas) {
    const TruthVector truth = grid.make_truth(beta);
    for (double n : grid.ns) {
      const double eps = epsilon_n(beta, n, grid.eps0);
      std::vector<double> radii;
      for (double M : grid.Ms) radii.push_back(M * eps * eps);
      const CounterRng root(grid.seed);
      // masses[r][m]
      std::vector<std::vector<double>> masses(grid.replicates, std::vector<double>(radii.size(), 0.0));
      parallel_for(grid.replicates, grid.threads, [&](std::size_t r) {
        const CounterRng stream = root.derive(r);
        const FittedReplicate fit = fit_replicate(truth, grid.prior, n, stream, default_J_obs(truth, n));
        const PosteriorSampler sampler(fit.post, fit.obs);
        const CounterRng draws = stream.derive(0xc0ffeeULL);
        std::vector<std::size_t> hits(radii.size(), 0);
        for (std::size_t i = 0; i < grid.posterior_draws; ++i) {
          const double d2 = sampler.squared_distance(draws.derive(i), truth);
          for (std::size_t m = 0; m < radii.size(); ++m) hits[m] += d2 >= radii[m] ? 1 : 0;
        }
        for (std::size_t m = 0; m < radii.size(); ++m)
          masses[r][m] = static_cast<double>(hits[m]) / static_cast<double>(grid.posterior_draws);
      });
      for (std::size_t m = 0; m < radii.size(); ++m) {
        std::vector<double> col(grid.replicates);
        for (std::size_t r = 0; r < grid.replicates; ++r) col[r] = masses[r][m];
        rows.push_back({beta, n, grid.Ms[m], radii[m], make_risk_estimate(col)});
      }
    }
  }
  return rows;
}

}  // namespace sievelab
