#pragma once

// Truth sequences in Sobolev balls, the Gaussian sequence model and basis
// weight vectors for pointwise functionals.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "sievelab/errors.hpp"
#include "sievelab/numerics.hpp"
#include "sievelab/rng.hpp"

namespace sievelab {

struct SobolevSpec {
  double beta = 1.0;
  double L0 = 1.0;

  void validate() const {
    require(beta > 0.5, "smoothness beta must exceed 1/2");
    require(L0 > 0.0, "Sobolev radius L0 must be positive");
  }
};

/// Value of an infinite series tail together with a bound on its error.
struct SeriesTail {
  double value = 0.0;
  double error = 0.0;
};

/// Sum of term(i) for i > start.
///
/// Terms are summed directly until the increment drops below 1e-14 of the
/// running total (or a hard cap is hit); the remainder past the last summed
/// index N is the midpoint integral of term over [N + 1/2, inf). For a
/// positive decreasing term the exact remainder lies between the integrals
/// over [N + 1, inf) and [N, inf), so term(N) bounds the error.
template <class Term>
SeriesTail series_tail(Term&& term, std::size_t start, std::size_t max_terms = std::size_t{1} << 21) {
  CompensatedSum acc;
  std::size_t i = start + 1;
  std::size_t last = start;
  for (std::size_t count = 0; count < max_terms; ++count, ++i) {
    const double t = term(static_cast<double>(i));
    acc.add(t);
    last = i;
    if (t <= 1e-14 * acc.value()) break;
  }
  boost::math::quadrature::exp_sinh<double> integrator;
  const double a = static_cast<double>(last) + 0.5;
  double quad_err = 0.0;
  // Integrate over [a, inf) as [0, inf) in the shifted variable.
  const double remainder =
      integrator.integrate([&](double y) { return term(a + y); }, 1e-12, &quad_err);
  SeriesTail out;
  out.value = acc.value() + remainder;
  out.error = term(static_cast<double>(last)) + std::abs(quad_err) * std::abs(remainder);
  return out;
}

/// A true coefficient sequence theta_0 stored up to J_store, with the
/// energy past J_store carried as scalars.
class TruthVector {
 public:
  /// `tail_energy` is the sum of squares past the stored range; `tail_linear`
  /// the plain sum past it, or nullopt when that series does not converge.
  TruthVector(std::vector<double> coeffs, SobolevSpec spec, double tail_energy = 0.0,
              double tail_error = 0.0, std::optional<double> tail_linear = 0.0)
      : coeffs_(std::move(coeffs)),
        spec_(spec),
        tail_energy_(tail_energy),
        tail_error_(tail_error),
        tail_linear_(tail_linear) {
    spec_.validate();
    require(!coeffs_.empty(), "truth needs at least one stored coefficient");
    require(tail_energy_ >= 0.0, "tail energy must be non-negative");
    CompensatedSum energy;
    for (std::size_t j = 0; j < coeffs_.size(); ++j) {
      require(std::isfinite(coeffs_[j]), "truth coefficients must be finite");
      energy.add(coeffs_[j] * coeffs_[j] * std::pow(static_cast<double>(j + 1), 2.0 * spec_.beta));
    }
    sobolev_energy_ = energy.value();
    // Closed ball, up to rounding of an exact rescale.
    require(sobolev_energy_ <= spec_.L0 * (1.0 + 1e-12), "truth lies outside the Sobolev ball");
    require(tail_energy_ <= spec_.L0 * std::pow(static_cast<double>(coeffs_.size()), -2.0 * spec_.beta),
            "tail energy exceeds the Sobolev tail bound");

    suffix_sq_.assign(coeffs_.size() + 1, 0.0);
    CompensatedSum tail;
    tail.add(tail_energy_);
    suffix_sq_[coeffs_.size()] = tail.value();
    for (std::size_t j = coeffs_.size(); j-- > 0;) {
      tail.add(coeffs_[j] * coeffs_[j]);
      suffix_sq_[j] = tail.value();
    }
  }

  [[nodiscard]] std::span<const double> coeffs() const noexcept { return coeffs_; }
  [[nodiscard]] std::size_t size() const noexcept { return coeffs_.size(); }
  /// 1-based coordinate access.
  [[nodiscard]] double operator()(std::size_t j) const { return coeffs_.at(j - 1); }
  [[nodiscard]] const SobolevSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] double tail_energy() const noexcept { return tail_energy_; }
  [[nodiscard]] double tail_error() const noexcept { return tail_error_; }
  [[nodiscard]] double sobolev_energy() const noexcept { return sobolev_energy_; }
  [[nodiscard]] std::optional<double> tail_linear() const noexcept { return tail_linear_; }

  /// Sum of squares of all coordinates past index J (0 <= J <= J_store).
  [[nodiscard]] double energy_after(std::size_t J) const {
    require(J <= coeffs_.size(), "energy_after: index past the stored range");
    return suffix_sq_[J];
  }

 private:
  std::vector<double> coeffs_;
  SobolevSpec spec_;
  double tail_energy_;
  double tail_error_;
  std::optional<double> tail_linear_;
  double sobolev_energy_ = 0.0;
  std::vector<double> suffix_sq_;
};

namespace detail {

inline double polylog_coeff(double beta, double i) {
  return std::pow(i, -beta - 0.5) / std::log(i + 1.0);
}

/// Upper bound on sum_{i > J} 1 / (i log^2(i + 1)), the Sobolev energy tail
/// of the polylog profile (independent of beta).
inline double polylog_energy_tail_bound(std::size_t J) {
  const auto g = [](double i) { return 1.0 / (i * std::log(i + 1.0) * std::log(i + 1.0)); };
  if (J >= 2) return 1.0 / std::log(static_cast<double>(J));
  return g(2.0) + 1.0 / std::log(2.0);
}

}  // namespace detail

/// theta_{0i} = i^{-beta-1/2} / log(i + 1), stored for i <= J_store. The
/// radius L0 is the smallest certified upper bound on the full series
/// energy, so every truncation tail obeys the Sobolev tail bound.
inline TruthVector make_polylog_truth(double beta, std::size_t J_store) {
  require(beta > 0.5, "polylog truth requires beta > 1/2");
  require(J_store >= 1, "J_store must be positive");
  std::vector<double> coeffs(J_store);
  CompensatedSum energy;
  for (std::size_t i = 1; i <= J_store; ++i) {
    const double c = detail::polylog_coeff(beta, static_cast<double>(i));
    coeffs[i - 1] = c;
    energy.add(1.0 / (static_cast<double>(i) * std::log(i + 1.0) * std::log(i + 1.0)));
  }
  const double L0 = (energy.value() + detail::polylog_energy_tail_bound(J_store)) * (1.0 + 1e-9);
  const auto sq = [beta](double i) {
    const double c = detail::polylog_coeff(beta, i);
    return c * c;
  };
  const SeriesTail tail = series_tail(sq, J_store);
  const SeriesTail linear = series_tail([beta](double i) { return detail::polylog_coeff(beta, i); }, J_store);
  return TruthVector(std::move(coeffs), SobolevSpec{beta, L0}, tail.value, tail.error, linear.value);
}

/// Random member of the ball: signs and magnitudes drawn around the polylog
/// profile on the stored range (zero beyond), rescaled so the Sobolev energy
/// equals fill * L0.
inline TruthVector make_random_sobolev_truth(const SobolevSpec& spec, double fill, std::size_t J_store,
                                             std::uint64_t seed) {
  spec.validate();
  require(fill > 0.0 && fill <= 1.0, "fill must lie in (0, 1]");
  require(J_store >= 1, "J_store must be positive");
  const CounterRng rng(seed);
  std::vector<double> coeffs(J_store);
  CompensatedSum energy;
  for (std::size_t j = 1; j <= J_store; ++j) {
    const double sign = rng.uniform(2 * j) < 0.5 ? -1.0 : 1.0;
    const double magnitude = 0.5 + rng.uniform(2 * j + 1);
    const double c = sign * magnitude * detail::polylog_coeff(spec.beta, static_cast<double>(j));
    coeffs[j - 1] = c;
    energy.add(c * c * std::pow(static_cast<double>(j), 2.0 * spec.beta));
  }
  const double scale = std::sqrt(fill * spec.L0 / energy.value());
  for (double& c : coeffs) c *= scale;
  return TruthVector(std::move(coeffs), spec, 0.0, 0.0, 0.0);
}

struct TruncationTail {
  double tail = 0.0;
  double bound = 0.0;
};

/// Energy past J and the Sobolev bound L0 * J^{-2 beta}.
inline TruncationTail truncation_tail(const TruthVector& truth, std::size_t J) {
  require(J >= 1, "truncation_tail: J must be positive");
  require(J <= truth.size(), "truncation_tail: J exceeds the stored range");
  return {truth.energy_after(J), truth.spec().L0 * std::pow(static_cast<double>(J), -2.0 * truth.spec().beta)};
}

/// X_j = theta_0j + xi_j / sqrt(n), j = 1..J_obs. `n` is the noise
/// precision and may be non-integer (bridged regression data).
struct SequenceObservation {
  double n = 1.0;
  std::vector<double> x;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const noexcept { return x.size(); }

  void validate() const {
    require(n > 0.0, "observation precision n must be positive");
    require(!x.empty(), "observation needs at least one coordinate");
    for (double v : x) require(std::isfinite(v), "observation values must be finite");
  }
};

/// Builds the observation from explicit standard-normal draws xi.
inline SequenceObservation observe_with_noise(const TruthVector& truth, double n, std::span<const double> xi,
                                              std::uint64_t seed = 0) {
  require(n > 0.0, "n must be positive");
  require(!xi.empty() && xi.size() <= truth.size(), "noise length must lie in [1, J_store]");
  SequenceObservation obs;
  obs.n = n;
  obs.seed = seed;
  obs.x.resize(xi.size());
  const double scale = 1.0 / std::sqrt(n);
  for (std::size_t j = 0; j < xi.size(); ++j) obs.x[j] = truth.coeffs()[j] + scale * xi[j];
  return obs;
}

/// Draws xi_j from `rng` at counter j - 1.
inline SequenceObservation simulate_sequence(const TruthVector& truth, double n, std::size_t J_obs,
                                             const CounterRng& rng) {
  require(J_obs >= 1 && J_obs <= truth.size(), "simulate_sequence: J_obs must lie in [1, J_store]");
  std::vector<double> xi(J_obs);
  for (std::size_t j = 0; j < J_obs; ++j) xi[j] = rng.normal(j);
  return observe_with_noise(truth, n, xi, rng.key());
}

inline SequenceObservation simulate_sequence(const TruthVector& truth, double n, std::size_t J_obs,
                                             std::uint64_t seed) {
  auto obs = simulate_sequence(truth, n, J_obs, CounterRng(seed));
  obs.seed = seed;
  return obs;
}

enum class BasisKind { AllOnes, Fourier };

/// psi_1 = 1, psi_{2m} = sqrt2 cos(2 pi m t), psi_{2m+1} = sqrt2 sin(2 pi m t).
inline double fourier_basis(std::size_t j, double t) {
  if (j == 1) return 1.0;
  const double m = static_cast<double>(j / 2);
  const double arg = 2.0 * std::numbers::pi * m * t;
  return std::numbers::sqrt2 * (j % 2 == 0 ? std::cos(arg) : std::sin(arg));
}

/// Coefficients a_j of the linear functional f(t) = sum_j a_j theta_j.
struct BasisWeights {
  std::vector<double> a;
  BasisKind kind = BasisKind::AllOnes;
  double t = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return a.size(); }
  [[nodiscard]] std::string description() const {
    return kind == BasisKind::AllOnes ? std::string("all-ones") : "fourier-at-t=" + std::to_string(t);
  }
};

inline BasisWeights basis_weights(BasisKind kind, double t, std::size_t J) {
  require(t >= 0.0 && t <= 1.0, "basis_weights: t must lie in [0, 1]");
  BasisWeights w;
  w.kind = kind;
  w.t = t;
  w.a.resize(J);
  for (std::size_t j = 1; j <= J; ++j) w.a[j - 1] = kind == BasisKind::AllOnes ? 1.0 : fourier_basis(j, t);
  return w;
}

/// f_0(t) = sum_j a_j theta_0j. For all-ones weights covering the stored
/// range the series tail is included; an unknown (divergent) tail is an error.
inline double truth_functional(const TruthVector& truth, const BasisWeights& w) {
  CompensatedSum acc;
  const std::size_t J = std::min(w.size(), truth.size());
  for (std::size_t j = 0; j < J; ++j) acc.add(w.a[j] * truth.coeffs()[j]);
  if (w.kind == BasisKind::AllOnes) {
    require(truth.tail_linear().has_value(), "sum of truth coefficients diverges; all-ones functional undefined");
    if (w.size() >= truth.size()) acc.add(*truth.tail_linear());
  }
  return acc.value();
}

}  // namespace sievelab
