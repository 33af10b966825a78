#pragma once

#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "simlab/error.hpp"
#include "simlab/estimation.hpp"
#include "simlab/scenario.hpp"
#include "simlab/trial.hpp"

namespace simlab {

// Closed-form target proportions for arm A.
enum class TargetKind {
  Balanced,
  NeymanLogOR,          // power-maximizing for the stratified log-OR test
  FailureOptimalLogOR,  // fewest expected failures at fixed log-OR variance
  RVAOdds,              // CARA 1
  SqrtRSIHR,            // CARA 2
  NeymanCARA,           // CARA 3
  OptimalCARA,          // CARA 4
};

std::string_view to_string(TargetKind kind);
TargetKind target_kind_from_string(std::string_view name);

template <typename Scalar>
Scalar target_allocation(TargetKind kind, Scalar p_a, Scalar p_b) {
  using std::sqrt;
  if (!(p_a > Scalar(0) && p_a < Scalar(1) && p_b > Scalar(0) && p_b < Scalar(1)))
    throw InvalidParameter("target allocation needs success probabilities strictly inside (0,1)");
  const Scalar q_a = Scalar(1) - p_a, q_b = Scalar(1) - p_b;
  switch (kind) {
    case TargetKind::Balanced:
      return Scalar(0.5);
    case TargetKind::NeymanLogOR: {
      const Scalar a = Scalar(1) / sqrt(p_a * q_a), b = Scalar(1) / sqrt(p_b * q_b);
      return a / (a + b);
    }
    case TargetKind::FailureOptimalLogOR: {
      const Scalar a = Scalar(1) / sqrt(p_a * q_a * q_a), b = Scalar(1) / sqrt(p_b * q_b * q_b);
      return a / (a + b);
    }
    case TargetKind::RVAOdds: {
      const Scalar a = p_a / q_a, b = p_b / q_b;
      return a / (a + b);
    }
    case TargetKind::SqrtRSIHR:
      return sqrt(p_a) / (sqrt(p_a) + sqrt(p_b));
    case TargetKind::NeymanCARA: {
      const Scalar a = sqrt(p_a * q_a), b = sqrt(p_b * q_b);
      return b / (b + a);
    }
    case TargetKind::OptimalCARA: {
      const Scalar a = sqrt(p_a) * q_a, b = sqrt(p_b) * q_b;
      return b / (b + a);
    }
  }
  throw InvalidParameter("unknown target kind");
}

// Hu-Zhang allocation function
//   g(x, y) = y (y/x)^g / [ y (y/x)^g + (1-y) ((1-y)/(1-x))^g ]
// steering the current proportion x toward target y. Inputs are clamped to
// [1e-6, 1 - 1e-6].
template <typename Scalar>
Scalar dbcd_allocation(Scalar current, Scalar target, Scalar gamma) {
  using std::clamp;
  using std::pow;
  if (!(gamma >= Scalar(0))) throw InvalidParameter("DBCD gamma must be >= 0");
  const Scalar lo(1e-6), hi(1 - 1e-6);
  const Scalar x = clamp(current, lo, hi), y = clamp(target, lo, hi);
  const Scalar a = y * pow(y / x, gamma);
  const Scalar b = (Scalar(1) - y) * pow((Scalar(1) - y) / (Scalar(1) - x), gamma);
  return a / (a + b);
}

// Smoothed per-stratum success rate (successes + 0.5) / (count + 1).
inline double smoothed_rate(int successes, int count) { return (successes + 0.5) / (count + 1.0); }

// DBCD within one stratum: 1/2 until both arms have patients there.
double stratified_dbcd_probability(const StratumCounts& stratum, double gamma, TargetKind target);

// Phi(d / T).
double bb_normal_probability(double mean_difference, double scale);

// sum_j n_j [ pi_j q_Aj + (1 - pi_j) q_Bj ].
double expected_failures(std::span<const double> target_a, std::span<const double> p_a,
                         std::span<const double> p_b, std::span<const double> stratum_sizes);

// CARA 1-4: target_allocation(kind, p_A(z), p_B(z)) at the fitted models.
double cara_probability(TargetKind kind, const Vector4& theta_a, const Vector4& theta_b, const CovariateProfile& z);

// d(k) = z'(Z_k' W_k Z_k)^{-1} z p_k q_k.
double da_derivative(const FittedLogisticModel& fit, const CovariateProfile& z);

// f_A d_A / (f_A d_A + f_B d_B).
inline double weighted_da_probability(double f_a, double d_a, double f_b, double d_b) {
  const double num = f_a * d_a, den = f_a * d_a + f_b * d_b;
  if (!(den > 0)) return 0.5;
  return num / den;
}

// CARA 5: weighted D_A rule with f_k = p_k(z) / q_k(z).
double cara5_probability(const FittedLogisticModel& fit_a, const FittedLogisticModel& fit_b,
                         const CovariateProfile& z);

}  // namespace simlab
