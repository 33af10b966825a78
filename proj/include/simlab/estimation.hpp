#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "simlab/error.hpp"
#include "simlab/linalg.hpp"
#include "simlab/rng.hpp"
#include "simlab/scenario.hpp"
#include "simlab/trial.hpp"

namespace simlab {

template <typename Scalar>
struct LogisticFit {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector coefficients;
  Matrix covariance;  // inverse of Z'WZ at the estimate; NaN unless converged
  bool converged = false;
  int iterations = 0;
  Scalar score_norm = Scalar(0);
};

using FittedLogisticModel = LogisticFit<double>;

struct IrlsOptions {
  double score_tolerance = 1e-8;
  int max_iterations = 50;
  // |linear predictor| above this on any row counts as separation.
  double saturation = 30.0;
};

namespace detail {

template <typename Scalar>
Scalar log1pexp(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

template <typename Scalar, typename MatZ, typename VecY, typename VecT>
Scalar log_likelihood(const MatZ& z, const VecY& y, const VecT& theta) {
  const auto eta = (z * theta).eval();
  Scalar ll(0);
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
  return ll;
}

}  // namespace detail

// Logistic-regression MLE by Newton / iteratively reweighted least squares
// with step halving. Rows of `design` already carry the intercept column.
// Throws NotEstimable with fewer than 5 rows or a single outcome class;
// nonconvergence (including separation and singular information) is
// reported through `converged`, never thrown.
template <typename MatZ, typename VecY>
LogisticFit<typename MatZ::Scalar> fit_logistic(const Eigen::MatrixBase<MatZ>& design,
                                                const Eigen::MatrixBase<VecY>& outcomes,
                                                const typename LogisticFit<typename MatZ::Scalar>::Vector* start = nullptr,
                                                const IrlsOptions& opt = {}) {
  using Scalar = typename MatZ::Scalar;
  using Fit = LogisticFit<Scalar>;
  using Vector = typename Fit::Vector;
  using Matrix = typename Fit::Matrix;

  const Eigen::Index n = design.rows(), p = design.cols();
  if (outcomes.size() != n) throw InvalidInput("design and outcome lengths differ");
  if (n < 5) throw NotEstimable("logistic fit needs at least 5 rows");
  const Scalar successes = outcomes.sum();
  if (successes <= Scalar(0) || successes >= Scalar(n)) throw NotEstimable("logistic fit needs both outcomes");

  Fit fit;
  fit.coefficients = (start && start->size() == p && start->allFinite()) ? *start : Vector::Zero(p);
  Vector prob(n), weight(n), score(p);
  Matrix info(p, p);

  auto evaluate = [&](const Vector& theta) {
    const Vector eta = design * theta;
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = logistic(eta(i));
      weight(i) = prob(i) * (Scalar(1) - prob(i));
    }
    score.noalias() = design.transpose() * (outcomes - prob);
    info.noalias() = design.transpose() * weight.asDiagonal() * design;
    return eta.cwiseAbs().maxCoeff();
  };

  bool singular = false;
  Scalar max_eta = evaluate(fit.coefficients);
  Scalar ll = detail::log_likelihood<Scalar>(design, outcomes, fit.coefficients);
  for (;;) {
    fit.score_norm = score.norm();
    if (fit.score_norm < Scalar(opt.score_tolerance)) {
      fit.converged = max_eta <= Scalar(opt.saturation);
      break;
    }
    if (fit.iterations >= opt.max_iterations || max_eta > Scalar(opt.saturation)) break;

    Eigen::LDLT<Matrix> ldlt(info);
    if (!positive_definite(ldlt, Scalar(1e-15))) {
      singular = true;
      break;
    }
    Vector step = ldlt.solve(score);
    Vector next = fit.coefficients + step;
    Scalar next_ll = detail::log_likelihood<Scalar>(design, outcomes, next);
    for (int halving = 0; halving < 30 && !(next_ll >= ll - Scalar(1e-12) * std::abs(ll)); ++halving) {
      step *= Scalar(0.5);
      next = fit.coefficients + step;
      next_ll = detail::log_likelihood<Scalar>(design, outcomes, next);
    }
    fit.coefficients = next;
    ll = next_ll;
    ++fit.iterations;
    max_eta = evaluate(fit.coefficients);
  }

  Eigen::LDLT<Matrix> ldlt(info);
  if (!singular && fit.converged && positive_definite(ldlt, Scalar(1e-15))) {
    fit.covariance = ldlt.solve(Matrix::Identity(p, p));
    fit.covariance = (Scalar(0.5) * (fit.covariance + fit.covariance.transpose())).eval();
  } else {
    fit.converged = false;
    fit.covariance = Matrix::Constant(p, p, std::numeric_limits<Scalar>::quiet_NaN());
  }
  return fit;
}

// Fits the logistic model to every record of `arm` that carries a response.
FittedLogisticModel fit_arm(const TrialState& state, TreatmentArm arm,
                            const FittedLogisticModel::Vector* start = nullptr, const IrlsOptions& opt = {});

struct LogOddsRatio {
  double estimate = 0.0;
  double variance = 0.0;
  bool corrected = false;  // 0.5 added to every cell
};

// ln[(x_A/(n_A-x_A)) / (x_B/(n_B-x_B))] and its delta-method variance.
// A stratum with any zero cell gets 0.5 added to all four cells.
LogOddsRatio log_odds_ratio(int x_a, int n_a, int x_b, int n_b);

// Population log-odds ratio ln[(p_A/q_A)/(p_B/q_B)].
template <typename Scalar>
Scalar log_odds_ratio(Scalar p_a, Scalar p_b) {
  using std::log;
  return log(p_a / (Scalar(1) - p_a)) - log(p_b / (Scalar(1) - p_b));
}

struct StratumCounts {
  int successes_a = 0, n_a = 0, successes_b = 0, n_b = 0;
};

struct StratifiedTable {
  std::vector<StratumCounts> strata;
  void validate() const;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

double normal_cdf(double x);
double chi_square_sf(double q, double df);

// Q = sum_j T_j^2 with T_j = logOR_j / sd_j, referred to chi-square(J).
TestResult stratified_logor_test(const StratifiedTable& table, double alpha = 0.05);
TestResult chi_square_combination(std::span<const double> stratum_statistics, double alpha = 0.05);

// Two-sided z-test of (theta_A - theta_B)' z0 with variance z0'(Cov_A + Cov_B) z0.
// `z0` is the design row including the intercept.
TestResult wald_test_at_z0(const FittedLogisticModel& fit_a, const FittedLogisticModel& fit_b,
                           const Vector4& z0, double alpha = 0.05);

// sup_x |F_A(x) - F_B(x)|.
double ks_distance(std::span<const double> sample_a, std::span<const double> sample_b);

class AllocationProcedure;

// Statistic computed from a realized assignment sequence with covariates
// and responses held fixed. Larger means more extreme.
using AssignmentStatistic =
    std::function<double(std::span<const TreatmentArm>, std::span<const CovariateProfile>, std::span<const int>)>;

// Absolute difference in success rates between arms.
double success_rate_difference(std::span<const TreatmentArm> arms, std::span<const CovariateProfile> covariates,
                               std::span<const int> responses);

// Monte-Carlo re-randomization p-value (1 + #{resampled >= observed}) / (R + 1).
// The procedure is rerun R times on the fixed covariate sequence. Throws
// Unsupported for response-adaptive procedures.
double rerandomization_test(const AllocationProcedure& procedure, std::span<const CovariateProfile> covariates,
                            std::span<const int> responses, double observed, int resamples, RngStream& rng,
                            const AssignmentStatistic& statistic = success_rate_difference,
                            const Discretizer& discretizer = {});

}  // namespace simlab
