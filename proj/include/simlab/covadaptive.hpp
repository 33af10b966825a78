#pragma once

#include <array>
#include <cmath>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "simlab/error.hpp"
#include "simlab/linalg.hpp"
#include "simlab/restricted.hpp"
#include "simlab/rng.hpp"
#include "simlab/trial.hpp"

namespace simlab {

using Levels = std::array<int, kNumCovariates>;
using Weights = std::array<double, kNumCovariates>;

inline constexpr Weights kUnitWeights{1.0, 1.0, 1.0};

// D_i(n) at the incoming patient's levels and the weighted total D(n).
struct MarginalImbalance {
  std::array<int, kNumCovariates> per_covariate{};
  Weights weights = kUnitWeights;
  double total = 0.0;
};

MarginalImbalance marginal_imbalance(const TrialState& state, const Levels& levels,
                                     const Weights& weights = kUnitWeights);

// Three-case biased-coin rule on D(n): 1/2, p (D<0) or 1-p (D>0).
// p = 1 is Taves's deterministic minimization.
template <typename Scalar>
Scalar pocock_simon_probability(Scalar total_imbalance, Scalar p) {
  if (!(p >= Scalar(0.5) && p <= Scalar(1))) throw InvalidParameter("biasing probability p must lie in [1/2, 1]");
  if (total_imbalance == Scalar(0)) return Scalar(0.5);
  return total_imbalance < Scalar(0) ? p : Scalar(1) - p;
}

double pocock_simon_probability(const TrialState& state, const Levels& levels,
                                const Weights& weights, double p);

// Wei's marginal urn: one urn per covariate level holding balls of type A
// and B. Counts start at alpha_A / alpha_B.
struct UrnParameters {
  int alpha_a = 1;
  int alpha_b = 1;
  int beta = 1;
};

class UrnBank {
 public:
  using Parameters = UrnParameters;

  explicit UrnBank(Parameters params = {});

  const Parameters& parameters() const { return params_; }
  int balls(std::size_t covariate, int level, TreatmentArm type) const {
    return urns_[covariate][static_cast<std::size_t>(level)][index_of(type)];
  }
  // (Y_A - Y_B) / (Y_A + Y_B).
  double imbalance(std::size_t covariate, int level) const;

  // Observed urn with the largest |D|, lowest covariate index on ties.
  std::size_t select(const Levels& levels) const;
  double probability_a(const Levels& levels) const;

  // Adds alpha_k balls of the drawn type and beta of the opposite type to
  // every observed urn.
  void update(const Levels& levels, TreatmentArm drawn);

 private:
  Parameters params_;
  std::array<std::array<std::array<int, 2>, 2>, kNumCovariates> urns_{};
};

// Ball ratio of the selected urn for the given two-type urn contents.
inline double urn_imbalance(int type_a, int type_b) {
  return double(type_a - type_b) / double(type_a + type_b);
}

std::pair<TreatmentArm, UrnBank> wei_urn_assign(UrnBank bank, const Levels& levels, RngStream& rng);

// Normalizes Mahalanobis distances to (P(A), P(B)) with p_k proportional to d_k.
// Both distances zero gives (1/2, 1/2).
inline std::pair<double, double> distance_allocation(double d_a, double d_b) {
  if (d_a + d_b <= 0.0) return {0.5, 0.5};
  return {d_a / (d_a + d_b), d_b / (d_a + d_b)};
}

// Mahalanobis distance of the incoming profile to each arm's mean profile
// under the pooled within-arm covariance (plus `ridge` on the diagonal).
// Throws NotReady with fewer than two patients per arm or a singular
// pooled covariance.
std::pair<double, double> raghavarao_distances(const TrialState& state, const CovariateProfile& z,
                                               double ridge = 1e-8);
std::pair<double, double> raghavarao_probabilities(const TrialState& state, const CovariateProfile& z,
                                                   double ridge = 1e-8);

// Monotone weight applied to the D_A derivatives: x or (1 + x)^(1/gamma).
struct BiasingFunction {
  enum class Kind { Identity, Power };
  Kind kind = Kind::Identity;
  double gamma = 1.0;

  template <typename Scalar>
  Scalar operator()(Scalar x) const {
    using std::pow;
    if (kind == Kind::Identity) return x;
    return pow(Scalar(1) + x, Scalar(1) / Scalar(gamma));
  }
  void validate() const {
    if (kind == Kind::Power && !(gamma > 0)) throw InvalidParameter("psi power gamma must be > 0");
  }
};

// c = z'(Z'Z)^{-1} Z't from accumulated normal equations.
template <typename MatA, typename VecB, typename VecZ>
typename MatA::Scalar atkinson_bias(const Eigen::MatrixBase<MatA>& normal_matrix,
                                    const Eigen::MatrixBase<VecB>& z_t,
                                    const Eigen::MatrixBase<VecZ>& z_new) {
  using Scalar = typename MatA::Scalar;
  using Mat = Eigen::Matrix<Scalar, MatA::RowsAtCompileTime, MatA::ColsAtCompileTime>;
  Eigen::LDLT<Mat> ldlt(normal_matrix);
  if (!positive_definite(ldlt, Scalar(1e-13)))
    throw NotReady("normal matrix Z'Z is singular");
  return z_new.dot(ldlt.solve(z_t));
}

// psi((1-c)^2) / (psi((1-c)^2) + psi((1+c)^2)).
template <typename Scalar>
Scalar atkinson_probability(Scalar c, const BiasingFunction& psi = {}) {
  psi.validate();
  const Scalar up = psi((Scalar(1) - c) * (Scalar(1) - c));
  const Scalar down = psi((Scalar(1) + c) * (Scalar(1) + c));
  if (up + down == Scalar(0)) return Scalar(0.5);
  return up / (up + down);
}

// Probability of t_{n+1} = +1 given history design Z (n x p), assignments
// t in {+1,-1}^n and the new design row.
template <typename MatZ, typename VecT, typename VecZ>
typename MatZ::Scalar atkinson_da_probability(const Eigen::MatrixBase<MatZ>& design,
                                              const Eigen::MatrixBase<VecT>& assignments,
                                              const Eigen::MatrixBase<VecZ>& z_new,
                                              const BiasingFunction& psi = {}) {
  using Scalar = typename MatZ::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (design.rows() != assignments.size() || design.cols() != z_new.size())
    throw InvalidInput("design, assignment and new-row dimensions disagree");
  const Mat normal = design.transpose() * design;
  const Vec zt = design.transpose() * assignments;
  return atkinson_probability(atkinson_bias(normal, zt, z_new), psi);
}

}  // namespace simlab
