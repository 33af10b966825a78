#include "simlab/covadaptive.hpp"

#include <Eigen/Dense>

namespace simlab {

MarginalImbalance marginal_imbalance(const TrialState& state, const Levels& levels, const Weights& weights) {
  MarginalImbalance m;
  m.weights = weights;
  for (std::size_t i = 0; i < kNumCovariates; ++i) {
    if (!(weights[i] > 0)) throw InvalidParameter("covariate weights must be positive");
    m.per_covariate[i] =
        state.margin_count(i, levels[i], TreatmentArm::A) - state.margin_count(i, levels[i], TreatmentArm::B);
    m.total += weights[i] * m.per_covariate[i];
  }
  return m;
}

double pocock_simon_probability(const TrialState& state, const Levels& levels, const Weights& weights,
                                double p) {
  return pocock_simon_probability(marginal_imbalance(state, levels, weights).total, p);
}

UrnBank::UrnBank(Parameters params) : params_(params) {
  if (params.alpha_a <= 0 || params.alpha_b <= 0) throw InvalidParameter("urn alpha must be positive");
  if (params.beta < 0) throw InvalidParameter("urn beta must be >= 0");
  for (auto& cov : urns_)
    for (auto& urn : cov) urn = {params.alpha_a, params.alpha_b};
}

double UrnBank::imbalance(std::size_t covariate, int level) const {
  const auto& u = urns_[covariate][static_cast<std::size_t>(level)];
  return urn_imbalance(u[0], u[1]);
}

std::size_t UrnBank::select(const Levels& levels) const {
  std::size_t best = 0;
  double best_abs = -1.0;
  for (std::size_t i = 0; i < kNumCovariates; ++i) {
    const double d = std::abs(imbalance(i, levels[i]));
    if (d > best_abs) {
      best_abs = d;
      best = i;
    }
  }
  return best;
}

double UrnBank::probability_a(const Levels& levels) const {
  const std::size_t i = select(levels);
  const auto& u = urns_[i][static_cast<std::size_t>(levels[i])];
  return double(u[0]) / double(u[0] + u[1]);
}

void UrnBank::update(const Levels& levels, TreatmentArm drawn) {
  const int same = drawn == TreatmentArm::A ? params_.alpha_a : params_.alpha_b;
  for (std::size_t i = 0; i < kNumCovariates; ++i) {
    auto& u = urns_[i][static_cast<std::size_t>(levels[i])];
    u[index_of(drawn)] += same;
    u[index_of(other(drawn))] += params_.beta;
  }
}

std::pair<TreatmentArm, UrnBank> wei_urn_assign(UrnBank bank, const Levels& levels, RngStream& rng) {
  const TreatmentArm arm = rng.bernoulli(bank.probability_a(levels)) ? TreatmentArm::A : TreatmentArm::B;
  bank.update(levels, arm);
  return {arm, bank};
}

std::pair<double, double> raghavarao_distances(const TrialState& state, const CovariateProfile& z,
                                               double ridge) {
  const int n_a = state.arm_count(TreatmentArm::A);
  const int n_b = state.arm_count(TreatmentArm::B);
  if (n_a < 2 || n_b < 2) throw NotReady("need at least two patients per arm");

  Eigen::Vector3d mean_a = Eigen::Vector3d::Zero(), mean_b = Eigen::Vector3d::Zero();
  for (const auto& r : state.records())
    (r.arm == TreatmentArm::A ? mean_a : mean_b) += r.profile.covariates();
  mean_a /= n_a;
  mean_b /= n_b;

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& r : state.records()) {
    const Eigen::Vector3d d = r.profile.covariates() - (r.arm == TreatmentArm::A ? mean_a : mean_b);
    scatter.noalias() += d * d.transpose();
  }
  const Eigen::Matrix3d pooled = scatter / double(n_a + n_b - 2);
  Eigen::LDLT<Eigen::Matrix3d> ldlt(pooled + ridge * Eigen::Matrix3d::Identity());
  if (!positive_definite(ldlt, 1e-12)) throw NotReady("pooled covariance is singular");

  const Eigen::Vector3d x = z.covariates();
  const Eigen::Vector3d da = x - mean_a, db = x - mean_b;
  return {std::sqrt(std::max(0.0, da.dot(ldlt.solve(da)))), std::sqrt(std::max(0.0, db.dot(ldlt.solve(db))))};
}

std::pair<double, double> raghavarao_probabilities(const TrialState& state, const CovariateProfile& z,
                                                   double ridge) {
  auto [d_a, d_b] = raghavarao_distances(state, z, ridge);
  return distance_allocation(d_a, d_b);
}

}  // namespace simlab
