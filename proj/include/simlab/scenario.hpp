#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "simlab/error.hpp"
#include "simlab/rng.hpp"
#include "simlab/trial.hpp"

namespace simlab {

struct CovariateGenerators {
  double gender_p = 0.5;  // Bernoulli(p)
  int age_lo = 30;        // Discrete uniform on {age_lo, ..., age_hi}
  int age_hi = 75;
  double cholesterol_mean = 200.0;  // Normal(mean, sd), unclipped
  double cholesterol_sd = 20.0;
};

// Reference profile and level for the post-trial Wald test.
struct TestSettings {
  Eigen::Vector3d z0{0.5, 52.5, 200.0};
  double alpha = 0.05;
};

// Generative model for one simulated trial.
struct ScenarioSpec {
  std::string name;
  int n = 200;
  CovariateGenerators covariates;
  Vector4 theta_a = Vector4::Zero();  // (alpha, beta1, beta2, beta3)
  Vector4 theta_b = Vector4::Zero();
  int burn_in = 80;  // 2 m0
  std::uint64_t seed = 1;
  bool fixed_covariates = true;
  Discretizer discretizer;
  TestSettings test;

  const Vector4& theta(TreatmentArm arm) const {
    return arm == TreatmentArm::A ? theta_a : theta_b;
  }

  // Throws ConfigError on an inconsistent spec.
  void validate() const;
};

void to_json(nlohmann::json& j, const ScenarioSpec& s);
void from_json(const nlohmann::json& j, ScenarioSpec& s);

ScenarioSpec load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path);

// Bundled simulation models (model 1: null, n=200; model 2: n=200;
// model 3: n=160).
ScenarioSpec builtin_model(int model);

// Draws spec.n independent profiles. Per patient the stream is consumed in
// order gender (1 uniform), age (rejection), cholesterol (2 uniforms).
std::vector<CovariateProfile> generate_covariates(const ScenarioSpec& spec, RngStream& rng);
CovariateProfile generate_profile(const CovariateGenerators& g, RngStream& rng);

template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

// Linear predictor theta' (1, z).
template <typename Derived>
typename Derived::Scalar linear_predictor(const Eigen::MatrixBase<Derived>& theta,
                                          const CovariateProfile& z) {
  using Scalar = typename Derived::Scalar;
  if (theta.size() != static_cast<Eigen::Index>(kNumParameters))
    throw InvalidParameter("coefficient vector must have length 4");
  return theta(0) + theta(1) * Scalar(z.gender) + theta(2) * Scalar(z.age) +
         theta(3) * Scalar(z.cholesterol);
}

// 1 / (1 + exp(-(alpha + sum beta_j z_j))).
template <typename Derived>
typename Derived::Scalar response_probability(const Eigen::MatrixBase<Derived>& theta,
                                              const CovariateProfile& z) {
  if (!theta.allFinite()) throw InvalidParameter("non-finite coefficient");
  return logistic(linear_predictor(theta, z));
}

// Same model at arbitrary real covariates (z1, z2, z3).
template <typename DerivedT, typename DerivedZ>
typename DerivedT::Scalar response_probability(const Eigen::MatrixBase<DerivedT>& theta,
                                               const Eigen::MatrixBase<DerivedZ>& covariates) {
  if (theta.size() != static_cast<Eigen::Index>(kNumParameters) ||
      covariates.size() != static_cast<Eigen::Index>(kNumCovariates))
    throw InvalidParameter("need 4 coefficients and 3 covariates");
  if (!theta.allFinite()) throw InvalidParameter("non-finite coefficient");
  return logistic(theta(0) + theta.tail(3).dot(covariates.template cast<typename DerivedT::Scalar>()));
}

// Bernoulli(response_probability); consumes exactly one uniform.
int simulate_response(const Vector4& theta, const CovariateProfile& z, RngStream& rng);

}  // namespace simlab
