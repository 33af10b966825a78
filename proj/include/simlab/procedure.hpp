#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "simlab/cara.hpp"
#include "simlab/covadaptive.hpp"
#include "simlab/estimation.hpp"
#include "simlab/restricted.hpp"
#include "simlab/trial.hpp"

namespace simlab {

// Sequential allocation strategy. The driver asks for the probability that
// the incoming patient goes to arm A, draws the arm, appends the patient
// (with the response when it is immediate) to the state and then calls
// observe() so the procedure can update its private bookkeeping.
class AllocationProcedure {
 public:
  virtual ~AllocationProcedure() = default;

  virtual std::string_view id() const = 0;
  virtual bool uses_responses() const { return false; }

  virtual double probability_a(const TrialState& state, const CovariateProfile& incoming) const = 0;
  virtual void observe(const TrialState& /*state*/) {}

  // Same parameters, empty history.
  virtual std::unique_ptr<AllocationProcedure> fresh() const = 0;

  // Effective parameter values, for reports and the defaults file.
  virtual nlohmann::json parameters() const { return nlohmann::json::object(); }

  // Model fits that failed or did not converge during the trial.
  virtual int fit_failures() const { return 0; }
};

using ParameterMap = std::map<std::string, std::string>;

class CompleteRandomization final : public AllocationProcedure {
 public:
  std::string_view id() const override { return "crd"; }
  double probability_a(const TrialState&, const CovariateProfile&) const override { return crd_probability(); }
  std::unique_ptr<AllocationProcedure> fresh() const override { return std::make_unique<CompleteRandomization>(); }
};

class EfronCoin final : public AllocationProcedure {
 public:
  explicit EfronCoin(double p = 2.0 / 3.0);
  std::string_view id() const override { return "efron"; }
  double probability_a(const TrialState& state, const CovariateProfile&) const override {
    return efron_probability(state.imbalance(), p_);
  }
  std::unique_ptr<AllocationProcedure> fresh() const override { return std::make_unique<EfronCoin>(p_); }
  nlohmann::json parameters() const override { return {{"p", p_}}; }

 private:
  double p_;
};

class SmithProcedure final : public AllocationProcedure {
 public:
  explicit SmithProcedure(SmithRule rule = {});
  std::string_view id() const override { return "smith"; }
  double probability_a(const TrialState& state, const CovariateProfile&) const override {
    return smith_probability(state.arm_count(TreatmentArm::A), state.arm_count(TreatmentArm::B), rule_.rho);
  }
  std::unique_ptr<AllocationProcedure> fresh() const override { return std::make_unique<SmithProcedure>(rule_); }
  nlohmann::json parameters() const override { return {{"rho", rule_.rho}}; }

 private:
  SmithRule rule_;
};

// Permuted blocks, optionally one open block per full covariate stratum.
class PermutedBlockProcedure final : public AllocationProcedure {
 public:
  PermutedBlockProcedure(int block_size = 10, bool stratified = false);
  std::string_view id() const override { return stratified_ ? "spbd" : "pbd"; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override;
  void observe(const TrialState& state) override;
  std::unique_ptr<AllocationProcedure> fresh() const override {
    return std::make_unique<PermutedBlockProcedure>(m_, stratified_);
  }
  nlohmann::json parameters() const override { return {{"m", m_}}; }

  const std::vector<BlockState>& blocks() const { return blocks_; }

 private:
  std::size_t block_index(const TrialState& state, const CovariateProfile& z) const;

  int m_;
  bool stratified_;
  std::vector<BlockState> blocks_;
};

// Marginal minimization; p = 1 gives Taves's deterministic rule.
class PocockSimonProcedure final : public AllocationProcedure {
 public:
  PocockSimonProcedure(double p = 0.75, Weights weights = kUnitWeights, bool taves = false);
  std::string_view id() const override { return taves_ ? "taves" : "pocock-simon"; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override {
    return pocock_simon_probability(state, state.discretizer().levels(z), weights_, p_);
  }
  std::unique_ptr<AllocationProcedure> fresh() const override {
    return std::make_unique<PocockSimonProcedure>(p_, weights_, taves_);
  }
  nlohmann::json parameters() const override;

 private:
  double p_;
  Weights weights_;
  bool taves_;
};

class WeiUrnProcedure final : public AllocationProcedure {
 public:
  explicit WeiUrnProcedure(UrnBank::Parameters params = {}) : bank_(params) {}
  std::string_view id() const override { return "wei-urn"; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override {
    return bank_.probability_a(state.discretizer().levels(z));
  }
  void observe(const TrialState& state) override;
  std::unique_ptr<AllocationProcedure> fresh() const override {
    return std::make_unique<WeiUrnProcedure>(bank_.parameters());
  }
  nlohmann::json parameters() const override;
  const UrnBank& bank() const { return bank_; }

 private:
  UrnBank bank_;
};

// Distance rule; 1/2 until the pooled covariance is usable.
class RaghavaraoProcedure final : public AllocationProcedure {
 public:
  explicit RaghavaraoProcedure(double ridge = 1e-8) : ridge_(ridge) {}
  std::string_view id() const override { return "raghavarao"; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override;
  std::unique_ptr<AllocationProcedure> fresh() const override { return std::make_unique<RaghavaraoProcedure>(ridge_); }
  nlohmann::json parameters() const override { return {{"ridge", ridge_}}; }

 private:
  double ridge_;
};

// Atkinson's D_A-optimal biased coin for the linear model with intercept and
// raw covariates; 1/2 until Z'Z is invertible.
class AtkinsonDAProcedure final : public AllocationProcedure {
 public:
  explicit AtkinsonDAProcedure(BiasingFunction psi = {});
  std::string_view id() const override { return "atkinson-da"; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override;
  void observe(const TrialState& state) override;
  std::unique_ptr<AllocationProcedure> fresh() const override { return std::make_unique<AtkinsonDAProcedure>(psi_); }
  nlohmann::json parameters() const override;

 private:
  BiasingFunction psi_;
  Matrix4 normal_ = Matrix4::Zero();
  Vector4 zt_ = Vector4::Zero();
};

// Hu-Zhang DBCD inside strata (gender, or the full 2x2x2 discretization).
class StratifiedDbcdProcedure final : public AllocationProcedure {
 public:
  enum class Strata { Gender, Full };
  StratifiedDbcdProcedure(TargetKind target = TargetKind::NeymanLogOR, double gamma = 2.0,
                          Strata strata = Strata::Gender);
  std::string_view id() const override { return "dbcd"; }
  bool uses_responses() const override { return true; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override;
  void observe(const TrialState& state) override;
  std::unique_ptr<AllocationProcedure> fresh() const override {
    return std::make_unique<StratifiedDbcdProcedure>(target_, gamma_, strata_);
  }
  nlohmann::json parameters() const override;
  const std::vector<StratumCounts>& strata() const { return counts_; }

 private:
  std::size_t key(const TrialState& state, const CovariateProfile& z) const;

  TargetKind target_;
  double gamma_;
  Strata strata_;
  std::vector<StratumCounts> counts_;
};

// Phi(d/T) with d the covariate-adjusted difference of arm means from the
// least-squares fit of y on (t, 1, z); 1/2 until that fit is estimable.
class BBNormalProcedure final : public AllocationProcedure {
 public:
  explicit BBNormalProcedure(double scale = 1.0);
  std::string_view id() const override { return "bb-normal"; }
  bool uses_responses() const override { return true; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override;
  void observe(const TrialState& state) override;
  std::unique_ptr<AllocationProcedure> fresh() const override { return std::make_unique<BBNormalProcedure>(scale_); }
  nlohmann::json parameters() const override { return {{"T", scale_}}; }

  // 2 * alpha-hat; throws NotReady before the fit is estimable.
  double adjusted_difference() const;

 private:
  using Matrix5 = Eigen::Matrix<double, 5, 5>;
  using Vector5 = Eigen::Matrix<double, 5, 1>;
  double scale_;
  Matrix5 normal_ = Matrix5::Zero();
  Vector5 xy_ = Vector5::Zero();
};

struct CaraOptions {
  TargetKind target = TargetKind::RVAOdds;
  bool weighted_da = false;  // CARA 5
  int burn_in = 80;          // 2 m0
  double burn_in_p = 0.75;   // Pocock-Simon biasing probability during burn-in
  std::optional<double> clamp;  // optional [eps, 1-eps] clamp
};

// Sequential-MLE CARA: Pocock-Simon for the first burn_in patients, then the
// chosen target (or the weighted D_A rule) evaluated at per-arm logistic MLEs
// refitted after every response. A failed refit keeps the last good fit.
class CaraProcedure final : public AllocationProcedure {
 public:
  explicit CaraProcedure(CaraOptions options = {});
  std::string_view id() const override;
  bool uses_responses() const override { return true; }
  double probability_a(const TrialState& state, const CovariateProfile& z) const override;
  void observe(const TrialState& state) override;
  std::unique_ptr<AllocationProcedure> fresh() const override { return std::make_unique<CaraProcedure>(options_); }
  nlohmann::json parameters() const override;
  int fit_failures() const override { return fit_failures_; }

  const CaraOptions& options() const { return options_; }
  const std::optional<FittedLogisticModel>& fit(TreatmentArm arm) const { return fits_[index_of(arm)]; }
  bool fitted() const { return fits_[0].has_value() && fits_[1].has_value(); }

 private:
  void refit(const TrialState& state, TreatmentArm arm);

  CaraOptions options_;
  PocockSimonProcedure burn_in_;
  std::array<std::optional<FittedLogisticModel>, 2> fits_;
  int fit_failures_ = 0;
};

// Every procedure id understood by make_procedure, in documentation order.
const std::vector<std::string>& procedure_ids();

// Builds a procedure from its id and string parameters. Unknown ids or keys
// and unparsable values throw ConfigError. `default_burn_in` seeds the CARA
// burn-in length when no "burn_in" parameter is given.
std::unique_ptr<AllocationProcedure> make_procedure(std::string_view id, const ParameterMap& params = {},
                                                    int default_burn_in = 80);

// Defaults for every procedure, the discretizer and the post-trial test.
nlohmann::json default_settings();

}  // namespace simlab
