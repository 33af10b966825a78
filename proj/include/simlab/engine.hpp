#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simlab/cara.hpp"
#include "simlab/estimation.hpp"
#include "simlab/procedure.hpp"
#include "simlab/rng.hpp"
#include "simlab/scenario.hpp"
#include "simlab/trial.hpp"

namespace simlab {

struct TrialResult {
  double prop_a = 0.0;     // N_A(n) / n
  double prop_a_s0 = 0.0;  // N_A0(n) / N_0(n) among males; NaN without males
  double ks_age = 0.0;     // d_KS of age between arms; NaN if an arm is empty
  int failures = 0;        // F(n)
  bool rejected = false;   // post-trial Wald test at z0
  bool test_fit_failed = false;
  int in_trial_fit_failures = 0;
};

// Balance, efficiency and ethics metrics of a completed trial.
TrialResult trial_metrics(const TrialState& state, const ScenarioSpec& scenario);

// Runs one trial: for each patient, probability -> Bernoulli draw -> arm,
// immediate response from the true logistic model, then procedure update.
// `procedure` is a prototype; a fresh copy is used.
TrialState simulate_trial(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                          std::span<const CovariateProfile> covariates, RngStream& rng, int* fit_failures = nullptr);

// simulate_trial + trial_metrics. When `covariates` is empty they are drawn
// from `rng` first.
TrialResult run_replication(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                            std::span<const CovariateProfile> covariates, RngStream& rng);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct StudySummary {
  std::string procedure;
  int n = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  MetricSummary prop_a, prop_a_s0, ks_age, failures;
  double reject_rate = 0.0;
  double fit_failure_rate = 0.0;
  bool sd_defined = true;  // false when reps == 1 (SDs reported as 0)
};

// Sample mean and SD (n-1 denominator) skipping NaNs; SD is 0 for fewer
// than two values.
MetricSummary summarize(std::span<const double> values);
StudySummary aggregate(std::string procedure, const ScenarioSpec& scenario, std::uint64_t seed,
                       std::span<const TrialResult> results);

struct StudyOptions {
  int reps = 5000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::function<void(int done, int total)> progress;
};

// Replication r in 1..reps uses stream (seed, r); with fixed covariates the
// matrix comes from stream (seed, 0) and is shared by every replication.
StudySummary run_study(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                       const StudyOptions& options);
std::vector<TrialResult> run_replications(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                                          const StudyOptions& options);

// CSV with header procedure,n,reps,seed,prop_a_mean,...,fit_failure_rate.
std::string csv_header();
std::string csv_row(const StudySummary& s);
void write_csv(std::ostream& out, std::span<const StudySummary> rows);
nlohmann::json to_json(const StudySummary& s);
void write_json(std::ostream& out, std::span<const StudySummary> rows);

// Rows of the simulation tables: label, procedure id, parameters.
struct TableRow {
  std::string label;
  std::string id;
  ParameterMap params;
};
const std::vector<TableRow>& study_table_rows();

// "t7-1" -> 1, "t7-2" -> 2, "t7-3" -> 3; throws ConfigError otherwise.
int table_model(std::string_view table);

std::vector<StudySummary> reproduce_table(int model, const StudyOptions& options,
                                          const std::function<void(const std::string&)>& on_row = {});

// Fixed-design comparison of target rules with known success probabilities.
struct FixedDesignRule {
  TargetKind rule;
  std::vector<double> proportions;       // arm-A share per stratum
  double expected_failures = 0.0;
  std::vector<double> logor_variance;    // 1/(n pi p_A q_A) + 1/(n (1-pi) p_B q_B)
  double failures_saved = 0.0;           // relative to balanced allocation
};

struct FixedDesignReport {
  std::vector<double> p_a, p_b, stratum_sizes;
  std::vector<FixedDesignRule> rules;
};

FixedDesignReport fixed_design_report(std::span<const double> p_a, std::span<const double> p_b,
                                      std::span<const double> stratum_sizes, std::span<const TargetKind> rules);
nlohmann::json to_json(const FixedDesignReport& report);

// The two-stratum example: n0 = n1 = 100, (0.95, 0.70) and (0.70, 0.95).
FixedDesignReport gender_interaction_report();

// Binary-response trial with known per-stratum success probabilities; the
// stratum index is carried in the gender field.
struct BinaryStratifiedScenario {
  std::vector<double> stratum_weights;  // arrival probabilities, summing to 1
  std::vector<double> p_a, p_b;
  int n = 200;
};

struct BinaryTrialResult {
  TrialState state;
  StratifiedTable table;
  std::vector<double> prop_a;  // per stratum; NaN when empty
  int failures = 0;
};

BinaryTrialResult run_binary_stratified_trial(const BinaryStratifiedScenario& scenario,
                                              const AllocationProcedure& procedure, RngStream& rng);

}  // namespace simlab
