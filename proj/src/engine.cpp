#include "simlab/engine.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace simlab {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

TrialResult trial_metrics(const TrialState& state, const ScenarioSpec& scenario) {
  TrialResult out;
  const auto n = state.size();
  out.prop_a = n ? double(state.arm_count(TreatmentArm::A)) / double(n) : kNaN;

  int males = 0, males_a = 0;
  std::vector<double> age_a, age_b;
  for (const auto& r : state.records()) {
    if (r.profile.gender == 0) {
      ++males;
      if (r.arm == TreatmentArm::A) ++males_a;
    }
    (r.arm == TreatmentArm::A ? age_a : age_b).push_back(r.profile.age);
  }
  out.prop_a_s0 = males ? double(males_a) / males : kNaN;
  out.ks_age = (age_a.empty() || age_b.empty()) ? kNaN : ks_distance(age_a, age_b);
  out.failures = state.failures();

  Vector4 z0;
  z0 << 1.0, scenario.test.z0;
  try {
    const auto fa = fit_arm(state, TreatmentArm::A);
    const auto fb = fit_arm(state, TreatmentArm::B);
    out.rejected = wald_test_at_z0(fa, fb, z0, scenario.test.alpha).reject;
  } catch (const NotEstimable&) {
    out.test_fit_failed = true;
    out.rejected = false;
  }
  return out;
}

TrialState simulate_trial(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                          std::span<const CovariateProfile> covariates, RngStream& rng, int* fit_failures) {
  auto proc = procedure.fresh();
  TrialState state(scenario.discretizer);
  for (const auto& z : covariates) {
    const double p = proc->probability_a(state, z);
    const TreatmentArm arm = rng.bernoulli(p) ? TreatmentArm::A : TreatmentArm::B;
    const int y = simulate_response(scenario.theta(arm), z, rng);
    state.apply(z, arm, y);
    proc->observe(state);
  }
  if (fit_failures) *fit_failures = proc->fit_failures();
  return state;
}

TrialResult run_replication(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                            std::span<const CovariateProfile> covariates, RngStream& rng) {
  std::vector<CovariateProfile> drawn;
  if (covariates.empty()) {
    drawn = generate_covariates(scenario, rng);
    covariates = drawn;
  }
  int failures = 0;
  const TrialState state = simulate_trial(scenario, procedure, covariates, rng, &failures);
  TrialResult r = trial_metrics(state, scenario);
  r.in_trial_fit_failures = failures;
  return r;
}

MetricSummary summarize(std::span<const double> values) {
  double sum = 0;
  int count = 0;
  for (double v : values)
    if (!std::isnan(v)) {
      sum += v;
      ++count;
    }
  MetricSummary s;
  if (count == 0) return {kNaN, kNaN};
  s.mean = sum / count;
  if (count < 2) return s;
  double ss = 0;
  for (double v : values)
    if (!std::isnan(v)) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (count - 1));
  return s;
}

StudySummary aggregate(std::string procedure, const ScenarioSpec& scenario, std::uint64_t seed,
                       std::span<const TrialResult> results) {
  StudySummary s;
  s.procedure = std::move(procedure);
  s.n = scenario.n;
  s.reps = static_cast<int>(results.size());
  s.seed = seed;
  s.sd_defined = results.size() > 1;
  std::vector<double> prop, prop0, ks, fail;
  int rejected = 0, fit_failed = 0;
  for (const auto& r : results) {
    prop.push_back(r.prop_a);
    prop0.push_back(r.prop_a_s0);
    ks.push_back(r.ks_age);
    fail.push_back(r.failures);
    rejected += r.rejected;
    fit_failed += r.test_fit_failed;
  }
  s.prop_a = summarize(prop);
  s.prop_a_s0 = summarize(prop0);
  s.ks_age = summarize(ks);
  s.failures = summarize(fail);
  if (!results.empty()) {
    s.reject_rate = double(rejected) / double(results.size());
    s.fit_failure_rate = double(fit_failed) / double(results.size());
  }
  return s;
}

std::vector<TrialResult> run_replications(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                                          const StudyOptions& options) {
  if (options.reps < 1) throw InvalidParameter("reps must be >= 1");
  scenario.validate();

  std::vector<CovariateProfile> fixed;
  if (scenario.fixed_covariates) {
    RngStream rng(options.seed, 0);
    fixed = generate_covariates(scenario, rng);
  }

  std::vector<TrialResult> results(static_cast<std::size_t>(options.reps));
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (int r; (r = next.fetch_add(1)) < options.reps;) {
      RngStream rng(options.seed, static_cast<std::uint64_t>(r) + 1);
      results[static_cast<std::size_t>(r)] = run_replication(scenario, procedure, fixed, rng);
      const int d = ++done;
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        options.progress(d, options.reps);
      }
    }
  };

  const int workers = std::max(1, std::min(options.workers, options.reps));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

StudySummary run_study(const ScenarioSpec& scenario, const AllocationProcedure& procedure,
                       const StudyOptions& options) {
  const auto results = run_replications(scenario, procedure, options);
  return aggregate(std::string(procedure.id()), scenario, options.seed, results);
}

// --- output ----------------------------------------------------------------

std::string csv_header() {
  return "procedure,n,reps,seed,prop_a_mean,prop_a_sd,prop_a_s0_mean,prop_a_s0_sd,ks_age_mean,ks_age_sd,"
         "reject_rate,failures_mean,failures_sd,fit_failure_rate";
}

std::string csv_row(const StudySummary& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%d,%d,%llu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.4f,%.4f,%.6f",
                s.procedure.c_str(), s.n, s.reps, static_cast<unsigned long long>(s.seed), s.prop_a.mean,
                s.prop_a.sd, s.prop_a_s0.mean, s.prop_a_s0.sd, s.ks_age.mean, s.ks_age.sd, s.reject_rate,
                s.failures.mean, s.failures.sd, s.fit_failure_rate);
  return buf;
}

void write_csv(std::ostream& out, std::span<const StudySummary> rows) {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_row(r) << '\n';
}

json to_json(const StudySummary& s) {
  return {{"procedure", s.procedure},
          {"n", s.n},
          {"reps", s.reps},
          {"seed", s.seed},
          {"prop_a_mean", s.prop_a.mean},
          {"prop_a_sd", s.prop_a.sd},
          {"prop_a_s0_mean", s.prop_a_s0.mean},
          {"prop_a_s0_sd", s.prop_a_s0.sd},
          {"ks_age_mean", s.ks_age.mean},
          {"ks_age_sd", s.ks_age.sd},
          {"reject_rate", s.reject_rate},
          {"failures_mean", s.failures.mean},
          {"failures_sd", s.failures.sd},
          {"fit_failure_rate", s.fit_failure_rate}};
}

void write_json(std::ostream& out, std::span<const StudySummary> rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  out << arr.dump(2) << '\n';
}

// --- tables ----------------------------------------------------------------

const std::vector<TableRow>& study_table_rows() {
  static const std::vector<TableRow> rows{
      {"CRD", "crd", {}},
      {"SPBD", "spbd", {{"m", "10"}}},
      {"P-S", "pocock-simon", {{"p", "0.75"}}},
      {"CARA 1", "cara1", {}},
      {"CARA 2", "cara2", {}},
      {"CARA 3", "cara3", {}},
      {"CARA 4", "cara4", {}},
      {"CARA 5", "cara5", {}},
  };
  return rows;
}

int table_model(std::string_view table) {
  if (table == "t7-1") return 1;
  if (table == "t7-2") return 2;
  if (table == "t7-3") return 3;
  throw ConfigError("unknown table '" + std::string(table) + "'; valid: t7-1, t7-2, t7-3, s7-rules");
}

std::vector<StudySummary> reproduce_table(int model, const StudyOptions& options,
                                          const std::function<void(const std::string&)>& on_row) {
  const ScenarioSpec scenario = builtin_model(model);
  std::vector<StudySummary> out;
  for (const auto& row : study_table_rows()) {
    if (on_row) on_row(row.label);
    const auto proc = make_procedure(row.id, row.params, scenario.burn_in);
    out.push_back(run_study(scenario, *proc, options));
  }
  return out;
}

// --- fixed design ----------------------------------------------------------

FixedDesignReport fixed_design_report(std::span<const double> p_a, std::span<const double> p_b,
                                      std::span<const double> sizes, std::span<const TargetKind> rules) {
  if (p_a.size() != p_b.size() || p_a.size() != sizes.size()) throw InvalidInput("per-stratum lengths differ");
  FixedDesignReport report;
  report.p_a.assign(p_a.begin(), p_a.end());
  report.p_b.assign(p_b.begin(), p_b.end());
  report.stratum_sizes.assign(sizes.begin(), sizes.end());

  const std::vector<double> half(p_a.size(), 0.5);
  const double balanced = expected_failures(half, p_a, p_b, sizes);
  for (TargetKind kind : rules) {
    FixedDesignRule r{kind, {}, 0.0, {}, 0.0};
    for (std::size_t j = 0; j < p_a.size(); ++j) {
      const double pi = target_allocation(kind, p_a[j], p_b[j]);
      r.proportions.push_back(pi);
      r.logor_variance.push_back(1.0 / (sizes[j] * pi * p_a[j] * (1 - p_a[j])) +
                                 1.0 / (sizes[j] * (1 - pi) * p_b[j] * (1 - p_b[j])));
    }
    r.expected_failures = expected_failures(r.proportions, p_a, p_b, sizes);
    r.failures_saved = balanced - r.expected_failures;
    report.rules.push_back(std::move(r));
  }
  return report;
}

json to_json(const FixedDesignReport& report) {
  json rules = json::array();
  for (const auto& r : report.rules)
    rules.push_back({{"rule", to_string(r.rule)},
                     {"proportions_a", r.proportions},
                     {"expected_failures", r.expected_failures},
                     {"failures_saved_vs_balanced", r.failures_saved},
                     {"logor_variance", r.logor_variance}});
  return {{"p_a", report.p_a}, {"p_b", report.p_b}, {"stratum_sizes", report.stratum_sizes}, {"rules", rules}};
}

FixedDesignReport gender_interaction_report() {
  const double p_a[] = {0.95, 0.70}, p_b[] = {0.70, 0.95}, sizes[] = {100, 100};
  const TargetKind rules[] = {TargetKind::Balanced, TargetKind::NeymanLogOR, TargetKind::FailureOptimalLogOR};
  return fixed_design_report(p_a, p_b, sizes, rules);
}

// --- binary stratified trial ----------------------------------------------

BinaryTrialResult run_binary_stratified_trial(const BinaryStratifiedScenario& sc, const AllocationProcedure& procedure,
                                              RngStream& rng) {
  const std::size_t strata = sc.stratum_weights.size();
  if (strata == 0 || strata > 2 || sc.p_a.size() != strata || sc.p_b.size() != strata)
    throw InvalidInput("binary stratified scenario needs one or two strata with matching probabilities");

  auto proc = procedure.fresh();
  BinaryTrialResult out;
  out.table.strata.resize(strata);
  for (int i = 0; i < sc.n; ++i) {
    int j = 0;
    if (strata == 2) j = rng.bernoulli(sc.stratum_weights[1]) ? 1 : 0;
    const CovariateProfile z{j, 30, 200.0};
    const TreatmentArm arm = rng.bernoulli(proc->probability_a(out.state, z)) ? TreatmentArm::A : TreatmentArm::B;
    const double p = arm == TreatmentArm::A ? sc.p_a[static_cast<std::size_t>(j)] : sc.p_b[static_cast<std::size_t>(j)];
    const int y = rng.bernoulli(p) ? 1 : 0;
    out.state.apply(z, arm, y);
    proc->observe(out.state);
    auto& cell = out.table.strata[static_cast<std::size_t>(j)];
    if (arm == TreatmentArm::A) {
      ++cell.n_a;
      cell.successes_a += y;
    } else {
      ++cell.n_b;
      cell.successes_b += y;
    }
  }
  for (const auto& cell : out.table.strata)
    out.prop_a.push_back(cell.n_a + cell.n_b ? double(cell.n_a) / (cell.n_a + cell.n_b) : kNaN);
  out.failures = out.state.failures();
  return out;
}

}  // namespace simlab
