#include "simlab/estimation.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include "simlab/procedure.hpp"

namespace simlab {

FittedLogisticModel fit_arm(const TrialState& state, TreatmentArm arm, const FittedLogisticModel::Vector* start,
                            const IrlsOptions& opt) {
  Eigen::Index rows = 0;
  for (const auto& r : state.records())
    if (r.arm == arm && r.response) ++rows;
  Eigen::Matrix<double, Eigen::Dynamic, 4> design(rows, 4);
  Eigen::VectorXd y(rows);
  Eigen::Index i = 0;
  for (const auto& r : state.records()) {
    if (r.arm != arm || !r.response) continue;
    design.row(i) = r.profile.design_row().transpose();
    y(i) = *r.response;
    ++i;
  }
  return fit_logistic(design, y, start, opt);
}

LogOddsRatio log_odds_ratio(int x_a, int n_a, int x_b, int n_b) {
  if (n_a <= 0 || n_b <= 0) throw NotEstimable("log odds ratio needs both arms populated");
  if (x_a < 0 || x_a > n_a || x_b < 0 || x_b > n_b) throw InvalidInput("successes outside [0, n]");
  double a = x_a, b = n_a - x_a, c = x_b, d = n_b - x_b;
  LogOddsRatio out;
  if (a == 0 || b == 0 || c == 0 || d == 0) {
    a += 0.5;
    b += 0.5;
    c += 0.5;
    d += 0.5;
    out.corrected = true;
  }
  out.estimate = std::log((a / b) / (c / d));
  out.variance = 1 / a + 1 / b + 1 / c + 1 / d;
  return out;
}

void StratifiedTable::validate() const {
  if (strata.empty()) throw NotEstimable("stratified table has no strata");
  for (const auto& s : strata) {
    if (s.n_a <= 0 || s.n_b <= 0) throw NotEstimable("stratum without patients on both arms");
    if (s.successes_a < 0 || s.successes_a > s.n_a || s.successes_b < 0 || s.successes_b > s.n_b)
      throw InvalidInput("stratum successes outside [0, n]");
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double chi_square_sf(double q, double df) {
  if (q <= 0) return 1.0;
  return boost::math::gamma_q(df / 2, q / 2);
}

TestResult chi_square_combination(std::span<const double> stats, double alpha) {
  TestResult r;
  for (double t : stats) r.statistic += t * t;
  r.p_value = chi_square_sf(r.statistic, double(stats.size()));
  r.reject = r.p_value < alpha;
  return r;
}

TestResult stratified_logor_test(const StratifiedTable& table, double alpha) {
  table.validate();
  std::vector<double> t;
  t.reserve(table.strata.size());
  for (const auto& s : table.strata) {
    const auto lor = log_odds_ratio(s.successes_a, s.n_a, s.successes_b, s.n_b);
    t.push_back(lor.estimate / std::sqrt(lor.variance));
  }
  return chi_square_combination(t, alpha);
}

TestResult wald_test_at_z0(const FittedLogisticModel& fit_a, const FittedLogisticModel& fit_b, const Vector4& z0,
                           double alpha) {
  if (!fit_a.converged || !fit_b.converged) throw NotEstimable("Wald test needs two converged fits");
  const double delta = (fit_a.coefficients - fit_b.coefficients).dot(z0);
  const double var = z0.dot((fit_a.covariance + fit_b.covariance) * z0);
  if (!(var > 0)) throw NotEstimable("nonpositive Wald variance");
  TestResult r;
  r.statistic = delta / std::sqrt(var);
  r.p_value = 2 * normal_cdf(-std::abs(r.statistic));
  r.reject = r.p_value < alpha;
  return r;
}

double ks_distance(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.empty() || sample_b.empty()) throw InvalidInput("KS distance needs two nonempty samples");
  std::vector<double> a(sample_a.begin(), sample_a.end()), b(sample_b.begin(), sample_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double best = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::abs(double(i) / na - double(j) / nb));
  }
  return best;
}

double success_rate_difference(std::span<const TreatmentArm> arms, std::span<const CovariateProfile>,
                               std::span<const int> responses) {
  double s[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t i = 0; i < arms.size(); ++i) {
    s[index_of(arms[i])] += responses[i];
    n[index_of(arms[i])] += 1;
  }
  if (n[0] == 0 || n[1] == 0) return 0.0;
  return std::abs(s[0] / n[0] - s[1] / n[1]);
}

double rerandomization_test(const AllocationProcedure& procedure, std::span<const CovariateProfile> covariates,
                            std::span<const int> responses, double observed, int resamples, RngStream& rng,
                            const AssignmentStatistic& statistic, const Discretizer& discretizer) {
  if (procedure.uses_responses())
    throw Unsupported("re-randomization test is undefined for response-adaptive procedure '" +
                      std::string(procedure.id()) + "'");
  if (covariates.size() != responses.size()) throw InvalidInput("covariate and response lengths differ");
  if (resamples < 1) throw InvalidParameter("need at least one resample");

  int at_least = 0;
  std::vector<TreatmentArm> arms(covariates.size());
  for (int r = 0; r < resamples; ++r) {
    auto proc = procedure.fresh();
    TrialState state(discretizer);
    for (std::size_t i = 0; i < covariates.size(); ++i) {
      arms[i] = rng.bernoulli(proc->probability_a(state, covariates[i])) ? TreatmentArm::A : TreatmentArm::B;
      state.apply(covariates[i], arms[i], responses[i]);
      proc->observe(state);
    }
    if (statistic(arms, covariates, responses) >= observed) ++at_least;
  }
  return double(1 + at_least) / double(resamples + 1);
}

}  // namespace simlab
