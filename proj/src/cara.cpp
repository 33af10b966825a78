#include "simlab/cara.hpp"

#include <array>
#include <string>

namespace simlab {

namespace {

constexpr std::array<std::pair<TargetKind, std::string_view>, 7> kTargetNames{{
    {TargetKind::Balanced, "balanced"},
    {TargetKind::NeymanLogOR, "neyman"},
    {TargetKind::FailureOptimalLogOR, "failure-optimal"},
    {TargetKind::RVAOdds, "rva-odds"},
    {TargetKind::SqrtRSIHR, "sqrt-rsihr"},
    {TargetKind::NeymanCARA, "neyman-cara"},
    {TargetKind::OptimalCARA, "optimal-cara"},
}};

}  // namespace

std::string_view to_string(TargetKind kind) {
  for (const auto& [k, name] : kTargetNames)
    if (k == kind) return name;
  return "unknown";
}

TargetKind target_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kTargetNames)
    if (n == name) return k;
  throw ConfigError("unknown target '" + std::string(name) + "'");
}

double stratified_dbcd_probability(const StratumCounts& s, double gamma, TargetKind target) {
  if (s.n_a == 0 || s.n_b == 0) return 0.5;
  const double p_a = smoothed_rate(s.successes_a, s.n_a);
  const double p_b = smoothed_rate(s.successes_b, s.n_b);
  const double current = double(s.n_a) / double(s.n_a + s.n_b);
  return dbcd_allocation(current, target_allocation(target, p_a, p_b), gamma);
}

double bb_normal_probability(double mean_difference, double scale) {
  if (!(scale > 0)) throw InvalidParameter("scaling constant T must be positive");
  return normal_cdf(mean_difference / scale);
}

double expected_failures(std::span<const double> target_a, std::span<const double> p_a,
                         std::span<const double> p_b, std::span<const double> sizes) {
  if (target_a.size() != p_a.size() || p_a.size() != p_b.size() || p_b.size() != sizes.size())
    throw InvalidInput("per-stratum inputs must have equal length");
  double total = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (!(target_a[j] >= 0 && target_a[j] <= 1)) throw InvalidInput("target proportion outside [0,1]");
    if (!(sizes[j] >= 0)) throw InvalidInput("stratum size must be >= 0");
    total += sizes[j] * (target_a[j] * (1 - p_a[j]) + (1 - target_a[j]) * (1 - p_b[j]));
  }
  return total;
}

double cara_probability(TargetKind kind, const Vector4& theta_a, const Vector4& theta_b, const CovariateProfile& z) {
  return target_allocation(kind, response_probability(theta_a, z), response_probability(theta_b, z));
}

double da_derivative(const FittedLogisticModel& fit, const CovariateProfile& z) {
  const Vector4 x = z.design_row();
  const double p = response_probability(Vector4(fit.coefficients), z);
  return x.dot(fit.covariance * x) * p * (1 - p);
}

double cara5_probability(const FittedLogisticModel& fit_a, const FittedLogisticModel& fit_b,
                         const CovariateProfile& z) {
  const double p_a = response_probability(Vector4(fit_a.coefficients), z);
  const double p_b = response_probability(Vector4(fit_b.coefficients), z);
  return weighted_da_probability(p_a / (1 - p_a), da_derivative(fit_a, z), p_b / (1 - p_b), da_derivative(fit_b, z));
}

}  // namespace simlab
