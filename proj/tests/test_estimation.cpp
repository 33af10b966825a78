#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/LU>

#include "simlab/engine.hpp"
#include "simlab/error.hpp"
#include "simlab/estimation.hpp"
#include "simlab/procedure.hpp"
#include "simlab/scenario.hpp"

using namespace simlab;

namespace {

Eigen::MatrixXd random_design(RngStream& rng, int n) {
  Eigen::MatrixXd z(n, 4);
  for (int i = 0; i < n; ++i) {
    const auto p = generate_profile(CovariateGenerators{}, rng);
    z.row(i) = p.design_row().transpose();
  }
  return z;
}

Eigen::VectorXd simulate_outcomes(const Eigen::MatrixXd& z, const Vector4& theta, RngStream& rng) {
  Eigen::VectorXd y(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) y(i) = rng.bernoulli(logistic(z.row(i).dot(theta))) ? 1.0 : 0.0;
  return y;
}

}  // namespace

TEST_CASE("intercept-only MLE is the logit of the success fraction") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(100, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
  y.head(30).setOnes();
  const auto fit = fit_logistic(z, y);
  REQUIRE(fit.converged);
  CHECK(fit.coefficients(0) == doctest::Approx(-0.847297860387203614).epsilon(1e-10));
  CHECK(fit.covariance(0, 0) == doctest::Approx(1.0 / (100 * 0.3 * 0.7)).epsilon(1e-8));
}

TEST_CASE("saturated binary-covariate fit reproduces cell frequencies") {
  Eigen::MatrixXd z(35, 2);
  Eigen::VectorXd y(35);
  for (int i = 0; i < 35; ++i) {
    const bool x = i >= 20;
    z(i, 0) = 1;
    z(i, 1) = x;
    y(i) = x ? (i - 20 < 12) : (i < 7);
  }
  const auto fit = fit_logistic(z, y);
  REQUIRE(fit.converged);
  CHECK(logistic(fit.coefficients(0)) == doctest::Approx(7.0 / 20).epsilon(1e-10));
  CHECK(logistic(fit.coefficients(0) + fit.coefficients(1)) == doctest::Approx(12.0 / 15).epsilon(1e-10));
}

TEST_CASE("separated data is flagged as nonconverged") {
  Eigen::MatrixXd z(10, 2);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    const double x = i < 5 ? -(i + 1) : (i - 4);
    z(i, 0) = 1;
    z(i, 1) = x;
    y(i) = x > 0;
  }
  const auto fit = fit_logistic(z, y);
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations <= 50);
  CHECK(fit.covariance.hasNaN());
}

TEST_CASE("fit preconditions") {
  CHECK_THROWS_AS(fit_logistic(Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(4)), NotEstimable);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  CHECK_THROWS_AS(fit_logistic(Eigen::MatrixXd::Ones(10, 1), y), NotEstimable);
  CHECK_THROWS_AS(fit_logistic(Eigen::MatrixXd::Ones(10, 1), Eigen::VectorXd::Zero(9)), InvalidInput);
}

TEST_CASE("converged fits: score, calibration, symmetric covariance") {
  RngStream rng(17, 1);
  const Vector4 theta{-1.402, -0.810, 0.038, 0.001};
  int converged = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto z = random_design(rng, 80);
    const auto y = simulate_outcomes(z, theta, rng);
    if (y.sum() == 0 || y.sum() == 80) continue;
    const auto fit = fit_logistic(z, y);
    if (!fit.converged) continue;
    ++converged;
    Eigen::VectorXd p(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) p(i) = logistic(z.row(i).dot(fit.coefficients));
    const Eigen::VectorXd score = z.transpose() * (y - p);
    CHECK(score.norm() < 1e-8);
    CHECK(fit.score_norm < 1e-8);
    CHECK(std::abs(p.mean() - y.mean()) < 1e-8);
    CHECK((fit.covariance - fit.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK(converged >= 45);
}

TEST_CASE("covariance matches a finite-difference Hessian") {
  RngStream rng(23, 1);
  const Vector4 theta{-1.652, -0.810, 0.038, 0.001};
  int checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto z = random_design(rng, 40);
    const auto y = simulate_outcomes(z, theta, rng);
    if (y.sum() < 3 || y.sum() > 37) continue;
    const auto fit = fit_logistic(z, y);
    if (!fit.converged) continue;
    // Central differences of the analytic log-likelihood gradient, with
    // steps scaled to each column's magnitude.
    auto gradient = [&](const Eigen::VectorXd& t) {
      Eigen::VectorXd p(z.rows());
      for (Eigen::Index i = 0; i < z.rows(); ++i) p(i) = logistic(z.row(i).dot(t));
      return Eigen::VectorXd(z.transpose() * (y - p));
    };
    Eigen::MatrixXd hessian(4, 4);
    for (int j = 0; j < 4; ++j) {
      const double h = 1e-4 / z.col(j).cwiseAbs().maxCoeff();
      Eigen::VectorXd up = fit.coefficients, down = fit.coefficients;
      up(j) += h;
      down(j) -= h;
      hessian.col(j) = (gradient(up) - gradient(down)) / (2 * h);
    }
    hessian = 0.5 * (hessian + hessian.transpose()).eval();
    const Eigen::MatrixXd numeric = (-hessian).inverse();
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const double scale = std::sqrt(fit.covariance(a, a) * fit.covariance(b, b));
        CHECK(std::abs(numeric(a, b) - fit.covariance(a, b)) <= 1e-4 * scale);
      }
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("template fit in long double agrees with double") {
  RngStream rng(29, 1);
  const auto z = random_design(rng, 60);
  const auto y = simulate_outcomes(z, Vector4{-1.402, -0.810, 0.038, 0.001}, rng);
  const auto fd = fit_logistic(z, y);
  const auto fl = fit_logistic(z.cast<long double>().eval(), y.cast<long double>().eval());
  REQUIRE(fd.converged);
  REQUIRE(fl.converged);
  for (int j = 0; j < 4; ++j)
    CHECK(double(fl.coefficients(j)) == doctest::Approx(fd.coefficients(j)).epsilon(1e-7));
}

TEST_CASE("log odds ratio") {
  const auto equal = log_odds_ratio(10, 40, 5, 20);
  CHECK(equal.estimate == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(equal.variance == doctest::Approx(1.0 / 10 + 1.0 / 30 + 1.0 / 5 + 1.0 / 15));
  CHECK_FALSE(equal.corrected);
  CHECK(log_odds_ratio(0.95, 0.70) == doctest::Approx(2.09714111877923685).epsilon(1e-14));

  const auto zero = log_odds_ratio(0, 10, 4, 10);
  CHECK(zero.corrected);
  CHECK(std::isfinite(zero.estimate));
  CHECK(zero.estimate == doctest::Approx(std::log((0.5 / 10.5) / (4.5 / 6.5))));
  CHECK(zero.variance == doctest::Approx(1 / 0.5 + 1 / 10.5 + 1 / 4.5 + 1 / 6.5));

  for (auto [xa, na, xb, nb] : {std::array{3, 10, 7, 12}, std::array{0, 5, 5, 5}, std::array{9, 20, 1, 30}}) {
    const auto f = log_odds_ratio(xa, na, xb, nb), s = log_odds_ratio(xb, nb, xa, na);
    CHECK(f.estimate == doctest::Approx(-s.estimate).epsilon(1e-15));
    CHECK(f.variance == doctest::Approx(s.variance).epsilon(1e-15));
  }
  CHECK_THROWS(log_odds_ratio(1, 0, 1, 2));
}

TEST_CASE("reference distribution values") {
  CHECK(normal_cdf(1.0) == doctest::Approx(0.841344746068542949).epsilon(1e-14));
  CHECK(chi_square_sf(3.8416, 2) == doctest::Approx(0.146489723462365780).epsilon(1e-12));
  CHECK(chi_square_sf(0.0, 2) == 1.0);
}

TEST_CASE("stratified log-OR test") {
  const std::vector<double> zero{0.0, 0.0};
  const auto t0 = chi_square_combination(zero);
  CHECK(t0.statistic == 0.0);
  CHECK(t0.p_value == 1.0);
  CHECK_FALSE(t0.reject);

  const std::vector<double> one{1.96, 0.0};
  const auto t1 = chi_square_combination(one);
  CHECK(t1.statistic == doctest::Approx(3.8416).epsilon(1e-14));
  CHECK(t1.p_value == doctest::Approx(0.146489723462365780).epsilon(1e-12));

  StratifiedTable table{{{10, 20, 10, 20}, {5, 15, 5, 15}}};
  const auto t = stratified_logor_test(table);
  CHECK(t.statistic == doctest::Approx(0.0).epsilon(1e-15));

  StratifiedTable empty{{{10, 20, 0, 0}}};
  CHECK_THROWS_AS(stratified_logor_test(empty), NotEstimable);
  StratifiedTable bad{{{21, 20, 0, 5}}};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("stratified log-OR test holds its level under the null") {
  // Gender strata with Model 1 success probabilities at the stratum means.
  const Vector4 theta = builtin_model(1).theta_a;
  BinaryStratifiedScenario scenario;
  scenario.stratum_weights = {0.5, 0.5};
  scenario.p_a = {response_probability(theta, Eigen::Vector3d(0, 52.5, 200)),
                  response_probability(theta, Eigen::Vector3d(1, 52.5, 200))};
  scenario.p_b = scenario.p_a;
  scenario.n = 200;
  CompleteRandomization crd;
  int rejected = 0;
  for (int r = 1; r <= 5000; ++r) {
    RngStream rng(4242, static_cast<std::uint64_t>(r));
    rejected += stratified_logor_test(run_binary_stratified_trial(scenario, crd, rng).table).reject;
  }
  CHECK(std::abs(rejected / 5000.0 - 0.05) <= 0.01);
}

TEST_CASE("Wald test at z0") {
  FittedLogisticModel fa;
  fa.coefficients = Eigen::VectorXd::Zero(4);
  fa.coefficients(0) = 0.5;
  fa.covariance = Eigen::MatrixXd::Identity(4, 4) * 0.01;
  fa.converged = true;
  FittedLogisticModel fb = fa;
  const Vector4 z0{1, 0, 0, 0};
  const auto same = wald_test_at_z0(fa, fb, z0);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0));

  // variance = 0.02, so shift the intercept by 1.96 sqrt(0.02).
  fb.coefficients(0) = 0.5 - 1.96 * std::sqrt(0.02);
  const auto edge = wald_test_at_z0(fa, fb, z0);
  CHECK(edge.statistic == doctest::Approx(1.96).epsilon(1e-12));
  CHECK(edge.p_value == doctest::Approx(0.05).epsilon(1e-3));

  fb.converged = false;
  CHECK_THROWS_AS(wald_test_at_z0(fa, fb, z0), NotEstimable);
}

TEST_CASE("Kolmogorov-Smirnov distance") {
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4}, c{10, 11};
  CHECK(ks_distance(a, a) == 0.0);
  CHECK(ks_distance(a, c) == 1.0);
  CHECK(ks_distance(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(ks_distance(a, std::vector<double>{}), InvalidInput);

  RngStream rng(3, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(static_cast<std::size_t>(rng.uniform_int(1, 30))), y(static_cast<std::size_t>(rng.uniform_int(1, 30)));
    for (auto& v : x) v = double(rng.uniform_int(30, 75));
    for (auto& v : y) v = double(rng.uniform_int(30, 75));
    const double d = ks_distance(x, y);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == ks_distance(y, x));
    std::vector<double> ex, ey;
    for (double v : x) ex.push_back(std::exp(v / 10));
    for (double v : y) ey.push_back(std::exp(v / 10));
    CHECK(ks_distance(ex, ey) == d);
  }
}

TEST_CASE("re-randomization test boundaries") {
  std::vector<CovariateProfile> z(20, CovariateProfile{0, 40, 190});
  std::vector<int> y(20, 1);
  RngStream rng(1, 1);
  CompleteRandomization crd;
  // Every arrangement has the same statistic when all responses are equal.
  CHECK(rerandomization_test(crd, z, y, 0.0, 99, rng) == 1.0);
  CHECK(rerandomization_test(crd, z, y, 2.0, 99, rng) == doctest::Approx(1.0 / 100));

  CaraProcedure cara;
  CHECK_THROWS_AS(rerandomization_test(cara, z, y, 0.0, 99, rng), Unsupported);
  StratifiedDbcdProcedure dbcd;
  CHECK_THROWS_AS(rerandomization_test(dbcd, z, y, 0.0, 99, rng), Unsupported);
}

TEST_CASE("re-randomization test holds its level under the null") {
  const auto spec = builtin_model(1);
  PermutedBlockProcedure pbd(4);
  int rejected = 0;
  const int outer = 1000;
  for (int r = 1; r <= outer; ++r) {
    RngStream rng(777, static_cast<std::uint64_t>(r));
    std::vector<CovariateProfile> z;
    std::vector<int> y;
    std::vector<TreatmentArm> arms;
    auto proc = pbd.fresh();
    TrialState state;
    for (int i = 0; i < spec.n; ++i) {
      z.push_back(generate_profile(spec.covariates, rng));
      const auto arm = rng.bernoulli(proc->probability_a(state, z.back())) ? TreatmentArm::A : TreatmentArm::B;
      y.push_back(simulate_response(spec.theta(arm), z.back(), rng));
      arms.push_back(arm);
      state.apply(z.back(), arm, y.back());
      proc->observe(state);
    }
    const double observed = success_rate_difference(arms, z, y);
    rejected += rerandomization_test(pbd, z, y, observed, 199, rng) <= 0.05;
  }
  CHECK(std::abs(rejected / double(outer) - 0.05) <= 0.02);
}
