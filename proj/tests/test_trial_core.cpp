#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "simlab/error.hpp"
#include "simlab/rng.hpp"
#include "simlab/scenario.hpp"
#include "simlab/trial.hpp"

using namespace simlab;

TEST_CASE("arm encoding round-trips") {
  CHECK(to_sign(TreatmentArm::A) == 1);
  CHECK(to_sign(TreatmentArm::B) == -1);
  for (auto arm : {TreatmentArm::A, TreatmentArm::B}) {
    CHECK(from_sign(to_sign(arm)) == arm);
    CHECK(other(other(arm)) == arm);
  }
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_c |= x != c.next_u64();
    differs_d |= x != d.next_u64();
  }
  CHECK(differs_c);
  CHECK(differs_d);
}

TEST_CASE("rng variates") {
  RngStream rng(1, 1);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.01));
  for (int i = 0; i < 2000; ++i) {
    const auto k = rng.uniform_int(30, 75);
    REQUIRE(k >= 30);
    REQUIRE(k <= 75);
  }
  double s = 0, ss = 0;
  for (int i = 0; i < 20000; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / 20000) < 0.03);
  CHECK(ss / 20000 == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("generate_covariates") {
  ScenarioSpec spec = builtin_model(1);

  SUBCASE("deterministic per (seed, stream)") {
    RngStream r1(9, 2), r2(9, 2);
    CHECK(generate_covariates(spec, r1) == generate_covariates(spec, r2));
  }

  SUBCASE("marginals") {
    spec.n = 10000;
    spec.burn_in = 0;
    RngStream rng(2024, 0);
    const auto z = generate_covariates(spec, rng);
    REQUIRE(z.size() == 10000);
    double gender = 0, chol = 0;
    for (const auto& p : z) {
      gender += p.gender;
      chol += p.cholesterol;
      REQUIRE(p.age >= 30);
      REQUIRE(p.age <= 75);
      REQUIRE_NOTHROW(p.validate());
    }
    CHECK(std::abs(gender / 10000 - 0.5) <= 0.015);
    // SE of the mean is 0.2.
    CHECK(std::abs(chol / 10000 - 200) <= 0.6);
  }
}

TEST_CASE("response_probability") {
  CHECK(response_probability(Vector4::Zero(), CovariateProfile{1, 60, 250}) == 0.5);

  // Model 1 arm A at (0, 52.5, 200); reference from 30-digit arithmetic.
  const Vector4 theta{-1.652, -0.810, 0.038, 0.001};
  const Eigen::Vector3d z{0, 52.5, 200};
  const double p = response_probability(theta, z);
  CHECK(p == doctest::Approx(0.632510017815434151).epsilon(1e-14));
  const long double pl = response_probability(theta.cast<long double>().eval(), z);
  CHECK(std::abs(double(pl) - p) < 1e-15);

  const Vector4 saturated{50, 0, 0, 0};
  CHECK(response_probability(saturated, CovariateProfile{}) > 1 - 1e-9);

  Vector4 bad = theta;
  bad(2) = std::nan("");
  CHECK_THROWS_AS(response_probability(bad, CovariateProfile{}), InvalidParameter);
}

TEST_CASE("response_probability is increasing in each coefficient for positive covariates") {
  RngStream rng(5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    Vector4 theta;
    for (int j = 0; j < 4; ++j) theta(j) = 0.02 * (rng.uniform() - 0.5);
    const CovariateProfile z{1, static_cast<int>(rng.uniform_int(30, 75)), 150 + 100 * rng.uniform()};
    for (int j = 0; j < 4; ++j) {
      Vector4 up = theta;
      up(j) += 1e-3;
      CHECK(response_probability(up, z) > response_probability(theta, z));
    }
  }
}

TEST_CASE("simulate_response") {
  RngStream rng(11, 1);
  const CovariateProfile z{0, 40, 190};
  for (int i = 0; i < 1000; ++i) {
    CHECK(simulate_response(Vector4{1000, 0, 0, 0}, z, rng) == 1);
    CHECK(simulate_response(Vector4{-1000, 0, 0, 0}, z, rng) == 0);
  }
  const Vector4 theta{std::log(0.3 / 0.7), 0, 0, 0};
  int successes = 0;
  for (int i = 0; i < 10000; ++i) successes += simulate_response(theta, z, rng);
  CHECK(std::abs(successes / 10000.0 - 0.3) <= 0.015);

  // Exactly one uniform per response.
  RngStream a(3, 3), b(3, 3);
  simulate_response(theta, z, a);
  b.uniform();
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("trial state bookkeeping") {
  TrialState s;
  s.apply(CovariateProfile{0, 40, 180}, TreatmentArm::A, 1);
  CHECK(s.arm_count(TreatmentArm::A) == 1);
  CHECK(s.arm_count(TreatmentArm::B) == 0);
  CHECK(s.margin_count(1, 0, TreatmentArm::A) == 1);

  s.apply(CovariateProfile{1, 70, 230}, TreatmentArm::B, 0);
  s.apply(CovariateProfile{1, 53, 201}, TreatmentArm::B, 1);
  s.apply(CovariateProfile{0, 52, 200}, TreatmentArm::A, 0);
  s.apply(CovariateProfile{0, 30, 170}, TreatmentArm::A, 1);
  CHECK(s.failures() == 2);
  CHECK(s.records().back().index == 5);
  CHECK(s.margin_count(1, 1, TreatmentArm::B) == 2);
  CHECK(s.margin_count(2, 0, TreatmentArm::A) == 3);

  s.set_response(5, 0);
  CHECK(s.failures() == 3);
  CHECK_THROWS_AS(s.apply(CovariateProfile{}, TreatmentArm::A, 2), InvalidInput);
}

TEST_CASE("incremental counts equal a full recount") {
  RngStream rng(77, 1);
  ScenarioSpec spec = builtin_model(2);
  TrialState s;
  for (int i = 0; i < 500; ++i) {
    const auto z = generate_profile(spec.covariates, rng);
    const auto arm = rng.bernoulli(0.5) ? TreatmentArm::A : TreatmentArm::B;
    std::optional<int> y;
    if (rng.bernoulli(0.8)) y = rng.bernoulli(0.4) ? 1 : 0;
    s.apply(z, arm, y);
    if (i % 50 == 0) REQUIRE(s.counts_equal(s.recount()));
  }
  CHECK(s.counts_equal(s.recount()));
  CHECK(s.arm_count(TreatmentArm::A) + s.arm_count(TreatmentArm::B) == 500);
}

TEST_CASE("discretizer") {
  CHECK(discretize(CovariateProfile{0, 40, 180}) == std::array<int, 3>{0, 0, 0});
  CHECK(discretize(CovariateProfile{1, 75, 260}) == std::array<int, 3>{1, 1, 1});
  CHECK(discretize(CovariateProfile{0, 52, 200})[1] == 0);
  CHECK(discretize(CovariateProfile{0, 53, 200})[1] == 1);
  CHECK(discretize(CovariateProfile{0, 53, 200})[2] == 0);
  Discretizer d{60, 220};
  CHECK(discretize(CovariateProfile{1, 59, 221}, d) == std::array<int, 3>{1, 0, 1});
}

TEST_CASE("scenario validation and JSON") {
  ScenarioSpec s = builtin_model(3);
  CHECK_NOTHROW(s.validate());
  const ScenarioSpec back = nlohmann::json(s).get<ScenarioSpec>();
  CHECK(nlohmann::json(back) == nlohmann::json(s));

  ScenarioSpec bad = s;
  bad.burn_in = bad.n;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  nlohmann::json j = s;
  j["theta"]["A"] = {1, 2, 3};
  CHECK_THROWS_AS(j.get<ScenarioSpec>(), ConfigError);
  j = s;
  j.erase("n");
  CHECK_THROWS_AS(j.get<ScenarioSpec>(), ConfigError);
}

TEST_CASE("bundled scenario files mirror the built-in models") {
  for (int m = 1; m <= 3; ++m) {
    const auto path = std::filesystem::path(SIMLAB_DATA_DIR) / "scenarios" / ("model" + std::to_string(m) + ".json");
    const ScenarioSpec file = load_scenario(path);
    CHECK(nlohmann::json(file) == nlohmann::json(builtin_model(m)));
  }
}
