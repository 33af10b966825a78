#include "simlab/scenario.hpp"

#include <fstream>

namespace simlab {

using nlohmann::json;

void ScenarioSpec::validate() const {
  if (n <= 0) throw ConfigError("n must be positive");
  if (burn_in < 0 || burn_in >= n) throw ConfigError("need n > burn_in >= 0");
  if (!theta_a.allFinite() || !theta_b.allFinite()) throw ConfigError("non-finite theta");
  const auto& g = covariates;
  if (g.gender_p < 0 || g.gender_p > 1) throw ConfigError("gender p outside [0,1]");
  if (g.age_lo > g.age_hi) throw ConfigError("age_lo > age_hi");
  if (!(g.cholesterol_sd >= 0)) throw ConfigError("cholesterol sd must be >= 0");
  if (!(test.alpha > 0 && test.alpha < 1)) throw ConfigError("test alpha outside (0,1)");
}

namespace {

json vec_json(const Vector4& v) { return json::array({v(0), v(1), v(2), v(3)}); }

Vector4 json_vec4(const json& j, const char* what) {
  if (!j.is_array() || j.size() != kNumParameters)
    throw ConfigError(std::string(what) + " must be an array of 4 numbers");
  Vector4 v;
  for (std::size_t i = 0; i < kNumParameters; ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

void to_json(json& j, const ScenarioSpec& s) {
  j = json{
      {"name", s.name},
      {"n", s.n},
      {"burn_in", s.burn_in},
      {"seed", s.seed},
      {"fixed_covariates", s.fixed_covariates},
      {"covariates",
       {{"gender", {{"dist", "bernoulli"}, {"p", s.covariates.gender_p}}},
        {"age", {{"dist", "discrete_uniform"}, {"lo", s.covariates.age_lo}, {"hi", s.covariates.age_hi}}},
        {"cholesterol",
         {{"dist", "normal"}, {"mean", s.covariates.cholesterol_mean}, {"sd", s.covariates.cholesterol_sd}}}}},
      {"theta", {{"A", vec_json(s.theta_a)}, {"B", vec_json(s.theta_b)}}},
      {"discretizer", {{"age_cut", s.discretizer.age_cut}, {"cholesterol_cut", s.discretizer.cholesterol_cut}}},
      {"test", {{"z0", {s.test.z0(0), s.test.z0(1), s.test.z0(2)}}, {"alpha", s.test.alpha}}},
  };
}

void from_json(const json& j, ScenarioSpec& s) {
  try {
    s = ScenarioSpec{};
    s.name = j.value("name", std::string{});
    s.n = j.at("n").get<int>();
    s.burn_in = j.value("burn_in", 80);
    s.seed = j.value("seed", std::uint64_t{1});
    s.fixed_covariates = j.value("fixed_covariates", true);
    if (j.contains("covariates")) {
      const auto& c = j.at("covariates");
      if (c.contains("gender")) {
        if (c["gender"].value("dist", "bernoulli") != "bernoulli")
          throw ConfigError("gender generator must be bernoulli");
        s.covariates.gender_p = c["gender"].value("p", 0.5);
      }
      if (c.contains("age")) {
        if (c["age"].value("dist", "discrete_uniform") != "discrete_uniform")
          throw ConfigError("age generator must be discrete_uniform");
        s.covariates.age_lo = c["age"].value("lo", 30);
        s.covariates.age_hi = c["age"].value("hi", 75);
      }
      if (c.contains("cholesterol")) {
        if (c["cholesterol"].value("dist", "normal") != "normal")
          throw ConfigError("cholesterol generator must be normal");
        s.covariates.cholesterol_mean = c["cholesterol"].value("mean", 200.0);
        s.covariates.cholesterol_sd = c["cholesterol"].value("sd", 20.0);
      }
    }
    s.theta_a = json_vec4(j.at("theta").at("A"), "theta.A");
    s.theta_b = json_vec4(j.at("theta").at("B"), "theta.B");
    if (j.contains("discretizer")) {
      s.discretizer.age_cut = j["discretizer"].value("age_cut", 52.5);
      s.discretizer.cholesterol_cut = j["discretizer"].value("cholesterol_cut", 200.0);
    }
    if (j.contains("test")) {
      const auto& t = j["test"];
      if (t.contains("z0")) {
        const auto& z = t["z0"];
        if (!z.is_array() || z.size() != kNumCovariates)
          throw ConfigError("test.z0 must be an array of 3 numbers");
        s.test.z0 = {z[0].get<double>(), z[1].get<double>(), z[2].get<double>()};
      }
      s.test.alpha = t.value("alpha", 0.05);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario schema: ") + e.what());
  }
  s.validate();
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
  return j.get<ScenarioSpec>();
}

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << json(spec).dump(2) << '\n';
}

ScenarioSpec builtin_model(int model) {
  ScenarioSpec s;
  const Vector4 base{-1.652, -0.810, 0.038, 0.001};
  const Vector4 treat_b{-0.402, 0.173, 0.015, 0.004};
  switch (model) {
    case 1:
      s.name = "model1";
      s.n = 200;
      s.theta_a = base;
      s.theta_b = base;
      break;
    case 2:
      s.name = "model2";
      s.n = 200;
      s.theta_a = Vector4{-1.402, -0.810, 0.038, 0.001};
      s.theta_b = treat_b;
      break;
    case 3:
      s.name = "model3";
      s.n = 160;
      s.theta_a = base;
      s.theta_b = treat_b;
      break;
    default:
      throw ConfigError("builtin model must be 1, 2 or 3");
  }
  s.burn_in = 80;
  s.seed = 7;
  s.fixed_covariates = true;
  return s;
}

CovariateProfile generate_profile(const CovariateGenerators& g, RngStream& rng) {
  CovariateProfile z;
  z.gender = rng.bernoulli(g.gender_p) ? 1 : 0;
  z.age = static_cast<int>(rng.uniform_int(g.age_lo, g.age_hi));
  z.cholesterol = rng.normal(g.cholesterol_mean, g.cholesterol_sd);
  return z;
}

std::vector<CovariateProfile> generate_covariates(const ScenarioSpec& spec, RngStream& rng) {
  std::vector<CovariateProfile> out;
  out.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) out.push_back(generate_profile(spec.covariates, rng));
  return out;
}

int simulate_response(const Vector4& theta, const CovariateProfile& z, RngStream& rng) {
  return rng.bernoulli(response_probability(theta, z)) ? 1 : 0;
}

}  // namespace simlab
