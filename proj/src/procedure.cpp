#include "simlab/procedure.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <Eigen/Dense>

namespace simlab {

using nlohmann::json;

EfronCoin::EfronCoin(double p) : p_(p) { efron_probability(0, p_); }

SmithProcedure::SmithProcedure(SmithRule rule) : rule_(rule) { smith_probability(0, 0, rule_.rho); }

// --- permuted blocks -------------------------------------------------------

PermutedBlockProcedure::PermutedBlockProcedure(int block_size, bool stratified)
    : m_(block_size), stratified_(stratified),
      blocks_(stratified ? Discretizer::kNumStrata : 1, BlockState(block_size)) {}

std::size_t PermutedBlockProcedure::block_index(const TrialState& state, const CovariateProfile& z) const {
  return stratified_ ? static_cast<std::size_t>(state.discretizer().stratum(z)) : 0;
}

double PermutedBlockProcedure::probability_a(const TrialState& state, const CovariateProfile& z) const {
  return blocks_[block_index(state, z)].probability_a();
}

void PermutedBlockProcedure::observe(const TrialState& state) {
  const auto& r = state.records().back();
  blocks_[block_index(state, r.profile)].record(r.arm);
}

// --- Pocock-Simon / Taves --------------------------------------------------

PocockSimonProcedure::PocockSimonProcedure(double p, Weights weights, bool taves)
    : p_(p), weights_(weights), taves_(taves) {
  pocock_simon_probability(0.0, p_);
  for (double w : weights_)
    if (!(w > 0)) throw InvalidParameter("covariate weights must be positive");
}

json PocockSimonProcedure::parameters() const {
  json j{{"w1", weights_[0]}, {"w2", weights_[1]}, {"w3", weights_[2]}};
  if (!taves_) j["p"] = p_;
  return j;
}

// --- Wei urn ---------------------------------------------------------------

void WeiUrnProcedure::observe(const TrialState& state) {
  const auto& r = state.records().back();
  bank_.update(state.discretizer().levels(r.profile), r.arm);
}

json WeiUrnProcedure::parameters() const {
  const auto& p = bank_.parameters();
  return {{"alpha_a", p.alpha_a}, {"alpha_b", p.alpha_b}, {"beta", p.beta}};
}

// --- Raghavarao ------------------------------------------------------------

double RaghavaraoProcedure::probability_a(const TrialState& state, const CovariateProfile& z) const {
  try {
    return raghavarao_probabilities(state, z, ridge_).first;
  } catch (const NotReady&) {
    return crd_probability();
  }
}

// --- Atkinson D_A ----------------------------------------------------------

AtkinsonDAProcedure::AtkinsonDAProcedure(BiasingFunction psi) : psi_(psi) { psi_.validate(); }

double AtkinsonDAProcedure::probability_a(const TrialState&, const CovariateProfile& z) const {
  try {
    return atkinson_probability(atkinson_bias(normal_, zt_, z.design_row()), psi_);
  } catch (const NotReady&) {
    return crd_probability();
  }
}

void AtkinsonDAProcedure::observe(const TrialState& state) {
  const auto& r = state.records().back();
  const Vector4 x = r.profile.design_row();
  normal_.noalias() += x * x.transpose();
  zt_ += double(to_sign(r.arm)) * x;
}

json AtkinsonDAProcedure::parameters() const {
  return {{"psi", psi_.kind == BiasingFunction::Kind::Identity ? "identity" : "power"}, {"gamma", psi_.gamma}};
}

// --- stratified DBCD -------------------------------------------------------

StratifiedDbcdProcedure::StratifiedDbcdProcedure(TargetKind target, double gamma, Strata strata)
    : target_(target), gamma_(gamma), strata_(strata),
      counts_(strata == Strata::Gender ? 2 : Discretizer::kNumStrata) {
  if (!(gamma_ >= 0)) throw InvalidParameter("DBCD gamma must be >= 0");
  if (target != TargetKind::NeymanLogOR && target != TargetKind::FailureOptimalLogOR && target != TargetKind::Balanced)
    throw InvalidParameter("DBCD target must be neyman, failure-optimal or balanced");
}

std::size_t StratifiedDbcdProcedure::key(const TrialState& state, const CovariateProfile& z) const {
  return strata_ == Strata::Gender ? static_cast<std::size_t>(z.gender)
                                   : static_cast<std::size_t>(state.discretizer().stratum(z));
}

double StratifiedDbcdProcedure::probability_a(const TrialState& state, const CovariateProfile& z) const {
  return stratified_dbcd_probability(counts_[key(state, z)], gamma_, target_);
}

void StratifiedDbcdProcedure::observe(const TrialState& state) {
  const auto& r = state.records().back();
  if (!r.response) return;
  auto& s = counts_[key(state, r.profile)];
  if (r.arm == TreatmentArm::A) {
    ++s.n_a;
    s.successes_a += *r.response;
  } else {
    ++s.n_b;
    s.successes_b += *r.response;
  }
}

json StratifiedDbcdProcedure::parameters() const {
  return {{"target", to_string(target_)}, {"gamma", gamma_}, {"strata", strata_ == Strata::Gender ? "gender" : "full"}};
}

// --- Bandyopadhyay-Biswas --------------------------------------------------

BBNormalProcedure::BBNormalProcedure(double scale) : scale_(scale) { bb_normal_probability(0.0, scale_); }

double BBNormalProcedure::adjusted_difference() const {
  Eigen::LDLT<Matrix5> ldlt(normal_);
  if (!positive_definite(ldlt, 1e-13))
    throw NotReady("linear model not yet estimable");
  return 2.0 * ldlt.solve(xy_)(0);
}

double BBNormalProcedure::probability_a(const TrialState&, const CovariateProfile&) const {
  try {
    return bb_normal_probability(adjusted_difference(), scale_);
  } catch (const NotReady&) {
    return crd_probability();
  }
}

void BBNormalProcedure::observe(const TrialState& state) {
  const auto& r = state.records().back();
  if (!r.response) return;
  Vector5 x;
  x << double(to_sign(r.arm)), r.profile.design_row();
  normal_.noalias() += x * x.transpose();
  xy_ += double(*r.response) * x;
}

// --- CARA ------------------------------------------------------------------

CaraProcedure::CaraProcedure(CaraOptions options)
    : options_(options), burn_in_(options.burn_in_p) {
  if (options_.burn_in < 0) throw InvalidParameter("burn-in size must be >= 0");
  if (options_.clamp && !(*options_.clamp >= 0 && *options_.clamp < 0.5))
    throw InvalidParameter("clamp epsilon must lie in [0, 1/2)");
  if (!options_.weighted_da && (options_.target == TargetKind::Balanced || options_.target == TargetKind::NeymanLogOR ||
                                options_.target == TargetKind::FailureOptimalLogOR))
    throw InvalidParameter("CARA target must be one of rva-odds, sqrt-rsihr, neyman-cara, optimal-cara");
}

std::string_view CaraProcedure::id() const {
  if (options_.weighted_da) return "cara5";
  switch (options_.target) {
    case TargetKind::RVAOdds: return "cara1";
    case TargetKind::SqrtRSIHR: return "cara2";
    case TargetKind::NeymanCARA: return "cara3";
    default: return "cara4";
  }
}

double CaraProcedure::probability_a(const TrialState& state, const CovariateProfile& z) const {
  if (state.size() < static_cast<std::size_t>(options_.burn_in) || !fitted())
    return burn_in_.probability_a(state, z);
  const auto& fa = *fits_[0];
  const auto& fb = *fits_[1];
  const double p = options_.weighted_da
                       ? cara5_probability(fa, fb, z)
                       : cara_probability(options_.target, Vector4(fa.coefficients), Vector4(fb.coefficients), z);
  if (options_.clamp) return std::clamp(p, *options_.clamp, 1 - *options_.clamp);
  return p;
}

void CaraProcedure::refit(const TrialState& state, TreatmentArm arm) {
  auto& slot = fits_[index_of(arm)];
  try {
    auto fit = fit_arm(state, arm, slot ? &slot->coefficients : nullptr);
    if (fit.converged) {
      slot = std::move(fit);
      return;
    }
  } catch (const NotEstimable&) {
  }
  ++fit_failures_;
}

void CaraProcedure::observe(const TrialState& state) {
  burn_in_.observe(state);
  const auto n = state.size();
  if (n < static_cast<std::size_t>(options_.burn_in) || !state.records().back().response) return;
  const TreatmentArm last = state.records().back().arm;
  if (n == static_cast<std::size_t>(options_.burn_in) || !fits_[index_of(other(last))])
    refit(state, other(last));
  refit(state, last);
}

json CaraProcedure::parameters() const {
  json j{{"burn_in", options_.burn_in}, {"burn_in_p", options_.burn_in_p}};
  j["clamp"] = options_.clamp ? json(*options_.clamp) : json(nullptr);
  return j;
}

// --- factory ---------------------------------------------------------------

namespace {

class ParamReader {
 public:
  ParamReader(std::string_view id, const ParameterMap& params) : id_(id), params_(params) {}

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = params_.find(key);
    if (it == params_.end()) return fallback;
    const std::string& s = it->second;
    double v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw ConfigError("procedure '" + id_ + "': parameter " + key + "='" + s + "' is not a number");
    return v;
  }

  int integer(const std::string& key, int fallback) {
    const double v = number(key, fallback);
    if (v != static_cast<int>(v))
      throw ConfigError("procedure '" + id_ + "': parameter " + key + " must be an integer");
    return static_cast<int>(v);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  bool has(const std::string& key) const { return params_.count(key) > 0; }

  void finish() const {
    for (const auto& [k, v] : params_)
      if (!used_.count(k)) throw ConfigError("procedure '" + id_ + "' has no parameter '" + k + "'");
  }

 private:
  std::string id_;
  const ParameterMap& params_;
  std::set<std::string> used_;
};

Weights read_weights(ParamReader& r) {
  return {r.number("w1", 1.0), r.number("w2", 1.0), r.number("w3", 1.0)};
}

std::unique_ptr<AllocationProcedure> build(std::string_view id, ParamReader& r, int default_burn_in) {
  if (id == "crd") return std::make_unique<CompleteRandomization>();
  if (id == "efron") return std::make_unique<EfronCoin>(r.number("p", 2.0 / 3.0));
  if (id == "pbd") return std::make_unique<PermutedBlockProcedure>(r.integer("m", 10), false);
  if (id == "spbd") return std::make_unique<PermutedBlockProcedure>(r.integer("m", 10), true);
  if (id == "smith") return std::make_unique<SmithProcedure>(SmithRule{r.number("rho", 2.0)});
  if (id == "pocock-simon") {
    const double p = r.number("p", 0.75);
    return std::make_unique<PocockSimonProcedure>(p, read_weights(r), false);
  }
  if (id == "taves") return std::make_unique<PocockSimonProcedure>(1.0, read_weights(r), true);
  if (id == "wei-urn") {
    UrnBank::Parameters p{r.integer("alpha_a", 1), r.integer("alpha_b", 1), r.integer("beta", 1)};
    return std::make_unique<WeiUrnProcedure>(p);
  }
  if (id == "raghavarao") return std::make_unique<RaghavaraoProcedure>(r.number("ridge", 1e-8));
  if (id == "atkinson-da") {
    BiasingFunction psi;
    const std::string kind = r.text("psi", "identity");
    if (kind == "identity")
      psi.kind = BiasingFunction::Kind::Identity;
    else if (kind == "power")
      psi.kind = BiasingFunction::Kind::Power;
    else
      throw ConfigError("atkinson-da: psi must be identity or power");
    psi.gamma = r.number("gamma", 1.0);
    return std::make_unique<AtkinsonDAProcedure>(psi);
  }
  if (id == "dbcd") {
    const auto target = target_kind_from_string(r.text("target", "neyman"));
    const double gamma = r.number("gamma", 2.0);
    const std::string strata = r.text("strata", "gender");
    if (strata != "gender" && strata != "full") throw ConfigError("dbcd: strata must be gender or full");
    return std::make_unique<StratifiedDbcdProcedure>(
        target, gamma, strata == "gender" ? StratifiedDbcdProcedure::Strata::Gender : StratifiedDbcdProcedure::Strata::Full);
  }
  if (id == "bb-normal") return std::make_unique<BBNormalProcedure>(r.number("T", 1.0));
  if (id.size() == 5 && id.substr(0, 4) == "cara" && id[4] >= '1' && id[4] <= '5') {
    CaraOptions o;
    constexpr TargetKind kinds[] = {TargetKind::RVAOdds, TargetKind::SqrtRSIHR, TargetKind::NeymanCARA,
                                    TargetKind::OptimalCARA, TargetKind::RVAOdds};
    const int which = id[4] - '1';
    o.target = kinds[which];
    o.weighted_da = which == 4;
    o.burn_in = r.integer("burn_in", default_burn_in);
    o.burn_in_p = r.number("burn_in_p", 0.75);
    if (r.has("clamp")) o.clamp = r.number("clamp", 0.01);
    return std::make_unique<CaraProcedure>(o);
  }
  std::string valid;
  for (const auto& v : procedure_ids()) valid += (valid.empty() ? "" : ", ") + v;
  throw ConfigError("unknown procedure '" + std::string(id) + "'; valid ids: " + valid);
}

}  // namespace

const std::vector<std::string>& procedure_ids() {
  static const std::vector<std::string> ids{"crd",     "efron",  "pbd",        "spbd",        "smith", "pocock-simon",
                                            "taves",   "wei-urn", "raghavarao", "atkinson-da", "dbcd",  "cara1",
                                            "cara2",   "cara3",  "cara4",      "cara5",       "bb-normal"};
  return ids;
}

std::unique_ptr<AllocationProcedure> make_procedure(std::string_view id, const ParameterMap& params,
                                                    int default_burn_in) {
  ParamReader reader(id, params);
  try {
    auto proc = build(id, reader, default_burn_in);
    reader.finish();
    return proc;
  } catch (const InvalidParameter& e) {
    throw ConfigError("procedure '" + std::string(id) + "': " + e.what());
  }
}

json default_settings() {
  json procs = json::object();
  for (const auto& id : procedure_ids()) procs[id] = make_procedure(id)->parameters();
  const Discretizer d;
  const TestSettings t;
  return {
      {"procedures", procs},
      {"discretizer", {{"age_cut", d.age_cut}, {"cholesterol_cut", d.cholesterol_cut}}},
      {"test", {{"z0", {t.z0(0), t.z0(1), t.z0(2)}}, {"alpha", t.alpha}}},
      {"study", {{"reps", 5000}, {"burn_in", 80}, {"workers", 1}}},
  };
}

}  // namespace simlab
