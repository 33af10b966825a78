#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace simlab {

enum class TreatmentArm { A, B };

// A <-> +1, B <-> -1.
constexpr int to_sign(TreatmentArm arm) { return arm == TreatmentArm::A ? 1 : -1; }
constexpr TreatmentArm from_sign(int t) { return t > 0 ? TreatmentArm::A : TreatmentArm::B; }
constexpr TreatmentArm other(TreatmentArm arm) {
  return arm == TreatmentArm::A ? TreatmentArm::B : TreatmentArm::A;
}
constexpr std::size_t index_of(TreatmentArm arm) { return arm == TreatmentArm::A ? 0 : 1; }

inline constexpr std::size_t kNumCovariates = 3;
inline constexpr std::size_t kNumParameters = kNumCovariates + 1;

using Vector4 = Eigen::Matrix<double, 4, 1>;
using Matrix4 = Eigen::Matrix<double, 4, 4>;

// Baseline covariates: gender (0 male, 1 female), age in years, cholesterol.
struct CovariateProfile {
  int gender = 0;
  int age = 30;
  double cholesterol = 200.0;

  // Raw covariates (z1, z2, z3).
  Eigen::Vector3d covariates() const { return {double(gender), double(age), cholesterol}; }
  // Design row with intercept: (1, z1, z2, z3).
  Vector4 design_row() const { return {1.0, double(gender), double(age), cholesterol}; }

  // Throws InvalidInput when z1 is not binary, age is outside [30,75] or
  // cholesterol is not finite.
  void validate() const;

  friend bool operator==(const CovariateProfile&, const CovariateProfile&) = default;
};

struct PatientRecord {
  std::size_t index = 0;  // 1-based entry order
  CovariateProfile profile;
  TreatmentArm arm = TreatmentArm::A;
  std::optional<int> response;  // 1 success, 0 failure
};

// Maps a profile onto binary levels per covariate. Gender passes through;
// age and cholesterol are split at strict cutpoints.
struct Discretizer {
  double age_cut = 52.5;
  double cholesterol_cut = 200.0;

  std::array<int, kNumCovariates> levels(const CovariateProfile& z) const {
    return {z.gender, z.age > age_cut ? 1 : 0, z.cholesterol > cholesterol_cut ? 1 : 0};
  }

  // Index of the full covariate-combination stratum, in [0, 8).
  int stratum(const CovariateProfile& z) const {
    auto l = levels(z);
    return l[0] + 2 * l[1] + 4 * l[2];
  }

  static constexpr int kNumStrata = 8;
};

inline std::array<int, kNumCovariates> discretize(const CovariateProfile& z,
                                                  const Discretizer& d = {}) {
  return d.levels(z);
}

// Sequential trial history with incrementally maintained counts.
class TrialState {
 public:
  explicit TrialState(Discretizer discretizer = {}) : discretizer_(discretizer) {}

  void apply(const CovariateProfile& profile, TreatmentArm arm,
             std::optional<int> response = std::nullopt);

  // Records the response of an already-assigned patient (1-based index).
  void set_response(std::size_t index, int response);

  const std::vector<PatientRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  int arm_count(TreatmentArm arm) const { return arm_counts_[index_of(arm)]; }
  // Signed N_A(n) - N_B(n).
  int imbalance() const { return arm_counts_[0] - arm_counts_[1]; }
  // N_ijl(n): patients on `arm` at `level` of covariate `covariate`.
  int margin_count(std::size_t covariate, int level, TreatmentArm arm) const {
    return margins_[covariate][static_cast<std::size_t>(level)][index_of(arm)];
  }
  int failures() const { return failures_; }

  const Discretizer& discretizer() const { return discretizer_; }

  // Rebuilds all counts from the record list.
  TrialState recount() const;
  bool counts_equal(const TrialState& other) const;

 private:
  void count(const PatientRecord& record, int sign);

  Discretizer discretizer_;
  std::vector<PatientRecord> records_;
  std::array<int, 2> arm_counts_{0, 0};
  std::array<std::array<std::array<int, 2>, 2>, kNumCovariates> margins_{};
  int failures_ = 0;
};

inline TrialState apply_assignment(TrialState state, const CovariateProfile& profile,
                                   TreatmentArm arm, std::optional<int> response) {
  state.apply(profile, arm, response);
  return state;
}

}  // namespace simlab
