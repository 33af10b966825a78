#include "simlab/trial.hpp"

#include <cmath>
#include <string>

#include "simlab/error.hpp"

namespace simlab {

void CovariateProfile::validate() const {
  if (gender != 0 && gender != 1)
    throw InvalidInput("gender must be 0 or 1, got " + std::to_string(gender));
  if (age < 30 || age > 75) throw InvalidInput("age outside [30,75]: " + std::to_string(age));
  if (!std::isfinite(cholesterol)) throw InvalidInput("cholesterol is not finite");
}

void TrialState::count(const PatientRecord& r, int sign) {
  arm_counts_[index_of(r.arm)] += sign;
  auto lv = discretizer_.levels(r.profile);
  for (std::size_t i = 0; i < kNumCovariates; ++i)
    margins_[i][static_cast<std::size_t>(lv[i])][index_of(r.arm)] += sign;
  if (r.response && *r.response == 0) failures_ += sign;
}

void TrialState::apply(const CovariateProfile& profile, TreatmentArm arm,
                       std::optional<int> response) {
  if (response && *response != 0 && *response != 1)
    throw InvalidInput("response must be 0 or 1");
  PatientRecord r{records_.size() + 1, profile, arm, response};
  count(r, +1);
  records_.push_back(r);
}

void TrialState::set_response(std::size_t index, int response) {
  if (index == 0 || index > records_.size()) throw InvalidInput("no patient with that index");
  if (response != 0 && response != 1) throw InvalidInput("response must be 0 or 1");
  auto& r = records_[index - 1];
  if (r.response && *r.response == 0) --failures_;
  r.response = response;
  if (response == 0) ++failures_;
}

TrialState TrialState::recount() const {
  TrialState fresh(discretizer_);
  for (const auto& r : records_) fresh.apply(r.profile, r.arm, r.response);
  return fresh;
}

bool TrialState::counts_equal(const TrialState& other) const {
  return arm_counts_ == other.arm_counts_ && margins_ == other.margins_ &&
         failures_ == other.failures_;
}

}  // namespace simlab
