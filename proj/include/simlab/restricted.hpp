#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "simlab/error.hpp"
#include "simlab/rng.hpp"
#include "simlab/trial.hpp"

namespace simlab {

// Restricted randomization: allocation rules that ignore covariates.
// Every function returns the probability that the next patient goes to A.

template <typename Scalar = double>
constexpr Scalar crd_probability() {
  return Scalar(0.5);
}

// Efron's biased coin on the signed imbalance N_A - N_B.
template <typename Scalar>
Scalar efron_probability(int imbalance, Scalar p) {
  if (!(p >= Scalar(0.5) && p <= Scalar(1))) throw InvalidParameter("biasing probability p must lie in [1/2, 1]");
  if (imbalance == 0) return Scalar(0.5);
  return imbalance < 0 ? p : Scalar(1) - p;
}

// Smith's power rule n_B^rho / (n_A^rho + n_B^rho); 1/2 at (0,0).
template <typename Scalar>
Scalar smith_probability(int n_a, int n_b, Scalar rho) {
  using std::pow;
  if (!(rho >= Scalar(0))) throw InvalidParameter("Smith exponent rho must be >= 0");
  if (n_a < 0 || n_b < 0) throw InvalidInput("arm counts must be nonnegative");
  if (n_a == n_b) return Scalar(0.5);
  const Scalar a = pow(Scalar(n_a), rho);
  const Scalar b = pow(Scalar(n_b), rho);
  return b / (a + b);
}

struct SmithRule {
  double rho = 2.0;
};

// Open permuted block of even size m. Counts reset when the block fills.
class BlockState {
 public:
  explicit BlockState(int block_size = 10);

  int block_size() const { return m_; }
  int count(TreatmentArm arm) const { return counts_[index_of(arm)]; }
  int filled() const { return counts_[0] + counts_[1]; }

  // Remaining A slots over remaining slots.
  double probability_a() const;
  void record(TreatmentArm arm);

 private:
  int m_;
  std::array<int, 2> counts_{0, 0};
};

// Draws uniformly among the open block's remaining slots (one uniform).
std::pair<TreatmentArm, BlockState> permuted_block_assign(BlockState block, RngStream& rng);

}  // namespace simlab

namespace simlab {

// One permuted block per stratum; final blocks may stay unfilled.
TreatmentArm stratified_pbd_assign(std::vector<BlockState>& strata, int stratum_key, RngStream& rng);

}  // namespace simlab
