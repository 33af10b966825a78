#include "simlab/restricted.hpp"

#include <string>

namespace simlab {

BlockState::BlockState(int block_size) : m_(block_size) {
  if (block_size <= 0 || block_size % 2 != 0)
    throw InvalidParameter("block size must be a positive even integer, got " + std::to_string(block_size));
}

double BlockState::probability_a() const {
  const int half = m_ / 2;
  return double(half - counts_[0]) / double(m_ - filled());
}

void BlockState::record(TreatmentArm arm) {
  if (count(arm) >= m_ / 2) throw InvalidInput("arm already full in the open block");
  ++counts_[index_of(arm)];
  if (filled() == m_) counts_ = {0, 0};
}

std::pair<TreatmentArm, BlockState> permuted_block_assign(BlockState block, RngStream& rng) {
  const TreatmentArm arm = rng.bernoulli(block.probability_a()) ? TreatmentArm::A : TreatmentArm::B;
  block.record(arm);
  return {arm, block};
}

}  // namespace simlab

namespace simlab {

TreatmentArm stratified_pbd_assign(std::vector<BlockState>& strata, int stratum_key, RngStream& rng) {
  if (stratum_key < 0 || static_cast<std::size_t>(stratum_key) >= strata.size())
    throw InvalidInput("stratum key out of range");
  auto& block = strata[static_cast<std::size_t>(stratum_key)];
  auto [arm, next] = permuted_block_assign(block, rng);
  block = next;
  return arm;
}

}  // namespace simlab
