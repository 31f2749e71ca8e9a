#include "srpo/features.hpp"

#include <algorithm>

#include "srpo/errors.hpp"

namespace srpo {

FeatureLayout::FeatureLayout(const WorldConfig& cfg)
    : num_entities_(cfg.num_entities), modulus_(cfg.value_modulus), n_max_(cfg.facts_max) {
  pair_base_ = 2;
  fact_base_ = pair_base_ + num_entities_ * (num_entities_ - 1) / 2;
  count_base_ = fact_base_ + num_entities_ * modulus_;
  sum_base_ = count_base_ + n_max_ + 1;
  size_ = sum_base_ + modulus_;
}

int FeatureLayout::kind_feature(InstructionKind kind) const {
  return kind == InstructionKind::report_sum ? 0 : 1;
}

int FeatureLayout::pair_feature(int a, int b) const {
  if (a == b || a < 0 || b < 0 || a >= num_entities_ || b >= num_entities_)
    throw DataError("pair_feature: bad pair (" + std::to_string(a) + ", " + std::to_string(b) + ")");
  const int lo = std::min(a, b);
  const int hi = std::max(a, b);
  // Row-major index of the strictly-upper-triangular pair (lo, hi).
  return pair_base_ + lo * (2 * num_entities_ - lo - 1) / 2 + (hi - lo - 1);
}

int FeatureLayout::fact_feature(int entity, int value) const {
  if (entity < 0 || entity >= num_entities_ || value < 0 || value >= modulus_)
    throw DataError("fact_feature: out of range (" + std::to_string(entity) + ", " + std::to_string(value) + ")");
  return fact_base_ + entity * modulus_ + value;
}

int FeatureLayout::count_feature(int n) const {
  if (n < 0 || n > n_max_) throw DataError("count_feature: out of range " + std::to_string(n));
  return count_base_ + n;
}

int FeatureLayout::sum_feature(int residue) const {
  if (residue < 0 || residue >= modulus_) throw DataError("sum_feature: out of range " + std::to_string(residue));
  return sum_base_ + residue;
}

std::vector<int> question_features(const Question& q, const FeatureLayout& layout) {
  std::vector<int> ids;
  ids.push_back(layout.kind_feature(q.instruction.kind));
  if (q.instruction.is_mix()) ids.push_back(layout.pair_feature(q.instruction.mix_a, q.instruction.mix_b));
  int sum = 0;
  for (const Fact& f : q.facts) {
    ids.push_back(layout.fact_feature(f.entity, f.value));
    sum += f.value;
  }
  ids.push_back(layout.count_feature(q.num_facts()));
  ids.push_back(layout.sum_feature(sum % layout.modulus()));
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace srpo
