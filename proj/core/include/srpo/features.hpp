#pragma once

#include <vector>

#include "srpo/world.hpp"

namespace srpo {

// Question featurization: a bag of discrete feature ids over the fact
// multiset (per-fact buckets, scene size, value-sum residue) and the
// instruction (kind, mix pair). Layout is a pure function of the world
// dimensions, so models and checkpoints can validate against it.
class FeatureLayout {
 public:
  explicit FeatureLayout(const WorldConfig& cfg);

  int size() const { return size_; }

  int kind_feature(InstructionKind kind) const;
  int pair_feature(int a, int b) const;          // unordered, entities in-world
  int fact_feature(int entity, int value) const;
  int count_feature(int n) const;                // number of facts
  int sum_feature(int residue) const;            // sum of values mod M

  int num_entities() const { return num_entities_; }
  int modulus() const { return modulus_; }
  int n_max() const { return n_max_; }

 private:
  int num_entities_;
  int modulus_;
  int n_max_;
  int pair_base_;
  int fact_base_;
  int count_base_;
  int sum_base_;
  int size_;
};

// Active feature ids for a question, sorted and unique.
std::vector<int> question_features(const Question& q, const FeatureLayout& layout);

}  // namespace srpo
