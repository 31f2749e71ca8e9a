#pragma once

// Shared fixtures and oracles for the test suites.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "srpo/model.hpp"
#include "srpo/world.hpp"

namespace srpo::testing {

// E=6, M=5, 2..3 facts: big enough to exercise every branch, small enough
// that exhaustive enumeration stays instant.
inline WorldConfig tiny_world() {
  WorldConfig cfg = WorldConfig::defaults();
  cfg.num_entities = 6;
  cfg.value_modulus = 5;
  cfg.facts_min = 2;
  cfg.facts_max = 3;
  cfg.max_path_len = 8;
  cfg.hazard_pairs = {{0, 1, 0}, {2, 3, 1}, {4, 5, 0}};
  return cfg;
}

// Smallest useful world: always 2 facts, M=3.
inline WorldConfig micro_world() {
  WorldConfig cfg = WorldConfig::defaults();
  cfg.num_entities = 4;
  cfg.value_modulus = 3;
  cfg.facts_min = 2;
  cfg.facts_max = 2;
  cfg.max_path_len = 7;
  cfg.hazard_pairs = {{0, 1, 0}, {2, 3, 1}};
  return cfg;
}

inline Question finalize(Question q, const WorldConfig& cfg) {
  q.category = categorize(q, cfg);
  return q;
}

inline Question mix_question(const WorldConfig& cfg, std::string id, std::vector<Fact> facts, int a, int b) {
  Question q;
  q.id = std::move(id);
  q.facts = std::move(facts);
  q.instruction.kind = InstructionKind::mix_then_report_sum;
  q.instruction.mix_a = a;
  q.instruction.mix_b = b;
  return finalize(std::move(q), cfg);
}

inline Question sum_question(const WorldConfig& cfg, std::string id, std::vector<Fact> facts) {
  Question q;
  q.id = std::move(id);
  q.facts = std::move(facts);
  q.instruction.kind = InstructionKind::report_sum;
  return finalize(std::move(q), cfg);
}

// Init model with parameters kicked away from the symmetric zero point.
inline PolicyModel randomized_model(const WorldConfig& world, const ModelConfig& cfg, std::uint64_t seed,
                                    double spread = 0.4) {
  PolicyModel m = init_model(world, cfg, seed);
  Rng rng(derive_seed(seed, "test-randomize", 0));
  for (auto view : param_views(m))
    for (double& w : *view.data) w += rng.symmetric(spread);
  return m;
}

inline ReasoningPath make_path(std::string qid, PathKind kind, std::vector<Step> steps) {
  ReasoningPath p;
  p.question_id = std::move(qid);
  p.kind = kind;
  p.steps = std::move(steps);
  return p;
}

// Regularized upper incomplete gamma Q(a, x) by series / continued
// fraction; standard scalar implementation good to ~1e-10.
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) return std::nan("");
  if (x == 0.0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    // lower series, then complement
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
    }
    const double p = sum * std::exp(-x + a * std::log(x) - gln);
    return 1.0 - p;
  }
  // continued fraction (Lentz)
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-14) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

// p-value of a chi-square statistic with dof degrees of freedom.
inline double chi_square_pvalue(double stat, int dof) { return gamma_q(dof / 2.0, stat / 2.0); }

// Unique scratch directory under the ctest working dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto dir = std::filesystem::temp_directory_path() /
                   ("srpo-test-" + tag + "-" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace srpo::testing
