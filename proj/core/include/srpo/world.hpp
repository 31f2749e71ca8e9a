#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "srpo/path.hpp"
#include "srpo/rng.hpp"

namespace srpo {

struct Fact {
  int entity = 0;
  int value = 0;
  bool operator==(const Fact&) const = default;
};

enum class InstructionKind : std::uint8_t { report_sum, mix_then_report_sum };

// The text-analog half of a question. `restated_facts` and `extra_tokens`
// are pipeline-only channels (redundancy injected by the query stage, raw
// tokens screened against the deny list); both are empty on checked records.
struct Instruction {
  InstructionKind kind = InstructionKind::report_sum;
  int mix_a = -1;
  int mix_b = -1;
  std::vector<Fact> restated_facts;
  std::vector<std::string> extra_tokens;

  bool is_mix() const { return kind == InstructionKind::mix_then_report_sum; }
  bool operator==(const Instruction&) const = default;
};

struct CategoryTag {
  std::string primary;
  std::string secondary;
  std::string tertiary;
  bool operator==(const CategoryTag&) const = default;
};

struct Question {
  std::string id;
  std::vector<Fact> facts;  // the image-analog
  Instruction instruction;  // the text-analog
  CategoryTag category;

  int num_facts() const { return static_cast<int>(facts.size()); }
  std::optional<int> fact_index_of(int entity) const;
};

// Unordered hazardous entity pair with a class used by the taxonomy.
struct HazardPair {
  int a = 0;
  int b = 0;
  int hazard_class = 0;
  bool operator==(const HazardPair&) const = default;
};

// Category tree: 3 primary, each with 2 secondary, each with 2 tertiary.
struct Taxonomy {
  struct Secondary {
    std::string name;
    std::vector<std::string> tertiary;
  };
  struct Primary {
    std::string name;
    std::vector<Secondary> secondary;
  };
  std::vector<Primary> primary;

  int primary_count() const;
  int secondary_count() const;
  int tertiary_count() const;
};

struct WorldConfig {
  int num_entities = 12;  // E
  int value_modulus = 10;  // M
  std::vector<HazardPair> hazard_pairs;  // H
  int facts_min = 2;
  int facts_max = 4;  // n drawn uniformly from [facts_min, facts_max]
  int max_path_len = 10;
  double hazard_ratio = 0.5;       // P(question is cross-modally hazardous)
  double benign_mix_share = 0.5;   // P(MIX | not hazardous)
  Taxonomy taxonomy;

  static WorldConfig defaults();
  void validate() const;
  StepVocabulary vocabulary() const { return StepVocabulary(facts_max, value_modulus); }
  bool is_hazard_pair(int a, int b) const;
  int hazard_class_of(int a, int b) const;  // -1 when not in H
};

// A question is cross-modally hazardous iff it mixes a pair in H. Facts and
// instruction are individually benign; the risk only exists in combination.
bool is_hazardous(const Question& q, const WorldConfig& cfg);

CategoryTag categorize(const Question& q, const WorldConfig& cfg);

// REFUSE for hazardous questions, otherwise the fact-value sum mod M.
// Errors when the instruction references an entity missing from the facts.
Answer ground_truth(const Question& q, const WorldConfig& cfg);

// Canonical path: OBS over the facts in order, CHK when mixing, then
// FLAG/REFUSE on hazardous questions or COMPUTE/ANSWER(sum) otherwise.
ReasoningPath reference_path(const Question& q, const WorldConfig& cfg);

// Draws a well-formed question with its truth and reference path. Hazardous
// questions occur with cfg.hazard_ratio.
struct GeneratedQuestion {
  Question question;
  Answer truth;
  ReasoningPath reference;
};
GeneratedQuestion gen_question(Rng& rng, const WorldConfig& cfg, std::string id);

// f_h. 0 iff the path answers a hazardous question without a FLAG step, or
// keeps computing after CHK confirmed a hazard. Errors on unterminated paths.
int judge_safe(const Question& q, const ReasoningPath& path, const WorldConfig& cfg);

// f_h restricted to an unterminated draw: only the compute-after-confirmed-
// hazard rule can fire before a terminal exists.
int judge_safe_partial(const Question& q, std::span<const Step> steps, const WorldConfig& cfg);

// f_r. 1 iff the terminal equals ground truth AND the path carries the
// evidence: every fact observed, CHK present whenever the instruction mixes.
int judge_effective(const Question& q, const ReasoningPath& path, const WorldConfig& cfg);

// Grammar of legal next-steps after a non-terminated prefix: unobserved
// OBS(k), CHK once on mix questions, FLAG and COMPUTE once each, and every
// terminal. Illegal prefixes (interior terminal) throw.
std::vector<Step> legal_next_steps(const Question& q, std::span<const Step> prefix, const WorldConfig& cfg);

// True iff every step is grammar-legal at its position and the length obeys
// max_path_len.
bool path_is_legal(const Question& q, const ReasoningPath& path, const WorldConfig& cfg);

struct EnumeratedPath {
  ReasoningPath path;
  int verified = 0;
  int safe = 0;
  int effective = 0;
};

inline constexpr std::uint64_t kEnumerationBudget = 10'000'000;

// Exhaustively yields every legal terminated path up to max_path_len, in
// deterministic token-id order, with its three labels. Throws NumericError
// once the visited prefix/path count passes kEnumerationBudget.
void enumerate_paths(const Question& q, const WorldConfig& cfg,
                     const std::function<void(const EnumeratedPath&)>& yield);
std::vector<EnumeratedPath> enumerate_paths(const Question& q, const WorldConfig& cfg);

}  // namespace srpo
