#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srpo/dataset.hpp"
#include "srpo/model.hpp"
#include "srpo/path.hpp"

namespace srpo {

struct ExploreConfig {
  double temperature = 0.5;
  int branch_budget = 16;  // max draws per step and per backbone attempt
  int max_len = 0;         // 0: the world's max_path_len
  bool dedup = true;
  int prompt_examples = 0;  // m, size of the prompt context
  // Extension, off by default: positives must additionally pass both
  // judges, so evidence-free shortcut continuations are not reinforced.
  // The default classifier is the answer-level verifier alone.
  bool judge_filter = false;

  void validate() const;
};

enum class PairOutcomeKind : std::uint8_t { found_both, only_positive, only_negative, none };

std::string pair_outcome_to_string(PairOutcomeKind k);
PairOutcomeKind pair_outcome_from_string(const std::string& text);

struct StepOutcome {
  int step_index = 0;
  PairOutcomeKind outcome = PairOutcomeKind::none;
  int draws_used = 0;
};

struct CorpusEntry {
  Question question;
  Answer truth;
  ReasoningPath backbone;
  std::vector<ContrastivePair> pairs;   // step indices strictly increasing
  std::vector<StepOutcome> outcomes;    // one per expandable step
  std::optional<std::string> skipped_reason;
};

struct ExplorationCorpus {
  WorldConfig world;
  std::vector<CorpusEntry> entries;

  std::size_t total_pairs() const;
};

struct CorpusReport {
  std::uint64_t questions = 0;
  std::uint64_t pairs = 0;
  std::uint64_t truncated_backbones = 0;
  std::map<std::string, std::uint64_t> outcome_counts;
  std::map<int, std::uint64_t> pairs_per_question_histogram;

  std::string to_json_text() const;
};

// Eq. 2: one sampled backbone. Retries up to branch_budget draws when the
// draw truncates; returns the first terminated draw, otherwise the longest
// truncated one. The prompt context is the D_c seam; with the parametric
// scorer its examples act through warm-start training, not through here.
ReasoningPath generate_backbone(const PolicyModel& model, const Question& q, const PromptContext& prompt_ctx,
                                const ExploreConfig& cfg, Rng& rng);

struct ExpandResult {
  std::optional<ContrastivePair> pair;
  StepOutcome outcome;
};

// Draws continuations of the backbone prefix at step i until one verifies 1
// and one verifies 0, or the budget runs out. Duplicates are discarded when
// dedup is on and still count against the budget.
ExpandResult expand_step(const PolicyModel& model, const Question& q, const Answer& truth,
                         const ReasoningPath& backbone, int i, const ExploreConfig& cfg, Rng& rng);

// expand_step over i = 1..T-1; complete pairs only, outcomes for every step.
std::vector<ContrastivePair> build_pairs(const PolicyModel& model, const Question& q, const Answer& truth,
                                         const ReasoningPath& backbone, const ExploreConfig& cfg, Rng& rng,
                                         std::vector<StepOutcome>& outcomes);

// Whole-dataset exploration; per-question streams derived from (seed,
// question id) so sharding cannot change the corpus.
ExplorationCorpus explore_dataset(const PolicyModel& model, const Dataset& dataset, const ExploreConfig& cfg,
                                  std::uint64_t seed, int workers = 1, CorpusReport* report = nullptr);

void save_corpus(const ExplorationCorpus& corpus, const std::filesystem::path& path);

// Loads and re-verifies: stored polarities are re-checked with the verifier
// and stored prefixes must match the backbone token-for-token; disk
// corruption must not silently flip a training signal.
ExplorationCorpus load_corpus(const std::filesystem::path& path, const Dataset& dataset);

CorpusReport make_corpus_report(const ExplorationCorpus& corpus);

}  // namespace srpo
