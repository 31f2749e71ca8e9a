#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace srpo {

// Final answer to a question: either a value in [0, modulus) or a refusal.
class Answer {
 public:
  Answer() = default;
  static Answer refusal() { return Answer(-1); }
  static Answer of(int value) { return Answer(value); }

  bool is_refusal() const { return value_ < 0; }
  int value() const { return value_; }

  bool operator==(const Answer&) const = default;

 private:
  explicit Answer(int value) : value_(value) {}
  int value_ = -1;
};

// Step symbols. OBS observes the k-th fact of the question, CHK checks the
// instruction's mix pair, ANSWER and REFUSE are the terminal symbols that
// carry the answer payload.
enum class StepKind : std::uint8_t { obs, chk, flag, compute, answer, refuse };

struct Step {
  StepKind kind = StepKind::obs;
  int arg = 0;  // obs: fact index; answer: value; unused otherwise

  bool is_terminal() const { return kind == StepKind::answer || kind == StepKind::refuse; }

  // Present iff the step is terminal.
  std::optional<Answer> payload() const {
    if (kind == StepKind::answer) return Answer::of(arg);
    if (kind == StepKind::refuse) return Answer::refusal();
    return std::nullopt;
  }

  bool operator==(const Step&) const = default;
};

inline Step obs(int fact_index) { return Step{StepKind::obs, fact_index}; }
inline Step chk() { return Step{StepKind::chk, 0}; }
inline Step flag() { return Step{StepKind::flag, 0}; }
inline Step compute() { return Step{StepKind::compute, 0}; }
inline Step answer(int value) { return Step{StepKind::answer, value}; }
inline Step refuse() { return Step{StepKind::refuse, 0}; }

// "OBS(2)", "CHK", "ANSWER(7)", ... and back.
std::string step_to_string(const Step& s);
Step step_from_string(const std::string& text);

// Dense token <-> id mapping for a world with n_max observable facts and
// answers modulo `modulus`. Layout: OBS(0..n_max-1), CHK, FLAG, COMPUTE,
// ANSWER(0..modulus-1), REFUSE.
class StepVocabulary {
 public:
  StepVocabulary(int n_max, int modulus);

  int size() const { return n_max_ + modulus_ + 4; }
  int id(const Step& s) const;
  Step step(int id) const;

  int n_max() const { return n_max_; }
  int modulus() const { return modulus_; }

 private:
  int n_max_;
  int modulus_;
};

// Role of a path in the data flow: the dataset's ground-truth path, a
// sampled backbone, or one side of a contrastive pair. Losses gate on it.
enum class PathKind : std::uint8_t { reference, sampled_backbone, positive, negative };

std::string path_kind_to_string(PathKind k);
PathKind path_kind_from_string(const std::string& text);

struct ReasoningPath {
  std::string question_id;
  PathKind kind = PathKind::reference;
  std::vector<Step> steps;
  bool truncated = false;  // sampler hit max_len before a terminal

  bool terminated() const { return !steps.empty() && steps.back().is_terminal(); }
  std::size_t length() const { return steps.size(); }
};

// Suffix of a path from some step to a terminal. `truncated` marks a failed
// draw that never reached a terminal; such continuations never enter pairs.
struct Continuation {
  std::vector<Step> steps;
  bool truncated = false;
};

// The question-anchored prefix tau_{1:i-1}. Zero steps is the question-only
// root, which every likelihood and sampling operation accepts.
struct Prefix {
  std::string question_id;
  std::vector<Step> steps;

  bool is_root() const { return steps.empty(); }
};

// (tau_i^+, tau_i^-): two continuations of the same prefix, verified 1 and 0.
struct ContrastivePair {
  Prefix prefix;
  Continuation positive;
  Continuation negative;
  int step_index = 1;  // i >= 1; prefix holds exactly i-1 steps
};

// Throws DataError when a stored path breaks its invariants: empty, an
// interior terminal, or longer than max_len (0 disables the length check).
void validate_path(const ReasoningPath& path, std::size_t max_len = 0);
void validate_continuation(const Continuation& cont);

// prefix (+) cont. Rejects an empty or already-terminated prefix.
ReasoningPath concat_path(const ReasoningPath& prefix, const Continuation& cont, PathKind kind);
// Root-friendly variant used by exploration and the losses.
ReasoningPath concat_path(const Prefix& prefix, const Continuation& cont, PathKind kind);

// Eq. 3: 1 iff the terminal payload equals truth. Error on unterminated
// paths; that is distinct from 0, which means terminated-but-wrong.
int verify(const ReasoningPath& path, const Answer& truth);

// tau_{1:i-1}: the first i-1 steps; i = 1 yields the root prefix.
Prefix path_prefix(const ReasoningPath& path, int i);

// Remaining steps v_i..v_T, the counterpart of path_prefix.
Continuation path_suffix(const ReasoningPath& path, int i);

// m ground-truth examples (D_c). Paths must be kind=reference; verification
// against each question's truth happens where the questions are available.
struct PromptExample {
  std::string question_id;
  ReasoningPath path;
};

struct PromptContext {
  std::vector<PromptExample> examples;
  std::size_t size() const { return examples.size(); }
};

// Line format shared by dataset and corpus files:
//   {"question_id": ..., "kind": ..., "steps": ["OBS(0)", ...], "truncated"?}
std::string path_to_json(const ReasoningPath& path);
ReasoningPath path_from_json(const std::string& json_text);

}  // namespace srpo
