#include "srpo/explore.hpp"

#include <algorithm>
#include <future>
#include <set>

#include "json_io.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/version.hpp"

namespace srpo {

using jsonio::json;

void ExploreConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("explore.temperature: must be positive");
  if (branch_budget < 2) throw ConfigError("explore.branch_budget: must be >= 2");
  if (max_len < 0) throw ConfigError("explore.max_len: must be >= 0");
  if (prompt_examples < 0) throw ConfigError("explore.prompt_examples: must be >= 0");
}

std::string pair_outcome_to_string(PairOutcomeKind k) {
  switch (k) {
    case PairOutcomeKind::found_both:
      return "found-both";
    case PairOutcomeKind::only_positive:
      return "only-positive";
    case PairOutcomeKind::only_negative:
      return "only-negative";
    case PairOutcomeKind::none:
      return "none";
  }
  throw DataError("bad pair outcome");
}

PairOutcomeKind pair_outcome_from_string(const std::string& text) {
  if (text == "found-both") return PairOutcomeKind::found_both;
  if (text == "only-positive") return PairOutcomeKind::only_positive;
  if (text == "only-negative") return PairOutcomeKind::only_negative;
  if (text == "none") return PairOutcomeKind::none;
  throw DataError("unknown pair outcome: " + text);
}

std::size_t ExplorationCorpus::total_pairs() const {
  std::size_t n = 0;
  for (const CorpusEntry& e : entries) n += e.pairs.size();
  return n;
}

ReasoningPath generate_backbone(const PolicyModel& model, const Question& q, const PromptContext& prompt_ctx,
                                const ExploreConfig& cfg, Rng& rng) {
  cfg.validate();
  for (const PromptExample& ex : prompt_ctx.examples) {
    if (ex.path.kind != PathKind::reference)
      throw DataError("prompt context example " + ex.question_id + " is not a reference path");
  }
  ReasoningPath longest;
  for (int attempt = 0; attempt < cfg.branch_budget; ++attempt) {
    ReasoningPath draw = sample_path(model, q, cfg.temperature, rng, cfg.max_len);
    if (draw.terminated()) return draw;
    if (draw.steps.size() >= longest.steps.size()) longest = std::move(draw);
  }
  longest.truncated = true;
  return longest;
}

ExpandResult expand_step(const PolicyModel& model, const Question& q, const Answer& truth,
                         const ReasoningPath& backbone, int i, const ExploreConfig& cfg, Rng& rng) {
  cfg.validate();
  if (i < 1 || static_cast<std::size_t>(i) > backbone.steps.size())
    throw DataError("expand_step: step index " + std::to_string(i) + " out of range (question " + q.id + ")");
  if (backbone.steps[static_cast<std::size_t>(i - 1)].is_terminal())
    throw DataError("expand_step: step index " + std::to_string(i) + " points at the terminal step (question " +
                    q.id + ")");

  Prefix prefix = path_prefix(backbone, i);
  std::optional<Continuation> positive;
  std::optional<Continuation> negative;
  std::set<std::string> seen;
  int draws = 0;

  while (draws < cfg.branch_budget && (!positive || !negative)) {
    ++draws;
    Continuation cont = sample_continuation(model, q, prefix.steps, cfg.temperature, rng, cfg.max_len);
    if (cont.truncated) continue;  // failed draw, still consumed budget
    if (cfg.dedup) {
      std::string key;
      for (const Step& s : cont.steps) key += step_to_string(s) + "|";
      if (!seen.insert(std::move(key)).second) continue;
    }
    const ReasoningPath whole = concat_path(prefix, cont, PathKind::sampled_backbone);
    if (verify(whole, truth) == 1) {
      if (cfg.judge_filter &&
          (judge_safe(q, whole, model.world) != 1 || judge_effective(q, whole, model.world) != 1))
        continue;  // verified but shortcut; not a usable positive
      if (!positive) positive = std::move(cont);
    } else if (!negative) {
      negative = std::move(cont);
    }
  }

  ExpandResult out;
  out.outcome.step_index = i;
  out.outcome.draws_used = draws;
  if (positive && negative) {
    out.outcome.outcome = PairOutcomeKind::found_both;
    ContrastivePair pair;
    pair.prefix = std::move(prefix);
    pair.positive = std::move(*positive);
    pair.negative = std::move(*negative);
    pair.step_index = i;
    out.pair = std::move(pair);
  } else if (positive) {
    out.outcome.outcome = PairOutcomeKind::only_positive;
  } else if (negative) {
    out.outcome.outcome = PairOutcomeKind::only_negative;
  } else {
    out.outcome.outcome = PairOutcomeKind::none;
  }
  return out;
}

std::vector<ContrastivePair> build_pairs(const PolicyModel& model, const Question& q, const Answer& truth,
                                         const ReasoningPath& backbone, const ExploreConfig& cfg, Rng& rng,
                                         std::vector<StepOutcome>& outcomes) {
  if (!backbone.terminated()) throw DataError("build_pairs: backbone not terminated (question " + q.id + ")");
  std::vector<ContrastivePair> pairs;
  outcomes.clear();
  for (int i = 1; i < static_cast<int>(backbone.steps.size()); ++i) {
    ExpandResult r = expand_step(model, q, truth, backbone, i, cfg, rng);
    outcomes.push_back(r.outcome);
    if (r.pair) pairs.push_back(std::move(*r.pair));
  }
  return pairs;
}

namespace {

CorpusEntry explore_one(const PolicyModel& model, const TagRecord& rec, const ExploreConfig& cfg,
                        const PromptContext& prompt_ctx, std::uint64_t seed) {
  Rng rng(derive_seed(seed, rec.question.id, 0));
  CorpusEntry entry;
  entry.question = rec.question;
  entry.truth = rec.answer;
  entry.backbone = generate_backbone(model, rec.question, prompt_ctx, cfg, rng);
  if (!entry.backbone.terminated()) {
    entry.skipped_reason = "backbone-truncated";
    return entry;
  }
  entry.pairs = build_pairs(model, rec.question, rec.answer, entry.backbone, cfg, rng, entry.outcomes);
  return entry;
}

}  // namespace

ExplorationCorpus explore_dataset(const PolicyModel& model, const Dataset& dataset, const ExploreConfig& cfg,
                                  std::uint64_t seed, int workers, CorpusReport* report) {
  cfg.validate();
  if (dataset.records.empty()) throw DataError("explore_dataset: dataset is empty");

  PromptContext prompt_ctx;
  for (int i = 0; i < cfg.prompt_examples && i < static_cast<int>(dataset.records.size()); ++i)
    prompt_ctx.examples.push_back(
        PromptExample{dataset.records[static_cast<std::size_t>(i)].question.id,
                      dataset.records[static_cast<std::size_t>(i)].reasoning});

  ExplorationCorpus corpus;
  corpus.world = dataset.world;
  corpus.entries.resize(dataset.records.size());
  const std::size_t n = dataset.records.size();
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      corpus.entries[i] = explore_one(model, dataset.records[i], cfg, prompt_ctx, seed);
  } else {
    // Per-question seeds make entries independent; merge order is by index
    // so the corpus is identical for any worker count.
    std::vector<std::future<void>> futs;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
      futs.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
          corpus.entries[i] = explore_one(model, dataset.records[i], cfg, prompt_ctx, seed);
      }));
    }
    for (auto& f : futs) f.get();
  }

  if (report) *report = make_corpus_report(corpus);
  return corpus;
}

CorpusReport make_corpus_report(const ExplorationCorpus& corpus) {
  CorpusReport r;
  r.questions = corpus.entries.size();
  for (const CorpusEntry& e : corpus.entries) {
    if (e.skipped_reason) ++r.truncated_backbones;
    r.pairs += e.pairs.size();
    ++r.pairs_per_question_histogram[static_cast<int>(e.pairs.size())];
    for (const StepOutcome& o : e.outcomes) ++r.outcome_counts[pair_outcome_to_string(o.outcome)];
  }
  return r;
}

std::string CorpusReport::to_json_text() const {
  json hist = json::object();
  for (const auto& [pairs_n, questions_n] : pairs_per_question_histogram)
    hist[std::to_string(pairs_n)] = questions_n;
  json j{
      {"questions", questions},
      {"pairs", pairs},
      {"truncated_backbones", truncated_backbones},
      {"outcome_counts", outcome_counts},
      {"pairs_per_question", std::move(hist)},
  };
  return j.dump(2) + "\n";
}

void save_corpus(const ExplorationCorpus& corpus, const std::filesystem::path& path) {
  std::string out;
  json header{{"schema", kCorpusSchemaName}, {"version", kCorpusSchemaVersion}};
  out += header.dump() + "\n";
  for (const CorpusEntry& e : corpus.entries) {
    json pairs = json::array();
    for (const ContrastivePair& p : e.pairs) {
      pairs.push_back(json{{"step_index", p.step_index},
                           {"prefix", jsonio::steps_to_json(p.prefix.steps)},
                           {"positive", jsonio::steps_to_json(p.positive.steps)},
                           {"negative", jsonio::steps_to_json(p.negative.steps)}});
    }
    json outcomes = json::array();
    for (const StepOutcome& o : e.outcomes)
      outcomes.push_back(json{{"step_index", o.step_index},
                              {"outcome", pair_outcome_to_string(o.outcome)},
                              {"draws", o.draws_used}});
    json rec{{"question_id", e.question.id},
             {"backbone", jsonio::path_to_json(e.backbone)},
             {"pairs", std::move(pairs)},
             {"outcomes", std::move(outcomes)}};
    if (e.skipped_reason) rec["skipped"] = *e.skipped_reason;
    out += rec.dump() + "\n";
  }
  write_file(path, out);
}

ExplorationCorpus load_corpus(const std::filesystem::path& path, const Dataset& dataset) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError("corpus file is empty: " + path.string());
  const json header = jsonio::parse_or_data_error(lines[0], path.string());
  if (header.value("schema", "") != kCorpusSchemaName)
    throw DataError("not a corpus file (schema field mismatch): " + path.string());
  if (header.value("version", -1) != kCorpusSchemaVersion)
    throw DataError("corpus schema version unsupported: " + path.string());

  ExplorationCorpus corpus;
  corpus.world = dataset.world;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const json j = jsonio::parse_or_data_error(lines[li], path.string());
    CorpusEntry e;
    const std::string qid = j.at("question_id").get<std::string>();
    const TagRecord* rec = dataset.find(qid);
    if (!rec) throw DataError("corpus question " + qid + " not present in dataset");
    e.question = rec->question;
    e.truth = rec->answer;
    e.backbone = jsonio::path_from_json(j.at("backbone"));
    if (j.contains("skipped")) e.skipped_reason = j.at("skipped").get<std::string>();

    for (const auto& pj : j.at("pairs")) {
      ContrastivePair p;
      p.step_index = pj.at("step_index").get<int>();
      p.prefix.question_id = qid;
      p.prefix.steps = jsonio::steps_from_json(pj.at("prefix"));
      p.positive.steps = jsonio::steps_from_json(pj.at("positive"));
      p.negative.steps = jsonio::steps_from_json(pj.at("negative"));

      // Re-verification: polarities and prefix-sharing are not trusted
      // from disk.
      if (p.step_index < 1 || p.prefix.steps.size() != static_cast<std::size_t>(p.step_index - 1))
        throw DataError("corpus pair at " + qid + " step " + std::to_string(p.step_index) + ": bad prefix length");
      for (std::size_t k = 0; k < p.prefix.steps.size(); ++k) {
        if (!(p.prefix.steps[k] == e.backbone.steps[k]))
          throw DataError("corpus pair at " + qid + " step " + std::to_string(p.step_index) +
                          ": prefix diverges from backbone");
      }
      if (verify(concat_path(p.prefix, p.positive, PathKind::positive), e.truth) != 1)
        throw DataError("corpus pair at " + qid + " step " + std::to_string(p.step_index) +
                        ": stored positive fails verification");
      if (verify(concat_path(p.prefix, p.negative, PathKind::negative), e.truth) != 0)
        throw DataError("corpus pair at " + qid + " step " + std::to_string(p.step_index) +
                        ": stored negative verifies as correct");
      e.pairs.push_back(std::move(p));
    }
    for (int k = 1; k < static_cast<int>(e.pairs.size()); ++k)
      if (e.pairs[static_cast<std::size_t>(k)].step_index <= e.pairs[static_cast<std::size_t>(k - 1)].step_index)
        throw DataError("corpus pairs at " + qid + ": step indices not strictly increasing");

    for (const auto& oj : j.at("outcomes"))
      e.outcomes.push_back(StepOutcome{oj.at("step_index").get<int>(),
                                       pair_outcome_from_string(oj.at("outcome").get<std::string>()),
                                       oj.at("draws").get<int>()});
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

}  // namespace srpo
