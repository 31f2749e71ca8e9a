#include "srpo/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "json_io.hpp"
#include "srpo/errors.hpp"

namespace srpo {

using jsonio::json;

const std::vector<std::string> kFlagBypassMarkers = {"BYPASS_FLAG", "SKIP_CHECK"};

std::string stage_to_string(Stage s) {
  switch (s) {
    case Stage::queried:
      return "queried";
    case Stage::reasoned:
      return "reasoned";
    case Stage::reflected:
      return "reflected";
    case Stage::checked:
      return "checked";
    case Stage::summarized:
      return "summarized";
  }
  throw DataError("bad stage");
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.deny_list = kFlagBypassMarkers;
  return cfg;
}

void PipelineConfig::validate() const {
  for (double r : {redundancy_rate, missing_fact_rate, unknown_entity_rate, deny_token_rate})
    if (r < 0.0 || r > 1.0) throw ConfigError("pipeline rates must lie in [0, 1]");
  if (redundancy_rate + missing_fact_rate + unknown_entity_rate + deny_token_rate > 1.0)
    throw ConfigError("pipeline imperfection rates sum past 1");
}

namespace {

void require_stage(const CandidateRecord& c, Stage expected, const char* op) {
  if (c.stage != expected)
    throw DataError(std::string(op) + ": candidate " + c.id + " at stage " + stage_to_string(c.stage) +
                    ", expected " + stage_to_string(expected));
}

// Deterministic value for a fact supplemented during reflection.
int supplement_value(const std::string& candidate_id, int entity, int modulus) {
  const std::uint64_t h = fnv1a(candidate_id + "/" + std::to_string(entity));
  return static_cast<int>(h % static_cast<std::uint64_t>(modulus));
}

// Canonical path over the candidate's current facts. Unlike reference_path
// this tolerates a mixed entity that is still missing; reflection repairs
// the candidate and calls back in here.
ReasoningPath provisional_path(const CandidateRecord& c, const WorldConfig& world) {
  ReasoningPath path;
  path.question_id = c.id;
  path.kind = PathKind::reference;
  for (std::size_t k = 0; k < c.facts.size(); ++k) path.steps.push_back(obs(static_cast<int>(k)));
  if (c.instruction.is_mix()) path.steps.push_back(chk());
  const bool hazardous = c.instruction.is_mix() && world.is_hazard_pair(c.instruction.mix_a, c.instruction.mix_b);
  if (hazardous) {
    path.steps.push_back(flag());
    path.steps.push_back(refuse());
  } else {
    int sum = 0;
    for (const Fact& f : c.facts) sum += f.value;
    path.steps.push_back(compute());
    path.steps.push_back(answer(sum % world.value_modulus));
  }
  return path;
}

}  // namespace

CandidateRecord query_stage(Rng& rng, const WorldConfig& world, const PipelineConfig& cfg, std::string id) {
  GeneratedQuestion g = gen_question(rng, world, id);
  CandidateRecord c;
  c.id = std::move(id);
  c.facts = std::move(g.question.facts);
  c.instruction = std::move(g.question.instruction);
  c.stage = Stage::queried;

  const double u = rng.uniform();
  double lo = 0.0;
  if (u < (lo += cfg.redundancy_rate)) {
    const std::size_t k = rng.uniform_int(c.facts.size());
    c.instruction.restated_facts.push_back(c.facts[k]);
  } else if (u < (lo += cfg.missing_fact_rate)) {
    if (c.instruction.is_mix()) {
      std::erase_if(c.facts, [&](const Fact& f) { return f.entity == c.instruction.mix_b; });
    }
  } else if (u < (lo += cfg.unknown_entity_rate)) {
    if (c.instruction.is_mix()) {
      std::erase_if(c.facts, [&](const Fact& f) { return f.entity == c.instruction.mix_b; });
      c.instruction.mix_b = world.num_entities + static_cast<int>(rng.uniform_int(3));
    }
  } else if (u < lo + cfg.deny_token_rate) {
    c.instruction.extra_tokens.push_back(cfg.deny_list.empty()
                                             ? kFlagBypassMarkers[rng.uniform_int(kFlagBypassMarkers.size())]
                                             : cfg.deny_list[rng.uniform_int(cfg.deny_list.size())]);
  }
  return c;
}

ReasoningPath reasoning_stage(CandidateRecord& c, const WorldConfig& world) {
  require_stage(c, Stage::queried, "reasoning_stage");
  if (c.facts.empty()) throw DataError("reasoning_stage: candidate " + c.id + " has no facts");
  for (std::size_t i = 0; i < c.facts.size(); ++i)
    for (std::size_t j = i + 1; j < c.facts.size(); ++j)
      if (c.facts[i].entity == c.facts[j].entity)
        throw DataError("reasoning_stage: candidate " + c.id + " repeats entity " + std::to_string(c.facts[i].entity));
  ReasoningPath path = provisional_path(c, world);
  c.stage = Stage::reasoned;
  return path;
}

int redundancy_scan(const CandidateRecord& c) {
  int n = 0;
  for (const Fact& r : c.instruction.restated_facts)
    if (std::find(c.facts.begin(), c.facts.end(), r) != c.facts.end()) ++n;
  return n;
}

std::vector<int> completeness_scan(const CandidateRecord& c, const WorldConfig& world) {
  std::vector<int> missing;
  if (!c.instruction.is_mix()) return missing;
  for (int e : {c.instruction.mix_a, c.instruction.mix_b}) {
    if (e < 0 || e >= world.num_entities) continue;  // out-of-world: check_stage's problem
    bool present = false;
    for (const Fact& f : c.facts) present = present || f.entity == e;
    if (!present) missing.push_back(e);
  }
  return missing;
}

ReflectionOutcome reflect_stage(CandidateRecord& c, ReasoningPath& path, const WorldConfig& world) {
  require_stage(c, Stage::reasoned, "reflect_stage");
  ReflectionOutcome out;

  std::erase_if(c.instruction.restated_facts, [&](const Fact& r) {
    const bool dup = std::find(c.facts.begin(), c.facts.end(), r) != c.facts.end();
    if (dup) ++out.redundancy_stripped;
    return dup;
  });

  for (int e : completeness_scan(c, world)) {
    c.facts.push_back(Fact{e, supplement_value(c.id, e, world.value_modulus)});
    ++out.facts_supplemented;
  }

  if (out.redundancy_stripped > 0 || out.facts_supplemented > 0) path = provisional_path(c, world);
  c.stage = Stage::reflected;
  return out;
}

std::optional<std::string> check_stage(CandidateRecord& c, const WorldConfig& world, const PipelineConfig& cfg) {
  require_stage(c, Stage::reflected, "check_stage");
  for (const std::string& tok : c.instruction.extra_tokens) {
    if (std::find(cfg.deny_list.begin(), cfg.deny_list.end(), tok) != cfg.deny_list.end()) {
      c.rejection_reason = "unimodal-unsafe";
      return c.rejection_reason;
    }
  }
  if (c.instruction.is_mix()) {
    for (int e : {c.instruction.mix_a, c.instruction.mix_b}) {
      const bool in_world = e >= 0 && e < world.num_entities;
      bool in_facts = false;
      for (const Fact& f : c.facts) in_facts = in_facts || f.entity == e;
      if (!in_world || !in_facts) {
        c.rejection_reason = "invalid";
        return c.rejection_reason;
      }
    }
  }
  c.stage = Stage::checked;
  return std::nullopt;
}

TagRecord summary_stage(const CandidateRecord& c, const ReasoningPath& path, const WorldConfig& world) {
  require_stage(c, Stage::checked, "summary_stage");
  TagRecord rec;
  rec.question.id = c.id;
  rec.question.facts = c.facts;
  rec.question.instruction = c.instruction;
  rec.question.category = categorize(rec.question, world);
  rec.answer = ground_truth(rec.question, world);
  rec.reasoning = path;
  if (verify(path, rec.answer) != 1)
    throw DataError("summary_stage: pipeline integrity breach, path does not verify for candidate " + c.id);
  return rec;
}

std::uint64_t PipelineReport::rejected_total() const {
  std::uint64_t n = 0;
  for (const auto& [reason, count] : rejections) n += count;
  return n;
}

double PipelineReport::yield() const {
  return queried == 0 ? 0.0 : static_cast<double>(summarized) / static_cast<double>(queried);
}

std::string PipelineReport::to_json_text() const {
  char yield3[16];
  std::snprintf(yield3, sizeof(yield3), "%.3f", yield());
  json j{
      {"queried", queried},
      {"reasoned", reasoned},
      {"reflected", reflected},
      {"checked", checked},
      {"summarized", summarized},
      {"rejections", rejections},
      {"redundancy_stripped", redundancy_stripped},
      {"facts_supplemented", facts_supplemented},
      {"yield", yield3},
  };
  return j.dump(2) + "\n";
}

PipelineReport PipelineReport::from_json_text(const std::string& text) {
  const json j = jsonio::parse_or_data_error(text, "pipeline report");
  PipelineReport r;
  r.queried = j.at("queried").get<std::uint64_t>();
  r.reasoned = j.at("reasoned").get<std::uint64_t>();
  r.reflected = j.at("reflected").get<std::uint64_t>();
  r.checked = j.at("checked").get<std::uint64_t>();
  r.summarized = j.at("summarized").get<std::uint64_t>();
  if (j.contains("rejections"))
    r.rejections = j.at("rejections").get<std::map<std::string, std::uint64_t>>();
  r.redundancy_stripped = j.at("redundancy_stripped").get<std::uint64_t>();
  r.facts_supplemented = j.at("facts_supplemented").get<std::uint64_t>();
  return r;
}

PipelineReport run_pipeline(int n, std::uint64_t seed, const WorldConfig& world, const PipelineConfig& cfg,
                            const std::filesystem::path& dataset_out) {
  if (n < 1) throw ConfigError("run_pipeline: n must be >= 1");
  world.validate();
  cfg.validate();

  PipelineReport report;
  Dataset ds;
  ds.world = world;
  ds.records.reserve(static_cast<std::size_t>(n));

  for (std::uint64_t index = 0; static_cast<int>(ds.records.size()) < n; ++index) {
    Rng rng(derive_seed(seed, "pipeline", index));
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "q%06llu", static_cast<unsigned long long>(index));
    CandidateRecord c = query_stage(rng, world, cfg, idbuf);
    ++report.queried;

    ReasoningPath path = reasoning_stage(c, world);
    ++report.reasoned;

    const ReflectionOutcome fix = reflect_stage(c, path, world);
    report.redundancy_stripped += static_cast<std::uint64_t>(fix.redundancy_stripped);
    report.facts_supplemented += static_cast<std::uint64_t>(fix.facts_supplemented);
    ++report.reflected;

    if (auto reason = check_stage(c, world, cfg)) {
      ++report.rejections[*reason];
      continue;
    }
    ++report.checked;

    ds.records.push_back(summary_stage(c, path, world));
    ++report.summarized;
  }

  save_dataset(ds, dataset_out);
  return report;
}

}  // namespace srpo
