#include "json_io.hpp"

#include "srpo/errors.hpp"

namespace srpo::jsonio {

json taxonomy_to_json(const Taxonomy& t) {
  json taxonomy = json::array();
  for (const auto& p : t.primary) {
    json secondary = json::array();
    for (const auto& s : p.secondary) secondary.push_back({{"name", s.name}, {"tertiary", s.tertiary}});
    taxonomy.push_back({{"name", p.name}, {"secondary", std::move(secondary)}});
  }
  return taxonomy;
}

Taxonomy taxonomy_from_json(const json& j) {
  Taxonomy t;
  for (const auto& p : j) {
    Taxonomy::Primary prim;
    prim.name = p.at("name").get<std::string>();
    for (const auto& s : p.at("secondary")) {
      Taxonomy::Secondary sec;
      sec.name = s.at("name").get<std::string>();
      sec.tertiary = s.at("tertiary").get<std::vector<std::string>>();
      prim.secondary.push_back(std::move(sec));
    }
    t.primary.push_back(std::move(prim));
  }
  return t;
}

json world_to_json(const WorldConfig& cfg) {
  json pairs = json::array();
  for (const HazardPair& h : cfg.hazard_pairs) pairs.push_back({h.a, h.b, h.hazard_class});
  json taxonomy = taxonomy_to_json(cfg.taxonomy);
  return json{
      {"num_entities", cfg.num_entities},
      {"value_modulus", cfg.value_modulus},
      {"hazard_pairs", std::move(pairs)},
      {"facts_min", cfg.facts_min},
      {"facts_max", cfg.facts_max},
      {"max_path_len", cfg.max_path_len},
      {"hazard_ratio", cfg.hazard_ratio},
      {"benign_mix_share", cfg.benign_mix_share},
      {"taxonomy", std::move(taxonomy)},
  };
}

WorldConfig world_from_json(const json& j) {
  WorldConfig cfg = WorldConfig::defaults();
  cfg.num_entities = j.at("num_entities").get<int>();
  cfg.value_modulus = j.at("value_modulus").get<int>();
  cfg.facts_min = j.at("facts_min").get<int>();
  cfg.facts_max = j.at("facts_max").get<int>();
  cfg.max_path_len = j.at("max_path_len").get<int>();
  cfg.hazard_ratio = j.at("hazard_ratio").get<double>();
  cfg.benign_mix_share = j.at("benign_mix_share").get<double>();
  cfg.hazard_pairs.clear();
  for (const auto& p : j.at("hazard_pairs"))
    cfg.hazard_pairs.push_back(HazardPair{p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
  if (j.contains("taxonomy")) cfg.taxonomy = taxonomy_from_json(j.at("taxonomy"));
  cfg.validate();
  return cfg;
}

json instruction_to_json(const Instruction& ins) {
  json j{{"kind", ins.is_mix() ? "MIX_THEN_REPORT_SUM" : "REPORT_SUM"}};
  if (ins.is_mix()) j["pair"] = {ins.mix_a, ins.mix_b};
  if (!ins.restated_facts.empty()) {
    json r = json::array();
    for (const Fact& f : ins.restated_facts) r.push_back({f.entity, f.value});
    j["restated"] = std::move(r);
  }
  if (!ins.extra_tokens.empty()) j["extra_tokens"] = ins.extra_tokens;
  return j;
}

Instruction instruction_from_json(const json& j) {
  Instruction ins;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "REPORT_SUM") {
    ins.kind = InstructionKind::report_sum;
  } else if (kind == "MIX_THEN_REPORT_SUM") {
    ins.kind = InstructionKind::mix_then_report_sum;
    ins.mix_a = j.at("pair").at(0).get<int>();
    ins.mix_b = j.at("pair").at(1).get<int>();
  } else {
    throw DataError("unknown instruction kind: " + kind);
  }
  if (j.contains("restated"))
    for (const auto& r : j.at("restated")) ins.restated_facts.push_back(Fact{r.at(0).get<int>(), r.at(1).get<int>()});
  if (j.contains("extra_tokens")) ins.extra_tokens = j.at("extra_tokens").get<std::vector<std::string>>();
  return ins;
}

json question_to_json(const Question& q) {
  json facts = json::array();
  for (const Fact& f : q.facts) facts.push_back({f.entity, f.value});
  return json{
      {"id", q.id},
      {"facts", std::move(facts)},
      {"instruction", instruction_to_json(q.instruction)},
      {"category", {q.category.primary, q.category.secondary, q.category.tertiary}},
  };
}

Question question_from_json(const json& j) {
  Question q;
  q.id = j.at("id").get<std::string>();
  for (const auto& f : j.at("facts")) q.facts.push_back(Fact{f.at(0).get<int>(), f.at(1).get<int>()});
  q.instruction = instruction_from_json(j.at("instruction"));
  const auto& cat = j.at("category");
  q.category = CategoryTag{cat.at(0).get<std::string>(), cat.at(1).get<std::string>(), cat.at(2).get<std::string>()};
  return q;
}

json answer_to_json(const Answer& a) {
  if (a.is_refusal()) return json("REFUSE");
  return json(a.value());
}

Answer answer_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "REFUSE") return Answer::refusal();
    throw DataError("unknown answer literal: " + j.get<std::string>());
  }
  return Answer::of(j.get<int>());
}

json steps_to_json(const std::vector<Step>& steps) {
  json arr = json::array();
  for (const Step& s : steps) arr.push_back(step_to_string(s));
  return arr;
}

std::vector<Step> steps_from_json(const json& j) {
  std::vector<Step> steps;
  for (const auto& tok : j) steps.push_back(step_from_string(tok.get<std::string>()));
  return steps;
}

json path_to_json(const ReasoningPath& p) {
  json j{{"question_id", p.question_id}, {"kind", path_kind_to_string(p.kind)}, {"steps", steps_to_json(p.steps)}};
  if (p.truncated) j["truncated"] = true;
  return j;
}

ReasoningPath path_from_json(const json& j) {
  ReasoningPath p;
  p.question_id = j.at("question_id").get<std::string>();
  p.kind = path_kind_from_string(j.at("kind").get<std::string>());
  p.steps = steps_from_json(j.at("steps"));
  p.truncated = j.value("truncated", false);
  return p;
}

json parse_or_data_error(const std::string& text, const std::string& what_file) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + what_file + ": " + e.what());
  }
}

}  // namespace srpo::jsonio
