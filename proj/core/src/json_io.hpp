#pragma once

// Internal JSON conversions shared by dataset, corpus, config and manifest
// serialization. Not installed; public headers stay JSON-free.

#include <nlohmann/json.hpp>

#include "srpo/path.hpp"
#include "srpo/world.hpp"

namespace srpo::jsonio {

using nlohmann::json;

json world_to_json(const WorldConfig& cfg);
WorldConfig world_from_json(const json& j);

json taxonomy_to_json(const Taxonomy& t);
Taxonomy taxonomy_from_json(const json& j);

json instruction_to_json(const Instruction& ins);
Instruction instruction_from_json(const json& j);

json question_to_json(const Question& q);
Question question_from_json(const json& j);

json answer_to_json(const Answer& a);
Answer answer_from_json(const json& j);

json path_to_json(const ReasoningPath& p);
ReasoningPath path_from_json(const json& j);

json steps_to_json(const std::vector<Step>& steps);
std::vector<Step> steps_from_json(const json& j);

// json::parse with parse errors rethrown as DataError carrying `what_file`.
json parse_or_data_error(const std::string& text, const std::string& what_file);

}  // namespace srpo::jsonio
