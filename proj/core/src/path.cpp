#include "srpo/path.hpp"

#include <nlohmann/json.hpp>

#include "srpo/errors.hpp"

namespace srpo {

using nlohmann::json;

std::string step_to_string(const Step& s) {
  switch (s.kind) {
    case StepKind::obs:
      return "OBS(" + std::to_string(s.arg) + ")";
    case StepKind::chk:
      return "CHK";
    case StepKind::flag:
      return "FLAG";
    case StepKind::compute:
      return "COMPUTE";
    case StepKind::answer:
      return "ANSWER(" + std::to_string(s.arg) + ")";
    case StepKind::refuse:
      return "REFUSE";
  }
  throw DataError("step_to_string: bad step kind");
}

Step step_from_string(const std::string& text) {
  auto parse_arg = [&](std::size_t open) -> int {
    if (text.back() != ')') throw DataError("malformed step token: " + text);
    const std::string inner = text.substr(open + 1, text.size() - open - 2);
    if (inner.empty()) throw DataError("malformed step token: " + text);
    try {
      return std::stoi(inner);
    } catch (const std::exception&) {
      throw DataError("malformed step token: " + text);
    }
  };
  if (text.rfind("OBS(", 0) == 0) return obs(parse_arg(3));
  if (text == "CHK") return chk();
  if (text == "FLAG") return flag();
  if (text == "COMPUTE") return compute();
  if (text.rfind("ANSWER(", 0) == 0) return answer(parse_arg(6));
  if (text == "REFUSE") return refuse();
  throw DataError("unknown step token: " + text);
}

StepVocabulary::StepVocabulary(int n_max, int modulus) : n_max_(n_max), modulus_(modulus) {
  if (n_max < 1 || modulus < 2) throw ConfigError("StepVocabulary: need n_max >= 1 and modulus >= 2");
}

int StepVocabulary::id(const Step& s) const {
  switch (s.kind) {
    case StepKind::obs:
      if (s.arg < 0 || s.arg >= n_max_) throw DataError("token OBS(" + std::to_string(s.arg) + ") outside vocabulary");
      return s.arg;
    case StepKind::chk:
      return n_max_;
    case StepKind::flag:
      return n_max_ + 1;
    case StepKind::compute:
      return n_max_ + 2;
    case StepKind::answer:
      if (s.arg < 0 || s.arg >= modulus_) throw DataError("token ANSWER(" + std::to_string(s.arg) + ") outside vocabulary");
      return n_max_ + 3 + s.arg;
    case StepKind::refuse:
      return n_max_ + 3 + modulus_;
  }
  throw DataError("StepVocabulary::id: bad step kind");
}

Step StepVocabulary::step(int id) const {
  if (id < 0 || id >= size()) throw DataError("token id out of range: " + std::to_string(id));
  if (id < n_max_) return obs(id);
  if (id == n_max_) return chk();
  if (id == n_max_ + 1) return flag();
  if (id == n_max_ + 2) return compute();
  if (id < n_max_ + 3 + modulus_) return answer(id - n_max_ - 3);
  return refuse();
}

std::string path_kind_to_string(PathKind k) {
  switch (k) {
    case PathKind::reference:
      return "reference";
    case PathKind::sampled_backbone:
      return "sampled-backbone";
    case PathKind::positive:
      return "positive";
    case PathKind::negative:
      return "negative";
  }
  throw DataError("bad path kind");
}

PathKind path_kind_from_string(const std::string& text) {
  if (text == "reference") return PathKind::reference;
  if (text == "sampled-backbone") return PathKind::sampled_backbone;
  if (text == "positive") return PathKind::positive;
  if (text == "negative") return PathKind::negative;
  throw DataError("unknown path kind: " + text);
}

void validate_path(const ReasoningPath& path, std::size_t max_len) {
  if (path.steps.empty()) throw DataError("path is empty (question " + path.question_id + ")");
  if (max_len > 0 && path.steps.size() > max_len)
    throw DataError("path longer than max_path_len (question " + path.question_id + ")");
  for (std::size_t i = 0; i + 1 < path.steps.size(); ++i) {
    if (path.steps[i].is_terminal())
      throw DataError("terminal step not last (question " + path.question_id + ", position " + std::to_string(i) + ")");
  }
  if (path.truncated && path.terminated())
    throw DataError("terminated path flagged truncated (question " + path.question_id + ")");
}

void validate_continuation(const Continuation& cont) {
  if (cont.truncated) {
    for (const Step& s : cont.steps)
      if (s.is_terminal()) throw DataError("truncated continuation contains a terminal");
    return;
  }
  if (cont.steps.empty() || !cont.steps.back().is_terminal())
    throw DataError("continuation does not end in a terminal");
  for (std::size_t i = 0; i + 1 < cont.steps.size(); ++i)
    if (cont.steps[i].is_terminal()) throw DataError("continuation has an interior terminal");
}

ReasoningPath concat_path(const ReasoningPath& prefix, const Continuation& cont, PathKind kind) {
  if (prefix.steps.empty()) throw DataError("concat_path: empty prefix path");
  if (prefix.terminated()) throw DataError("concat_path: prefix already terminates");
  Prefix p{prefix.question_id, prefix.steps};
  return concat_path(p, cont, kind);
}

ReasoningPath concat_path(const Prefix& prefix, const Continuation& cont, PathKind kind) {
  for (const Step& s : prefix.steps)
    if (s.is_terminal()) throw DataError("concat_path: terminal step inside prefix");
  validate_continuation(cont);
  ReasoningPath out;
  out.question_id = prefix.question_id;
  out.kind = kind;
  out.steps = prefix.steps;
  out.steps.insert(out.steps.end(), cont.steps.begin(), cont.steps.end());
  out.truncated = cont.truncated;
  validate_path(out);
  return out;
}

int verify(const ReasoningPath& path, const Answer& truth) {
  if (!path.terminated()) throw DataError("verify: path has no terminal state (question " + path.question_id + ")");
  return *path.steps.back().payload() == truth ? 1 : 0;
}

Prefix path_prefix(const ReasoningPath& path, int i) {
  if (i < 1 || static_cast<std::size_t>(i) > path.steps.size())
    throw DataError("path_prefix: index " + std::to_string(i) + " out of range 1.." + std::to_string(path.steps.size()));
  Prefix p;
  p.question_id = path.question_id;
  p.steps.assign(path.steps.begin(), path.steps.begin() + (i - 1));
  return p;
}

Continuation path_suffix(const ReasoningPath& path, int i) {
  if (i < 1 || static_cast<std::size_t>(i) > path.steps.size())
    throw DataError("path_suffix: index " + std::to_string(i) + " out of range 1.." + std::to_string(path.steps.size()));
  Continuation c;
  c.steps.assign(path.steps.begin() + (i - 1), path.steps.end());
  c.truncated = path.truncated;
  return c;
}

namespace {

json path_to_json_obj(const ReasoningPath& path) {
  json steps = json::array();
  for (const Step& s : path.steps) steps.push_back(step_to_string(s));
  json j{{"question_id", path.question_id}, {"kind", path_kind_to_string(path.kind)}, {"steps", std::move(steps)}};
  if (path.truncated) j["truncated"] = true;
  return j;
}

ReasoningPath path_from_json_obj(const json& j) {
  ReasoningPath p;
  p.question_id = j.at("question_id").get<std::string>();
  p.kind = path_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& tok : j.at("steps")) p.steps.push_back(step_from_string(tok.get<std::string>()));
  p.truncated = j.value("truncated", false);
  return p;
}

}  // namespace

std::string path_to_json(const ReasoningPath& path) { return path_to_json_obj(path).dump(); }

ReasoningPath path_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad path record: ") + e.what());
  }
  try {
    return path_from_json_obj(j);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad path record: ") + e.what());
  }
}

}  // namespace srpo
