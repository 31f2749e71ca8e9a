#include "srpo/config.hpp"

#include <algorithm>

#include "json_io.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"

namespace srpo {

using jsonio::json;

void EvalConfig::validate() const {
  if (samples_per_q < 1) throw ConfigError("eval.samples_per_q: must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("eval.temperature: must be positive");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) throw ConfigError("eval.holdout_fraction: must lie in [0, 1)");
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  cfg.world = WorldConfig::defaults();
  cfg.pipeline = PipelineConfig::defaults();
  return cfg;
}

void RunConfig::validate() const {
  world.validate();
  pipeline.validate();
  explore.validate();
  train.validate();
  eval.validate();
  if (model.embed_dim < 1) throw ConfigError("model.embed_dim: must be >= 1");
  if (model.warm_start_examples < 0) throw ConfigError("model.warm_start_examples: must be >= 0");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
}

namespace {

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1);
  std::vector<int> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

[[noreturn]] void reject_unknown(const std::string& key, const std::string& where,
                                 const std::vector<std::string>& known) {
  std::string best;
  int best_d = 1 << 20;
  for (const std::string& k : known) {
    const int d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  std::string msg = "unknown key \"" + key + "\"" + (where.empty() ? "" : " in [" + where + "]");
  if (!best.empty() && best_d <= std::max<int>(2, static_cast<int>(key.size()) / 2))
    msg += "; did you mean \"" + best + "\"?";
  throw ConfigError(msg);
}

void check_keys(const json& obj, const std::string& where, const std::vector<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) reject_unknown(key, where, known);
  }
}

std::string path_of(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

double get_num(const json& obj, const std::string& section, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path_of(section, key) + ": expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& section, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path_of(section, key) + ": expected an integer");
  return v.get<int>();
}

bool get_bool(const json& obj, const std::string& section, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(path_of(section, key) + ": expected a boolean");
  return v.get<bool>();
}

std::uint64_t get_u64(const json& obj, const std::string& section, const std::string& key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw ConfigError(path_of(section, key) + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

void parse_world(const json& obj, WorldConfig& cfg) {
  check_keys(obj, "world",
             {"num_entities", "value_modulus", "hazard_pairs", "facts_min", "facts_max", "max_path_len",
              "hazard_ratio", "benign_mix_share", "taxonomy"});
  cfg.num_entities = get_int(obj, "world", "num_entities", cfg.num_entities);
  cfg.value_modulus = get_int(obj, "world", "value_modulus", cfg.value_modulus);
  cfg.facts_min = get_int(obj, "world", "facts_min", cfg.facts_min);
  cfg.facts_max = get_int(obj, "world", "facts_max", cfg.facts_max);
  cfg.max_path_len = get_int(obj, "world", "max_path_len", cfg.max_path_len);
  cfg.hazard_ratio = get_num(obj, "world", "hazard_ratio", cfg.hazard_ratio);
  cfg.benign_mix_share = get_num(obj, "world", "benign_mix_share", cfg.benign_mix_share);
  if (obj.contains("hazard_pairs")) {
    const json& pairs = obj.at("hazard_pairs");
    if (!pairs.is_array()) throw ConfigError("world.hazard_pairs: expected an array of [a, b, class] triples");
    cfg.hazard_pairs.clear();
    for (const auto& p : pairs) {
      if (!p.is_array() || p.size() != 3) throw ConfigError("world.hazard_pairs: expected [a, b, class] triples");
      cfg.hazard_pairs.push_back(HazardPair{p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
    }
  }
  if (obj.contains("taxonomy")) {
    try {
      cfg.taxonomy = jsonio::taxonomy_from_json(obj.at("taxonomy"));
    } catch (const json::exception&) {
      throw ConfigError("world.taxonomy: expected the category-tree structure");
    }
  }
}

void parse_pipeline(const json& obj, PipelineConfig& cfg) {
  check_keys(obj, "pipeline",
             {"redundancy_rate", "missing_fact_rate", "unknown_entity_rate", "deny_token_rate", "deny_list"});
  cfg.redundancy_rate = get_num(obj, "pipeline", "redundancy_rate", cfg.redundancy_rate);
  cfg.missing_fact_rate = get_num(obj, "pipeline", "missing_fact_rate", cfg.missing_fact_rate);
  cfg.unknown_entity_rate = get_num(obj, "pipeline", "unknown_entity_rate", cfg.unknown_entity_rate);
  cfg.deny_token_rate = get_num(obj, "pipeline", "deny_token_rate", cfg.deny_token_rate);
  if (obj.contains("deny_list")) {
    if (!obj.at("deny_list").is_array()) throw ConfigError("pipeline.deny_list: expected an array of strings");
    cfg.deny_list = obj.at("deny_list").get<std::vector<std::string>>();
  }
}

void parse_explore(const json& obj, ExploreConfig& cfg) {
  check_keys(obj, "explore",
             {"temperature", "branch_budget", "max_len", "dedup", "prompt_examples", "judge_filter"});
  cfg.temperature = get_num(obj, "explore", "temperature", cfg.temperature);
  cfg.branch_budget = get_int(obj, "explore", "branch_budget", cfg.branch_budget);
  cfg.max_len = get_int(obj, "explore", "max_len", cfg.max_len);
  cfg.dedup = get_bool(obj, "explore", "dedup", cfg.dedup);
  cfg.prompt_examples = get_int(obj, "explore", "prompt_examples", cfg.prompt_examples);
  cfg.judge_filter = get_bool(obj, "explore", "judge_filter", cfg.judge_filter);
}

void parse_model(const json& obj, ModelConfig& cfg) {
  check_keys(obj, "model", {"embed_dim", "warm_start_examples"});
  cfg.embed_dim = get_int(obj, "model", "embed_dim", cfg.embed_dim);
  cfg.warm_start_examples = get_int(obj, "model", "warm_start_examples", cfg.warm_start_examples);
}

void parse_train(const json& obj, TrainConfig& cfg) {
  check_keys(obj, "train",
             {"lambda", "k", "learning_rate", "batch_size", "epochs", "refresh_every", "dpo_beta", "orpo_weight",
              "adam_beta1", "adam_beta2", "adam_eps", "seed"});
  cfg.lambda = get_num(obj, "train", "lambda", cfg.lambda);
  cfg.k = get_num(obj, "train", "k", cfg.k);
  cfg.learning_rate = get_num(obj, "train", "learning_rate", cfg.learning_rate);
  cfg.batch_size = get_int(obj, "train", "batch_size", cfg.batch_size);
  cfg.epochs = get_int(obj, "train", "epochs", cfg.epochs);
  cfg.refresh_every = get_int(obj, "train", "refresh_every", cfg.refresh_every);
  cfg.dpo_beta = get_num(obj, "train", "dpo_beta", cfg.dpo_beta);
  cfg.orpo_weight = get_num(obj, "train", "orpo_weight", cfg.orpo_weight);
  cfg.adam.beta1 = get_num(obj, "train", "adam_beta1", cfg.adam.beta1);
  cfg.adam.beta2 = get_num(obj, "train", "adam_beta2", cfg.adam.beta2);
  cfg.adam.eps = get_num(obj, "train", "adam_eps", cfg.adam.eps);
  cfg.seed = get_u64(obj, "train", "seed", cfg.seed);
}

void parse_eval(const json& obj, EvalConfig& cfg) {
  check_keys(obj, "eval", {"samples_per_q", "temperature", "holdout_fraction"});
  cfg.samples_per_q = get_int(obj, "eval", "samples_per_q", cfg.samples_per_q);
  cfg.temperature = get_num(obj, "eval", "temperature", cfg.temperature);
  cfg.holdout_fraction = get_num(obj, "eval", "holdout_fraction", cfg.holdout_fraction);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg = RunConfig::defaults();
  const std::string trimmed = [&] {
    std::string t = text;
    t.erase(0, t.find_first_not_of(" \t\r\n"));
    return t;
  }();
  if (!trimmed.empty()) {
    json root;
    try {
      root = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(root, "", {"world", "pipeline", "explore", "model", "train", "eval", "workers"});
    if (root.contains("world")) parse_world(root.at("world"), cfg.world);
    if (root.contains("pipeline")) parse_pipeline(root.at("pipeline"), cfg.pipeline);
    if (root.contains("explore")) parse_explore(root.at("explore"), cfg.explore);
    if (root.contains("model")) parse_model(root.at("model"), cfg.model);
    if (root.contains("train")) parse_train(root.at("train"), cfg.train);
    if (root.contains("eval")) parse_eval(root.at("eval"), cfg.eval);
    cfg.workers = get_int(root, "", "workers", cfg.workers);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config_text(read_file(path)); }

std::string config_to_json_text(const RunConfig& cfg) {
  json j{
      {"world", jsonio::world_to_json(cfg.world)},
      {"pipeline",
       {{"redundancy_rate", cfg.pipeline.redundancy_rate},
        {"missing_fact_rate", cfg.pipeline.missing_fact_rate},
        {"unknown_entity_rate", cfg.pipeline.unknown_entity_rate},
        {"deny_token_rate", cfg.pipeline.deny_token_rate},
        {"deny_list", cfg.pipeline.deny_list}}},
      {"explore",
       {{"temperature", cfg.explore.temperature},
        {"branch_budget", cfg.explore.branch_budget},
        {"max_len", cfg.explore.max_len},
        {"dedup", cfg.explore.dedup},
        {"prompt_examples", cfg.explore.prompt_examples},
        {"judge_filter", cfg.explore.judge_filter}}},
      {"model", {{"embed_dim", cfg.model.embed_dim}, {"warm_start_examples", cfg.model.warm_start_examples}}},
      {"train", jsonio::parse_or_data_error(train_config_to_json_text(cfg.train), "train config")},
      {"eval",
       {{"samples_per_q", cfg.eval.samples_per_q},
        {"temperature", cfg.eval.temperature},
        {"holdout_fraction", cfg.eval.holdout_fraction}}},
      {"workers", cfg.workers},
  };
  return j.dump(2) + "\n";
}

}  // namespace srpo
