#pragma once

#include <filesystem>
#include <string>

#include "srpo/eval.hpp"
#include "srpo/explore.hpp"
#include "srpo/model.hpp"
#include "srpo/pipeline.hpp"
#include "srpo/train.hpp"
#include "srpo/world.hpp"

namespace srpo {

struct EvalConfig {
  int samples_per_q = 16;
  double temperature = 1.0;
  double holdout_fraction = 0.2;

  void validate() const;
};

// Fully resolved tool configuration. Sections mirror the subsystems; every
// value has a default, so an empty config file is valid.
struct RunConfig {
  WorldConfig world;
  PipelineConfig pipeline;
  ExploreConfig explore;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  int workers = 1;

  static RunConfig defaults();
  void validate() const;
};

// Strict parsing: unknown keys are rejected with a nearest-known-key
// suggestion; type errors name the full key path.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Resolved-config echo for manifests and golden comparisons.
std::string config_to_json_text(const RunConfig& cfg);

}  // namespace srpo
