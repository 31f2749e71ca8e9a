#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srpo/dataset.hpp"
#include "srpo/explore.hpp"
#include "srpo/loss.hpp"
#include "srpo/model.hpp"

namespace srpo {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double lambda = 0.3;
  double k = 1.0;
  double learning_rate = 5e-5;
  int batch_size = 8;
  int epochs = 240;
  int refresh_every = 1;  // R: re-explore with the current model every R epochs; 0 disables
  double dpo_beta = 0.1;
  double orpo_weight = 1.0;
  AdamConfig adam;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainStepRow {
  int step = 0;
  int epoch = 0;
  double j_ref = 0.0;
  double j_align = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  int pair_count = 0;
};

struct EpochSnapshot {
  int epoch = 0;
  double mean_loss = 0.0;
  // Filled when an eval split is provided.
  double sr = 0.0;
  double er = 0.0;
  double ser = 0.0;
  bool has_metrics = false;
};

struct TrainingLog {
  std::vector<TrainStepRow> steps;
  std::vector<EpochSnapshot> epochs;
};

struct TrainResult {
  PolicyModel model;
  TrainingLog log;
};

// Adam with bias correction; moments live alongside the model's parameter
// arrays and are preserved across corpus refreshes.
class AdamOptimizer {
 public:
  AdamOptimizer(const PolicyModel& model, AdamConfig cfg, double learning_rate);
  void step(PolicyModel& model, const Gradient& grad);
  long long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  double lr_;
  long long t_ = 0;
  Gradient m_;
  Gradient v_;
};

// SRPO: J_Ref over the dataset reference paths plus lambda * J_Align over
// the step-anchored pairs, with periodic corpus re-exploration by the model
// being optimized.
TrainResult train_srpo(const Dataset& train, const ExplorationCorpus& corpus, const ExploreConfig& explore_cfg,
                       const TrainConfig& cfg, const ModelConfig& model_cfg,
                       const Dataset* eval_split = nullptr);

// Descent on Eq. 5 only, over all reference paths. Identical trajectories
// to train_srpo at lambda = 0 for the same seed.
TrainResult train_sft(const Dataset& train, const TrainConfig& cfg, const ModelConfig& model_cfg,
                      const Dataset* eval_split = nullptr);

// Whole-path preference baselines on the earliest complete pair per
// question. DPO holds the initial model frozen as its reference.
TrainResult train_dpo(const ExplorationCorpus& corpus, const TrainConfig& cfg, const ModelConfig& model_cfg,
                      const Dataset* eval_split = nullptr);
TrainResult train_orpo(const Dataset& train, const ExplorationCorpus& corpus, const TrainConfig& cfg,
                       const ModelConfig& model_cfg, const Dataset* eval_split = nullptr);

// Earliest-step whole-path pair of a corpus entry, if any.
struct WholePathPair {
  ReasoningPath chosen;
  ReasoningPath rejected;
};
std::optional<WholePathPair> earliest_whole_path_pair(const CorpusEntry& entry);

// steps.csv (one row per optimizer step) plus summary.json.
void write_training_log(const TrainingLog& log, const std::filesystem::path& dir);

std::string train_config_to_json_text(const TrainConfig& cfg);

}  // namespace srpo
