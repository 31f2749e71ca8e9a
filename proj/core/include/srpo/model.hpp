#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "srpo/features.hpp"
#include "srpo/path.hpp"
#include "srpo/rng.hpp"
#include "srpo/world.hpp"

namespace srpo {

struct ModelConfig {
  int embed_dim = 16;
  // m: when > 0, trainers warm-start with one supervised pass over the
  // first m reference examples before the main objective.
  int warm_start_examples = 0;
};

// Autoregressive scorer over step tokens: logit(v) = U_v . h + b_v with
// h = sum of active question-feature embeddings plus position-weighted step
// embeddings of the prefix. Grammar-illegal steps are masked to -inf.
struct PolicyModel {
  WorldConfig world;
  ModelConfig cfg;

  // Parameters. feat_embed is F x d, tok_embed V x d, pool_weight
  // max_path_len, out_proj V x d, out_bias V; all row-major.
  std::vector<double> feat_embed;
  std::vector<double> tok_embed;
  std::vector<double> pool_weight;
  std::vector<double> out_proj;
  std::vector<double> out_bias;

  int feature_count = 0;
  int vocab_size = 0;

  int embed_dim() const { return cfg.embed_dim; }
  FeatureLayout layout() const { return FeatureLayout(world); }
  StepVocabulary vocab() const { return world.vocabulary(); }
  std::size_t num_params() const;
};

// Question/step embeddings drawn from a seeded symmetric uniform range
// scaled by 1/sqrt(dim); pooling weights 1; output projection and bias 0,
// so a fresh model is uniform over legal steps everywhere.
PolicyModel init_model(const WorldConfig& world, const ModelConfig& cfg, std::uint64_t seed);

struct Gradient {
  std::vector<double> feat_embed;
  std::vector<double> tok_embed;
  std::vector<double> pool_weight;
  std::vector<double> out_proj;
  std::vector<double> out_bias;
  long long accumulation_count = 0;

  static Gradient zeros_like(const PolicyModel& model);
  void scale(double a);
  void axpy(double a, const Gradient& other);
  double squared_norm() const;
  // Throws NumericError naming the first non-finite entry.
  void check_finite(const std::string& context) const;
};

// Mutable views over the named parameter arrays, in a fixed order shared
// with Gradient and the checkpoint container.
struct ParamView {
  const char* name;
  std::vector<double>* data;
};
std::vector<ParamView> param_views(PolicyModel& model);
std::vector<ParamView> param_views(Gradient& grad);

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Masked logits over the full vocabulary; illegal steps are -inf.
// Deterministic in (model, q, prefix); errors on a terminated prefix.
std::vector<double> logits(const PolicyModel& model, const Question& q, std::span<const Step> prefix);

bool step_is_legal(const PolicyModel& model, const Question& q, std::span<const Step> prefix, const Step& next);

// log softmax(logits)[next] at temperature 1; -inf for a masked step.
double step_logprob(const PolicyModel& model, const Question& q, std::span<const Step> prefix, const Step& next);

// Sum of step log-probabilities of `steps` taken after `prefix`, each
// conditioned on everything before it. Throws DataError on illegal steps.
double steps_loglik(const PolicyModel& model, const Question& q, std::span<const Step> prefix,
                    std::span<const Step> steps, double temperature = 1.0);

// L(tau | theta) = log p(path | q): every transition including the terminal
// emission. Paths must be grammar-legal.
double path_loglik(const PolicyModel& model, const Question& q, const ReasoningPath& path,
                   double temperature = 1.0);

// Autoregressive draw from softmax(logits / temperature) until a terminal
// or max_len steps (0: the world's max_path_len); hitting the bound yields
// a non-terminated path flagged truncated. kind = sampled-backbone.
ReasoningPath sample_path(const PolicyModel& model, const Question& q, double temperature, Rng& rng,
                          int max_len = 0);

// Same draw conditioned on a prefix; the path-measure conditional. max_len
// bounds the total path length, prefix included.
Continuation sample_continuation(const PolicyModel& model, const Question& q, std::span<const Step> prefix,
                                 double temperature, Rng& rng, int max_len = 0);

// Accumulates coeff * d(log p(steps | q, prefix))/d(theta) into grad.
void add_steps_loglik_grad(const PolicyModel& model, const Question& q, std::span<const Step> prefix,
                           std::span<const Step> steps, double coeff, Gradient& grad,
                           double temperature = 1.0);

// FNV-1a over the parameter bytes; the identity used by the determinism
// tests and run manifests.
std::string model_checksum(const PolicyModel& model);

// Versioned binary container of the named parameter arrays with a trailing
// content checksum. Layout: magic "SRPOCKPT", u32 schema version, u32 meta
// length, meta JSON (world, model config, trainer echo), u32 array count,
// then per array u16 name length + name + u64 count + raw doubles, and a
// final u64 FNV-1a of all preceding bytes.
void save_checkpoint(const PolicyModel& model, const std::filesystem::path& path,
                     const std::string& trainer_meta_json = "{}");
PolicyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace srpo
