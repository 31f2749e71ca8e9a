#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "srpo/dataset.hpp"
#include "srpo/explore.hpp"
#include "srpo/model.hpp"
#include "srpo/train.hpp"

namespace srpo {

// Arbitration seam: a remote judge model could back this interface; the
// shipped implementation delegates to the exact toy-world judges.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual int safe(const Question& q, const ReasoningPath& path) const = 0;
  virtual int effective(const Question& q, const ReasoningPath& path) const = 0;
  // Policy on truncated draws: effectiveness is 0 by definition; safety is
  // judged on the emitted steps.
  virtual int safe_truncated(const Question& q, std::span<const Step> steps) const = 0;
  virtual std::string id() const = 0;
};

class ExactJudge final : public Judge {
 public:
  explicit ExactJudge(WorldConfig world) : world_(std::move(world)) {}
  int safe(const Question& q, const ReasoningPath& path) const override;
  int effective(const Question& q, const ReasoningPath& path) const override;
  int safe_truncated(const Question& q, std::span<const Step> steps) const override;
  std::string id() const override { return "exact-toy-judge/v1"; }

 private:
  WorldConfig world_;
};

struct CategoryMetrics {
  long long n = 0;
  double sr = 0.0;
  double er = 0.0;
  double ser = 0.0;
};

struct QuestionMetrics {
  std::string id;
  CategoryTag category;
  bool hazardous = false;
  long long samples = 0;
  double sr = 0.0;
  double er = 0.0;
  double ser = 0.0;
};

struct MetricsReport {
  double sr = 0.0;
  double er = 0.0;
  double ser = 0.0;
  // Fraction of terminated responses to hazardous questions answered with a
  // concrete value instead of a refusal; refusal_rate is its complement.
  double hazard_compliance_rate = 0.0;
  double refusal_rate = 0.0;
  double accuracy = 0.0;
  long long N = 0;
  long long N_h = 0;
  long long N_r = 0;
  long long hazardous_responses = 0;
  long long hazardous_terminated = 0;
  long long truncated = 0;
  double truncation_mass = 0.0;  // exact reports only
  std::vector<QuestionMetrics> per_question;
  std::map<std::string, CategoryMetrics> per_category;

  // Sampling configuration echo.
  long long samples_per_q = 0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::string judge_id;
  bool exact = false;

  std::string to_json_text() const;
};

// Aggregation core shared by the sampler and by tests that inject judged
// responses directly.
struct JudgedResponse {
  std::size_t question_index = 0;
  int f_h = 0;
  int f_r = 0;
  bool terminated = true;
  bool answered_concretely = false;  // terminal is ANSWER(.)
  int verified = 0;
};
MetricsReport aggregate_metrics(const Dataset& dataset, std::span<const JudgedResponse> responses);

// Eqs. 10-11 over sampled responses: SR = (1/N) sum f_h, ER = (1/N) sum
// f_r, SER = (1/N) sum f_h * f_r with N = questions x samples_per_q.
MetricsReport evaluate(const PolicyModel& model, const Dataset& dataset, const Judge& judge, int samples_per_q,
                       double temperature, std::uint64_t seed, int workers = 1);

// Exact expectations of the same metrics under the model's path measure at
// the given temperature, by full enumeration. Per-question probabilities
// must sum to 1 within 1e-9 (truncation mass reported separately).
MetricsReport exact_metrics(const PolicyModel& model, const Dataset& dataset, const Judge& judge,
                            double temperature);

struct ExperimentConfig {
  TrainConfig train;
  ExploreConfig explore;
  ModelConfig model;
  int eval_samples = 16;
  double eval_temperature = 1.0;
};

struct SweepRow {
  double lambda = 0.0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<double> values;
  int num_seeds = 0;

  double mean_ser(double lambda) const;
  std::string rows_csv() const;
  std::string series_csv() const;  // plot-ready: lambda, mean and per-seed SER
};

// Fig. 7 analog: trains SRPO per (lambda, seed) and evaluates on the
// held-out split; |values| x num_seeds rows, exactly.
SweepReport lambda_sweep(const Dataset& train, const Dataset& eval, const ExplorationCorpus& corpus,
                         const ExperimentConfig& cfg, std::span<const double> values, int num_seeds,
                         std::uint64_t base_seed, const Judge& judge);

struct CompareRow {
  std::string method;
  int seed_index = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct CompareDelta {
  std::string method;  // baseline compared against srpo
  int seed_index = 0;
  double d_sr = 0.0;  // srpo minus baseline
  double d_er = 0.0;
  double d_ser = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::vector<CompareDelta> deltas;

  std::string rows_csv() const;
  std::string deltas_csv() const;
};

// Fig. 6 analog: identical data, seeds and evaluation protocol across
// methods; paired per-seed deltas against srpo when srpo is included.
CompareReport compare_methods(const Dataset& train, const Dataset& eval, const ExplorationCorpus& corpus,
                              const ExperimentConfig& cfg, std::span<const std::string> methods, int num_seeds,
                              std::uint64_t base_seed, const Judge& judge);

}  // namespace srpo
