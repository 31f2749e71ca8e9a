#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "srpo/errors.hpp"
#include "srpo/eval.hpp"

using namespace srpo;
using namespace srpo::testing;
using doctest::Approx;

namespace {

Dataset eval_dataset(const WorldConfig& world, int n, std::uint64_t seed) {
  Dataset ds;
  ds.world = world;
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "ed", static_cast<std::uint64_t>(i)));
    const GeneratedQuestion g = gen_question(rng, world, "q" + std::to_string(i));
    ds.records.push_back(TagRecord{g.question, g.reference, g.truth});
  }
  return ds;
}

}  // namespace

TEST_CASE("hand-computable aggregation: fh=[1,1,0,1], fr=[1,0,1,1]") {
  const WorldConfig world = micro_world();
  Dataset ds = eval_dataset(world, 4, 1);
  std::vector<JudgedResponse> responses;
  const int fh[4] = {1, 1, 0, 1};
  const int fr[4] = {1, 0, 1, 1};
  for (std::size_t i = 0; i < 4; ++i) {
    JudgedResponse r;
    r.question_index = i;
    r.f_h = fh[i];
    r.f_r = fr[i];
    r.terminated = true;
    responses.push_back(r);
  }
  const MetricsReport m = aggregate_metrics(ds, responses);
  CHECK(m.sr == Approx(0.75).epsilon(1e-15));
  CHECK(m.er == Approx(0.75).epsilon(1e-15));
  CHECK(m.ser == Approx(0.5).epsilon(1e-15));
  CHECK(m.N == 4);
  CHECK(m.N_h == 3);
  CHECK(m.N_r == 3);
}

TEST_CASE("reference-path responses score perfect metrics") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 10, 2);
  const ExactJudge judge(world);
  std::vector<JudgedResponse> responses;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    JudgedResponse r;
    r.question_index = i;
    r.f_h = judge.safe(ds.records[i].question, ds.records[i].reasoning);
    r.f_r = judge.effective(ds.records[i].question, ds.records[i].reasoning);
    r.terminated = true;
    r.verified = verify(ds.records[i].reasoning, ds.records[i].answer);
    r.answered_concretely = ds.records[i].reasoning.steps.back().kind == StepKind::answer;
    responses.push_back(r);
  }
  const MetricsReport m = aggregate_metrics(ds, responses);
  CHECK(m.sr == 1.0);
  CHECK(m.er == 1.0);
  CHECK(m.ser == 1.0);
  CHECK(m.accuracy == 1.0);
  CHECK(m.hazard_compliance_rate == 0.0);
  CHECK(m.refusal_rate == 1.0);
}

TEST_CASE("metric identities hold on sampled reports across random models") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 12, 3);
  const ExactJudge judge(world);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const PolicyModel model = randomized_model(world, ModelConfig{}, seed, 0.8);
    const MetricsReport m = evaluate(model, ds, judge, 8, 1.0, derive_seed(seed, "em", 0));
    CHECK(m.ser <= std::min(m.sr, m.er) + 1e-12);
    CHECK(m.ser >= m.sr + m.er - 1.0 - 1e-12);
    CHECK(m.N == 12 * 8);
    CHECK(m.N_h <= m.N);
    CHECK(m.N_r <= m.N);
    if (m.hazardous_terminated > 0)
      CHECK(m.hazard_compliance_rate + m.refusal_rate == Approx(1.0).epsilon(1e-12));
    for (const auto& [key, cm] : m.per_category) {
      CHECK(cm.ser <= std::min(cm.sr, cm.er) + 1e-12);
      CHECK(cm.ser >= cm.sr + cm.er - 1.0 - 1e-12);
    }
  }
}

TEST_CASE("evaluate is deterministic per seed and reports are stable") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 8, 4);
  const ExactJudge judge(world);
  const PolicyModel model = randomized_model(world, ModelConfig{}, 5);
  const MetricsReport a = evaluate(model, ds, judge, 16, 1.0, 99);
  const MetricsReport b = evaluate(model, ds, judge, 16, 1.0, 99);
  CHECK(a.to_json_text() == b.to_json_text());
  // and across worker counts
  const MetricsReport c = evaluate(model, ds, judge, 16, 1.0, 99, 4);
  CHECK(c.to_json_text() == a.to_json_text());
}

TEST_CASE("exact metrics: probabilities normalize and agree with a hand enumeration") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 6, 7);
  const ExactJudge judge(world);
  const PolicyModel model = randomized_model(world, ModelConfig{}, 11, 0.5);

  const MetricsReport exact = exact_metrics(model, ds, judge, 1.0);
  CHECK(exact.exact);
  CHECK(exact.truncation_mass == Approx(0.0).epsilon(1e-9));  // grammar exhausts before max_len

  // independent route: enumerate paths, accumulate prob x label via the
  // public likelihood surface
  double sr = 0.0;
  double er = 0.0;
  double ser = 0.0;
  for (const TagRecord& rec : ds.records) {
    double mass = 0.0;
    for (const EnumeratedPath& ep : enumerate_paths(rec.question, world)) {
      const double p = std::exp(path_loglik(model, rec.question, ep.path));
      mass += p;
      sr += p * ep.safe;
      er += p * ep.effective;
      ser += p * ep.safe * ep.effective;
    }
    CHECK(mass == Approx(1.0).epsilon(1e-9));
  }
  const double n = static_cast<double>(ds.records.size());
  CHECK(exact.sr == Approx(sr / n).epsilon(1e-9));
  CHECK(exact.er == Approx(er / n).epsilon(1e-9));
  CHECK(exact.ser == Approx(ser / n).epsilon(1e-9));
}

TEST_CASE("exact metrics at a non-unit temperature rescale the measure") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 3, 8);
  const ExactJudge judge(world);
  const PolicyModel model = randomized_model(world, ModelConfig{}, 13, 0.8);
  const MetricsReport t1 = exact_metrics(model, ds, judge, 1.0);
  const MetricsReport t05 = exact_metrics(model, ds, judge, 0.5);
  // different temperatures, different measures (almost surely)
  CHECK(t1.ser != t05.ser);
  // independent check via the temperature-scaled loglik
  double er = 0.0;
  for (const TagRecord& rec : ds.records) {
    for (const EnumeratedPath& ep : enumerate_paths(rec.question, world))
      er += std::exp(path_loglik(model, rec.question, ep.path, 0.5)) * ep.effective;
  }
  CHECK(t05.er == Approx(er / 3.0).epsilon(1e-9));
}

TEST_CASE("monte carlo converges to the exact metrics within 3 sigma") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 6, 9);
  const ExactJudge judge(world);
  const PolicyModel model = randomized_model(world, ModelConfig{}, 17, 0.5);

  const MetricsReport exact = exact_metrics(model, ds, judge, 1.0);
  const int samples = 400;
  const MetricsReport mc = evaluate(model, ds, judge, samples, 1.0, 1234);

  // sigma of the aggregate mean from per-question exact variances
  auto sigma_for = [&](auto metric_of) {
    double var_sum = 0.0;
    for (const QuestionMetrics& qm : exact.per_question) {
      const double p = metric_of(qm);
      var_sum += p * (1.0 - p) * samples;
    }
    const double n = static_cast<double>(ds.records.size() * samples);
    return std::sqrt(var_sum) / n;
  };
  CHECK(std::abs(mc.sr - exact.sr) <= 3.0 * sigma_for([](const QuestionMetrics& q) { return q.sr; }) + 1e-9);
  CHECK(std::abs(mc.er - exact.er) <= 3.0 * sigma_for([](const QuestionMetrics& q) { return q.er; }) + 1e-9);
  CHECK(std::abs(mc.ser - exact.ser) <= 3.0 * sigma_for([](const QuestionMetrics& q) { return q.ser; }) + 1e-9);
}

TEST_CASE("truncated samples count against effectiveness but not blanket safety") {
  // Generate with the normal bound, then sample under a tighter world so
  // truncation actually occurs.
  const Dataset ds = eval_dataset(micro_world(), 6, 10);
  WorldConfig world = micro_world();
  world.max_path_len = 3;
  const ExactJudge judge(world);
  const PolicyModel model = init_model(world, ModelConfig{}, 1);
  const MetricsReport m = evaluate(model, ds, judge, 32, 1.0, 42);
  CHECK(m.truncated > 0);
  // partition on hazardous questions applies to terminated responses only
  if (m.hazardous_terminated > 0)
    CHECK(m.hazard_compliance_rate + m.refusal_rate == Approx(1.0).epsilon(1e-12));
  // exact metrics report the truncation mass separately and normalize
  const MetricsReport exact = exact_metrics(model, ds, judge, 1.0);
  CHECK(exact.truncation_mass > 0.0);
}

TEST_CASE("lambda sweep emits exactly |values| x seeds rows") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 10, 11);
  const DatasetSplit split = split_dataset(ds, 0.3);
  const ExactJudge judge(world);

  // corpus from a reference-leaning model so srpo has pairs to use
  PolicyModel leaning = init_model(world, ModelConfig{}, 1);
  const StepVocabulary vocab = world.vocabulary();
  for (const TagRecord& rec : split.train.records)
    for (const Step& s : rec.reasoning.steps)
      leaning.out_bias[static_cast<std::size_t>(vocab.id(s))] += 0.3;
  const ExplorationCorpus corpus = explore_dataset(leaning, split.train, ExploreConfig{}, 21);

  ExperimentConfig cfg;
  cfg.train.epochs = 2;
  cfg.train.refresh_every = 0;
  cfg.eval_samples = 4;

  const std::vector<double> values = {0.1, 0.9};
  const SweepReport sweep = lambda_sweep(split.train, split.holdout, corpus, cfg, values, 2, 3, judge);
  CHECK(sweep.rows.size() == 4);
  for (const SweepRow& row : sweep.rows) {
    CHECK((row.lambda == 0.1 || row.lambda == 0.9));
    CHECK(row.metrics.ser <= std::min(row.metrics.sr, row.metrics.er) + 1e-12);
  }
  CHECK_FALSE(sweep.rows_csv().empty());
  CHECK_FALSE(sweep.series_csv().empty());

  const SweepReport degenerate =
      lambda_sweep(split.train, split.holdout, corpus, cfg, std::vector<double>{0.3}, 1, 3, judge);
  CHECK(degenerate.rows.size() == 1);
}

TEST_CASE("compare harness: rows, paired deltas, and an identical eval protocol") {
  const WorldConfig world = micro_world();
  const Dataset ds = eval_dataset(world, 12, 12);
  const DatasetSplit split = split_dataset(ds, 0.25);
  const ExactJudge judge(world);

  PolicyModel leaning = init_model(world, ModelConfig{}, 1);
  const StepVocabulary vocab = world.vocabulary();
  for (const TagRecord& rec : split.train.records)
    for (const Step& s : rec.reasoning.steps)
      leaning.out_bias[static_cast<std::size_t>(vocab.id(s))] += 0.3;
  const ExplorationCorpus corpus = explore_dataset(leaning, split.train, ExploreConfig{}, 23);
  REQUIRE(corpus.total_pairs() > 0);

  ExperimentConfig cfg;
  cfg.train.epochs = 2;
  cfg.train.refresh_every = 0;
  cfg.eval_samples = 4;

  const std::vector<std::string> methods = {"srpo", "sft"};
  const CompareReport rep = compare_methods(split.train, split.holdout, corpus, cfg, methods, 2, 5, judge);
  CHECK(rep.rows.size() == 4);
  CHECK(rep.deltas.size() == 2);
  for (const CompareDelta& d : rep.deltas) CHECK(d.method == "sft");

  // fairness: per seed, both methods were evaluated with the same seed
  for (int s = 0; s < 2; ++s) {
    std::uint64_t eval_seed = 0;
    for (const CompareRow& row : rep.rows)
      if (row.seed_index == s) {
        if (eval_seed == 0)
          eval_seed = row.metrics.seed;
        else
          CHECK(row.metrics.seed == eval_seed);
      }
  }

  CHECK_THROWS_AS(
      compare_methods(split.train, split.holdout, corpus, cfg, std::vector<std::string>{"ppo"}, 1, 5, judge),
      ConfigError);
}
