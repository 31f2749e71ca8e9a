#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/train.hpp"

using namespace srpo;
using namespace srpo::testing;
using doctest::Approx;

namespace {

Dataset train_dataset(const WorldConfig& world, int n, std::uint64_t seed) {
  Dataset ds;
  ds.world = world;
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "td", static_cast<std::uint64_t>(i)));
    const GeneratedQuestion g = gen_question(rng, world, "q" + std::to_string(i));
    ds.records.push_back(TagRecord{g.question, g.reference, g.truth});
  }
  return ds;
}

ExplorationCorpus explored(const Dataset& ds, std::uint64_t seed) {
  // explore with a lightly reference-leaning model so pairs exist
  PolicyModel model = init_model(ds.world, ModelConfig{}, 1);
  const StepVocabulary vocab = ds.world.vocabulary();
  for (const TagRecord& rec : ds.records)
    for (const Step& s : rec.reasoning.steps)
      model.out_bias[static_cast<std::size_t>(vocab.id(s))] += 2.0 / static_cast<double>(ds.records.size());
  ExploreConfig cfg;
  return explore_dataset(model, ds, cfg, seed);
}

TrainConfig fast_config(std::uint64_t seed, int epochs = 4) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.refresh_every = 0;
  cfg.seed = seed;
  // a sane rate for a 4-epoch smoke loop; the defaults are for full runs
  cfg.learning_rate = 5e-3;
  return cfg;
}

}  // namespace

TEST_CASE("adam takes a descent step on a quadratic-like objective") {
  const WorldConfig world = tiny_world();
  PolicyModel model = init_model(world, ModelConfig{}, 1);
  const Question q = sum_question(world, "ad", {{0, 2}, {1, 3}});
  const ReasoningPath ref = reference_path(q, world);

  AdamOptimizer opt(model, AdamConfig{}, 1e-2);
  double prev = loss_ref(model, q, ref);
  for (int i = 0; i < 50; ++i) {
    Gradient g = Gradient::zeros_like(model);
    add_steps_loglik_grad(model, q, {}, ref.steps, -1.0, g);
    opt.step(model, g);
  }
  CHECK(loss_ref(model, q, ref) < prev);
}

TEST_CASE("one align step increases Delta for that pair") {
  const WorldConfig world = tiny_world();
  PolicyModel model = randomized_model(world, ModelConfig{}, 15);
  const Question q = sum_question(world, "ds", {{0, 2}, {1, 3}});
  ContrastivePair pair;
  pair.prefix = Prefix{q.id, {obs(0), obs(1), compute()}};
  pair.step_index = 4;
  pair.positive = Continuation{{answer(0)}, false};
  pair.negative = Continuation{{refuse()}, false};

  auto delta = [&](const PolicyModel& m) {
    return steps_loglik(m, q, pair.prefix.steps, pair.positive.steps) -
           steps_loglik(m, q, pair.prefix.steps, pair.negative.steps);
  };
  const double before = delta(model);
  Gradient g = grad_of(model, loss_align_step_fn(q, pair, 1.0));
  // plain small gradient step
  auto mv = param_views(model);
  auto gv = param_views(g);
  for (std::size_t a = 0; a < mv.size(); ++a)
    for (std::size_t i = 0; i < mv[a].data->size(); ++i) (*mv[a].data)[i] -= 1e-3 * (*gv[a].data)[i];
  CHECK(delta(model) > before);
}

TEST_CASE("srpo training decreases the loss over the first epochs and is deterministic") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 24, 3);
  const ExplorationCorpus corpus = explored(ds, 5);
  const TrainConfig cfg = fast_config(11, 6);

  const TrainResult a = train_srpo(ds, corpus, ExploreConfig{}, cfg, ModelConfig{});
  const TrainResult b = train_srpo(ds, corpus, ExploreConfig{}, cfg, ModelConfig{});
  CHECK(model_checksum(a.model) == model_checksum(b.model));

  REQUIRE(a.log.epochs.size() == 6);
  CHECK(a.log.epochs.back().mean_loss < a.log.epochs.front().mean_loss);
  REQUIRE_FALSE(a.log.steps.empty());
  for (const TrainStepRow& row : a.log.steps) CHECK(std::isfinite(row.total));
}

TEST_CASE("srpo at lambda 0 and sft produce bit-identical trajectories") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 20, 7);
  const ExplorationCorpus corpus = explored(ds, 9);

  TrainConfig cfg = fast_config(21, 4);
  cfg.lambda = 0.0;
  cfg.refresh_every = 1;  // refresh must not perturb the parameter stream

  const TrainResult srpo_run = train_srpo(ds, corpus, ExploreConfig{}, cfg, ModelConfig{});
  const TrainResult sft_run = train_sft(ds, cfg, ModelConfig{});
  CHECK(model_checksum(srpo_run.model) == model_checksum(sft_run.model));

  // per-step losses agree exactly as well
  REQUIRE(srpo_run.log.steps.size() == sft_run.log.steps.size());
  for (std::size_t i = 0; i < srpo_run.log.steps.size(); ++i)
    CHECK(srpo_run.log.steps[i].j_ref == sft_run.log.steps[i].j_ref);
}

TEST_CASE("sft initial loss equals the dataset's mean log-branching sum") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 16, 13);
  TrainConfig cfg = fast_config(31, 1);
  cfg.batch_size = static_cast<int>(ds.records.size());  // one batch: the epoch mean is the dataset mean

  const TrainResult run = train_sft(ds, cfg, ModelConfig{});
  double expected = 0.0;
  for (const TagRecord& rec : ds.records) {
    for (std::size_t i = 0; i < rec.reasoning.steps.size(); ++i)
      expected += std::log(static_cast<double>(
          legal_next_steps(rec.question, std::span<const Step>(rec.reasoning.steps.data(), i), ds.world).size()));
  }
  expected /= static_cast<double>(ds.records.size());
  REQUIRE_FALSE(run.log.steps.empty());
  CHECK(run.log.steps.front().j_ref == Approx(expected).epsilon(1e-9));
}

TEST_CASE("dpo at the initial model starts at log 2 per pair and trains deterministically") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 20, 17);
  const ExplorationCorpus corpus = explored(ds, 19);
  REQUIRE(corpus.total_pairs() > 0);

  TrainConfig cfg = fast_config(41, 3);
  const TrainResult a = train_dpo(corpus, cfg, ModelConfig{});
  const TrainResult b = train_dpo(corpus, cfg, ModelConfig{});
  CHECK(model_checksum(a.model) == model_checksum(b.model));
  REQUIRE_FALSE(a.log.steps.empty());
  // the very first batch is evaluated at theta == reference copy
  CHECK(a.log.steps.front().total == Approx(0.6931471805599453).epsilon(1e-9));
}

TEST_CASE("dpo requires at least one complete pair") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 4, 23);
  ExplorationCorpus empty;
  empty.world = world;
  for (const TagRecord& rec : ds.records) {
    CorpusEntry e;
    e.question = rec.question;
    e.truth = rec.answer;
    e.backbone = rec.reasoning;
    empty.entries.push_back(e);
  }
  CHECK_THROWS_AS(train_dpo(empty, fast_config(1), ModelConfig{}), DataError);
}

TEST_CASE("orpo trains deterministically; zero weight reduces to sft on chosen paths") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 20, 29);
  const ExplorationCorpus corpus = explored(ds, 31);
  REQUIRE(corpus.total_pairs() > 0);

  TrainConfig cfg = fast_config(51, 3);
  const TrainResult a = train_orpo(ds, corpus, cfg, ModelConfig{});
  const TrainResult b = train_orpo(ds, corpus, cfg, ModelConfig{});
  CHECK(model_checksum(a.model) == model_checksum(b.model));

  // weight 0: the step losses equal plain NLL of the chosen paths
  TrainConfig plain = cfg;
  plain.orpo_weight = 0.0;
  const TrainResult c = train_orpo(ds, corpus, plain, ModelConfig{});
  double nll0 = 0.0;
  {
    const PolicyModel init = init_model(world, ModelConfig{}, plain.seed);
    // recompute the first batch's mean chosen-path NLL
    std::vector<const CorpusEntry*> with_pairs;
    for (const CorpusEntry& e : corpus.entries)
      if (!e.pairs.empty()) with_pairs.push_back(&e);
    Rng rng(derive_seed(plain.seed, "batch", 0));
    const std::vector<std::size_t> order = rng.permutation(with_pairs.size());
    const std::size_t bsz = std::min<std::size_t>(order.size(), static_cast<std::size_t>(plain.batch_size));
    for (std::size_t b2 = 0; b2 < bsz; ++b2) {
      const CorpusEntry& e = *with_pairs[order[b2]];
      const auto wp = earliest_whole_path_pair(e);
      nll0 += -path_loglik(init, e.question, wp->chosen) / static_cast<double>(bsz);
    }
  }
  REQUIRE_FALSE(c.log.steps.empty());
  CHECK(c.log.steps.front().total == Approx(nll0).epsilon(1e-9));
}

TEST_CASE("training aborts on a non-finite loss with the batch identified") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 8, 37);
  TrainConfig cfg = fast_config(61, 3);
  cfg.batch_size = 2;
  cfg.learning_rate = 1e308;  // two same-direction steps push parameters to infinity
  CHECK_THROWS_AS(train_sft(ds, cfg, ModelConfig{}), NumericError);
}

TEST_CASE("training log files are written") {
  const WorldConfig world = tiny_world();
  const Dataset ds = train_dataset(world, 8, 43);
  const TrainResult run = train_sft(ds, fast_config(71, 2), ModelConfig{});
  const auto dir = scratch_dir("trainlog");
  write_training_log(run.log, dir);
  CHECK(read_file(dir / "steps.csv").starts_with("step,epoch,j_ref"));
  CHECK(read_file(dir / "epochs.csv").starts_with("epoch,mean_loss"));
  CHECK_FALSE(read_file(dir / "training_summary.json").empty());
}
