#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "common.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/model.hpp"

using namespace srpo;
using namespace srpo::testing;
using doctest::Approx;

namespace {

// M=4, always 2 facts, sums only: after [OBS0, OBS1, FLAG, COMPUTE] exactly
// the 5 terminals ANSWER(0..3), REFUSE remain legal.
WorldConfig five_legal_world() {
  WorldConfig cfg = WorldConfig::defaults();
  cfg.num_entities = 4;
  cfg.value_modulus = 4;
  cfg.facts_min = 2;
  cfg.facts_max = 2;
  cfg.max_path_len = 8;
  cfg.hazard_pairs = {{0, 1, 0}};
  return cfg;
}

const std::vector<Step> kFiveLegalPrefix = {obs(0), obs(1), flag(), compute()};

}  // namespace

TEST_CASE("fresh model is uniform over legal steps") {
  const WorldConfig world = five_legal_world();
  const PolicyModel model = init_model(world, ModelConfig{}, 1);
  const Question q = sum_question(world, "u", {{0, 1}, {2, 3}});

  const auto z = logits(model, q, {});
  int legal = 0;
  for (double v : z) {
    if (v != kNegInf) {
      CHECK(v == 0.0);  // zero projection: every unmasked logit is exactly 0
      ++legal;
    }
  }
  CHECK(legal == 9);

  // log softmax over the 5-terminal context equals log(1/5)
  const double lp = step_logprob(model, q, kFiveLegalPrefix, refuse());
  CHECK(lp == Approx(-1.6094379124341003).epsilon(1e-12));
}

TEST_CASE("logits are pure and reject terminated prefixes") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = randomized_model(world, ModelConfig{}, 3);
  const Question q = mix_question(world, "p", {{0, 1}, {1, 2}}, 0, 1);
  const std::vector<Step> prefix = {obs(0)};
  CHECK(logits(model, q, prefix) == logits(model, q, prefix));
  const std::vector<Step> done = {refuse()};
  CHECK_THROWS_AS(logits(model, q, done), DataError);
}

TEST_CASE("crafted logits reproduce the softmax arithmetic") {
  const WorldConfig world = five_legal_world();
  PolicyModel model = init_model(world, ModelConfig{}, 1);
  const Question q = sum_question(world, "c", {{0, 1}, {2, 3}});
  // push ANSWER(0) to logit 2 in every context via its bias
  model.out_bias[static_cast<std::size_t>(model.vocab().id(answer(0)))] = 2.0;
  const double lp = step_logprob(model, q, kFiveLegalPrefix, answer(0));
  CHECK(lp == Approx(-0.4326529029917916).epsilon(1e-12));  // 2 - log(e^2 + 4)
}

TEST_CASE("masked step yields -inf, not an exception") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = init_model(world, ModelConfig{}, 1);
  const Question q = sum_question(world, "m", {{0, 1}, {1, 2}});
  CHECK(step_logprob(model, q, {}, chk()) == kNegInf);  // CHK illegal on non-mix
  CHECK_FALSE(step_is_legal(model, q, {}, chk()));
  CHECK(step_is_legal(model, q, {}, obs(0)));
}

TEST_CASE("normalization: legal step probabilities sum to one") {
  const WorldConfig world = tiny_world();
  const Question q = mix_question(world, "n", {{0, 1}, {1, 2}, {4, 3}}, 0, 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PolicyModel model = randomized_model(world, ModelConfig{}, seed);
    for (const std::vector<Step> prefix :
         {std::vector<Step>{}, {obs(0)}, {obs(0), obs(1), chk()}, {obs(2), flag()}}) {
      double total = 0.0;
      for (const Step& s : legal_next_steps(q, prefix, world))
        total += std::exp(step_logprob(model, q, prefix, s));
      CHECK(total == Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("path loglik sums step logprobs and telescopes over continuations") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = randomized_model(world, ModelConfig{}, 11);
  const Question q = mix_question(world, "t", {{0, 1}, {1, 2}}, 0, 1);
  const ReasoningPath path = make_path("t", PathKind::sampled_backbone, {obs(0), obs(1), chk(), flag(), refuse()});

  double manual = 0.0;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    manual += step_logprob(model, q, std::span<const Step>(path.steps.data(), i), path.steps[i]);
  }
  CHECK(path_loglik(model, q, path) == Approx(manual).epsilon(1e-12));
  CHECK(path_loglik(model, q, path) <= 0.0);

  // loglik(prefix (+) cont) - loglik(prefix steps) == continuation loglik
  const Prefix prefix = path_prefix(path, 3);
  const Continuation cont = path_suffix(path, 3);
  const double whole = path_loglik(model, q, path);
  const double pre = steps_loglik(model, q, {}, prefix.steps);
  const double tail = steps_loglik(model, q, prefix.steps, cont.steps);
  CHECK(whole - pre == Approx(tail).epsilon(1e-12));
}

TEST_CASE("illegal paths are rejected with an error, not -inf") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = init_model(world, ModelConfig{}, 1);
  const Question q = sum_question(world, "i", {{0, 1}, {1, 2}});
  const ReasoningPath bad = make_path("i", PathKind::sampled_backbone, {chk(), refuse()});
  CHECK_THROWS_AS(path_loglik(model, q, bad), DataError);
}

TEST_CASE("sampling: temperature to zero approaches greedy argmax decoding") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = randomized_model(world, ModelConfig{}, 17, 0.8);
  const Question q = mix_question(world, "g", {{0, 2}, {1, 4}}, 0, 1);

  // explicit greedy decode
  std::vector<Step> greedy;
  while (true) {
    const auto legal = legal_next_steps(q, greedy, world);
    Step best = legal.front();
    double best_lp = -1e300;
    for (const Step& s : legal) {
      const double lp = step_logprob(model, q, greedy, s);
      if (lp > best_lp) {
        best_lp = lp;
        best = s;
      }
    }
    greedy.push_back(best);
    if (best.is_terminal() || greedy.size() >= static_cast<std::size_t>(world.max_path_len)) break;
  }

  Rng rng(404);
  const ReasoningPath cold = sample_path(model, q, 1e-6, rng);
  CHECK(cold.steps == greedy);
}

TEST_CASE("sampling is deterministic per seed and matches the conditional measure") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = randomized_model(world, ModelConfig{}, 23);
  const Question q = mix_question(world, "d", {{0, 2}, {1, 4}}, 0, 1);

  Rng r1(99);
  Rng r2(99);
  const ReasoningPath a = sample_path(model, q, 0.7, r1);
  const ReasoningPath b = sample_path(model, q, 0.7, r2);
  CHECK(a.steps == b.steps);

  // root-conditioned continuation draws the same sequence as sample_path
  Rng r3(99);
  const Continuation c = sample_continuation(model, q, {}, 0.7, r3);
  CHECK(c.steps == a.steps);

  Rng r4(1234);
  Rng r5(1234);
  const std::vector<Step> prefix = {obs(0)};
  CHECK(sample_continuation(model, q, prefix, 0.5, r4).steps ==
        sample_continuation(model, q, prefix, 0.5, r5).steps);
}

TEST_CASE("sampling truncates at max_len and flags it") {
  WorldConfig world = tiny_world();
  world.max_path_len = 3;
  const PolicyModel model = init_model(world, ModelConfig{}, 1);
  const Question q = mix_question(world, "tr", {{0, 2}, {1, 4}, {2, 1}}, 0, 1);
  int truncated = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    const ReasoningPath path = sample_path(model, q, 1.0, rng);
    CHECK(path.steps.size() <= 3);
    if (!path.terminated()) {
      CHECK(path.truncated);
      ++truncated;
    }
  }
  CHECK(truncated > 0);  // uniform draws over 9ish legal steps truncate often at len 3

  // one step before a forced terminal: every non-terminal is consumed
  WorldConfig forced_world = five_legal_world();
  const PolicyModel fm = init_model(forced_world, ModelConfig{}, 1);
  const Question fq = sum_question(forced_world, "f", {{0, 1}, {2, 3}});
  Rng rng(7);
  const Continuation cont = sample_continuation(fm, fq, kFiveLegalPrefix, 0.5, rng);
  CHECK(cont.steps.size() == 1);
  CHECK(cont.steps.back().is_terminal());
}

TEST_CASE("empirical step frequencies match softmax at both temperatures (chi-square)") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = randomized_model(world, ModelConfig{}, 31, 0.6);
  const Question q = mix_question(world, "chi", {{0, 2}, {1, 4}}, 0, 1);
  const std::vector<Step> prefix = {obs(0), obs(1)};
  const auto legal = legal_next_steps(q, prefix, world);
  const StepVocabulary vocab = world.vocabulary();

  for (double temperature : {0.5, 1.0}) {
    std::vector<double> p(legal.size());
    {
      const auto z = logits(model, q, prefix);
      double zmax = -1e300;
      for (const Step& s : legal) zmax = std::max(zmax, z[static_cast<std::size_t>(vocab.id(s))]);
      double total = 0.0;
      for (std::size_t i = 0; i < legal.size(); ++i) {
        p[i] = std::exp((z[static_cast<std::size_t>(vocab.id(legal[i]))] - zmax) / temperature);
        total += p[i];
      }
      for (double& v : p) v /= total;
    }
    const int n = 10000;
    std::vector<int> counts(legal.size(), 0);
    Rng rng(derive_seed(55, "chi", static_cast<std::uint64_t>(temperature * 10)));
    for (int i = 0; i < n; ++i) {
      Continuation cont = sample_continuation(model, q, prefix, temperature, rng);
      REQUIRE_FALSE(cont.steps.empty());
      const Step first = cont.steps.front();
      for (std::size_t k = 0; k < legal.size(); ++k)
        if (legal[k] == first) ++counts[k];
    }
    double stat = 0.0;
    for (std::size_t k = 0; k < legal.size(); ++k) {
      const double expected = n * p[k];
      stat += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    const double pval = chi_square_pvalue(stat, static_cast<int>(legal.size()) - 1);
    CHECK(pval > 0.01);
  }
}

TEST_CASE("temperature monotonicity: the argmax probability never increases with temperature") {
  const WorldConfig world = tiny_world();
  const Question q = mix_question(world, "mono", {{0, 2}, {1, 4}}, 0, 1);
  const StepVocabulary vocab = world.vocabulary();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PolicyModel model = randomized_model(world, ModelConfig{}, seed, 0.7);
    const auto legal = legal_next_steps(q, {}, world);
    const auto z = logits(model, q, {});
    double prev = 2.0;
    for (double temperature : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      double zmax = -1e300;
      for (const Step& s : legal) zmax = std::max(zmax, z[static_cast<std::size_t>(vocab.id(s))]);
      double total = 0.0;
      double top = 0.0;
      for (const Step& s : legal) {
        const double w = std::exp((z[static_cast<std::size_t>(vocab.id(s))] - zmax) / temperature);
        total += w;
        if (z[static_cast<std::size_t>(vocab.id(s))] == zmax) top = std::max(top, w);
      }
      const double p_top = top / total;
      CHECK(p_top <= prev + 1e-12);
      prev = p_top;
    }
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = randomized_model(world, ModelConfig{}, 77);
  const auto dir = scratch_dir("ckpt");
  save_checkpoint(model, dir / "m.ckpt", "{\"method\":\"test\"}");
  const PolicyModel back = load_checkpoint(dir / "m.ckpt");
  CHECK(model_checksum(back) == model_checksum(model));

  const Question q = mix_question(world, "rt", {{0, 2}, {1, 4}}, 0, 1);
  CHECK(logits(back, q, {}) == logits(model, q, {}));
}

TEST_CASE("checkpoint tampering and version mismatch are rejected") {
  const WorldConfig world = tiny_world();
  const PolicyModel model = init_model(world, ModelConfig{}, 5);
  const auto dir = scratch_dir("ckpt2");
  save_checkpoint(model, dir / "m.ckpt");

  std::string bytes = read_file(dir / "m.ckpt");
  bytes[bytes.size() / 2] ^= 0x10;
  write_file(dir / "tampered.ckpt", bytes);
  CHECK_THROWS_AS(load_checkpoint(dir / "tampered.ckpt"), DataError);

  // bump the version field (offset 8..11) and re-stamp the checksum
  std::string vbytes = read_file(dir / "m.ckpt");
  vbytes[8] = 2;
  vbytes.resize(vbytes.size() - 8);
  const std::uint64_t sum = fnv1a(vbytes);
  vbytes.append(reinterpret_cast<const char*>(&sum), 8);
  write_file(dir / "future.ckpt", vbytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "future.ckpt"),
                       doctest::Contains("schema version"), DataError);

  write_file(dir / "junk.ckpt", "definitely not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), DataError);
}
