#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "common.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/path.hpp"
#include "srpo/rng.hpp"

using namespace srpo;
using namespace srpo::testing;

TEST_CASE("step token string round trip") {
  const std::vector<Step> steps = {obs(0), obs(3), chk(), flag(), compute(), answer(7), refuse()};
  for (const Step& s : steps) CHECK(step_from_string(step_to_string(s)) == s);
  CHECK_THROWS_AS(step_from_string("OBS"), DataError);
  CHECK_THROWS_AS(step_from_string("ANSWER()"), DataError);
  CHECK_THROWS_AS(step_from_string("banana"), DataError);
}

TEST_CASE("vocabulary ids are a bijection") {
  const StepVocabulary vocab(4, 10);
  CHECK(vocab.size() == 18);
  std::set<int> seen;
  for (int id = 0; id < vocab.size(); ++id) {
    const Step s = vocab.step(id);
    CHECK(vocab.id(s) == id);
    seen.insert(id);
  }
  CHECK(static_cast<int>(seen.size()) == vocab.size());
  CHECK_THROWS_AS(vocab.id(obs(4)), DataError);
  CHECK_THROWS_AS(vocab.id(answer(10)), DataError);
  CHECK_THROWS_AS(vocab.step(18), DataError);
}

TEST_CASE("payload present iff terminal") {
  CHECK(answer(3).payload().has_value());
  CHECK(answer(3).payload()->value() == 3);
  CHECK(refuse().payload().has_value());
  CHECK(refuse().payload()->is_refusal());
  CHECK_FALSE(obs(0).payload().has_value());
  CHECK_FALSE(chk().payload().has_value());
  CHECK_FALSE(flag().payload().has_value());
  CHECK_FALSE(compute().payload().has_value());
}

TEST_CASE("concat_path appends continuation to prefix") {
  const ReasoningPath prefix = make_path("q0", PathKind::sampled_backbone, {obs(0)});
  const Continuation cont{{chk(), answer(3)}, false};
  const ReasoningPath joined = concat_path(prefix, cont, PathKind::positive);
  CHECK(joined.steps == std::vector<Step>{obs(0), chk(), answer(3)});
  CHECK(joined.kind == PathKind::positive);
  CHECK(joined.question_id == "q0");
}

TEST_CASE("concat_path rejects empty prefix") {
  const ReasoningPath empty = make_path("q0", PathKind::sampled_backbone, {});
  CHECK_THROWS_AS(concat_path(empty, Continuation{{answer(1)}, false}, PathKind::positive), DataError);
}

TEST_CASE("concat_path rejects terminated prefix") {
  const ReasoningPath done = make_path("q0", PathKind::sampled_backbone, {obs(0), refuse()});
  CHECK_THROWS_AS(concat_path(done, Continuation{{answer(1)}, false}, PathKind::positive), DataError);
}

TEST_CASE("root prefix concatenation is allowed") {
  const Prefix root{"q0", {}};
  const ReasoningPath p = concat_path(root, Continuation{{answer(2)}, false}, PathKind::negative);
  CHECK(p.steps.size() == 1);
}

TEST_CASE("verify matches terminal payload against truth") {
  const ReasoningPath a7 = make_path("q", PathKind::reference, {obs(0), answer(7)});
  const ReasoningPath rf = make_path("q", PathKind::reference, {obs(0), refuse()});
  CHECK(verify(a7, Answer::of(7)) == 1);
  CHECK(verify(rf, Answer::refusal()) == 1);
  CHECK(verify(a7, Answer::refusal()) == 0);
  CHECK(verify(rf, Answer::of(7)) == 0);
  CHECK(verify(a7, Answer::of(3)) == 0);
}

TEST_CASE("verify errors on unterminated path, distinct from 0") {
  const ReasoningPath open = make_path("q", PathKind::sampled_backbone, {obs(0), compute()});
  CHECK_THROWS_AS(verify(open, Answer::of(1)), DataError);
}

TEST_CASE("verify is pure") {
  const ReasoningPath p = make_path("q", PathKind::reference, {answer(2)});
  const int first = verify(p, Answer::of(2));
  for (int i = 0; i < 10; ++i) CHECK(verify(p, Answer::of(2)) == first);
}

TEST_CASE("path_prefix boundaries") {
  const ReasoningPath p = make_path("q", PathKind::reference, {obs(0), obs(1), compute(), answer(2)});
  CHECK(path_prefix(p, 3).steps == std::vector<Step>{obs(0), obs(1)});
  CHECK(path_prefix(p, 1).steps.empty());
  CHECK(path_prefix(p, 1).is_root());
  CHECK(path_prefix(p, 1).question_id == "q");
  CHECK_THROWS_AS(path_prefix(p, 6), DataError);
  CHECK_THROWS_AS(path_prefix(p, 0), DataError);
}

TEST_CASE("prefix plus suffix reconstructs the path exactly") {
  const ReasoningPath p = make_path("q", PathKind::reference, {obs(0), obs(1), chk(), flag(), refuse()});
  for (int i = 1; i <= static_cast<int>(p.steps.size()); ++i) {
    const Prefix pre = path_prefix(p, i);
    const Continuation suf = path_suffix(p, i);
    const ReasoningPath back = concat_path(pre, suf, p.kind);
    CHECK(back.steps == p.steps);
  }
}

TEST_CASE("validate_path rejects interior terminals and overlong paths") {
  ReasoningPath bad = make_path("q", PathKind::reference, {answer(1), obs(0)});
  CHECK_THROWS_AS(validate_path(bad), DataError);
  ReasoningPath empty = make_path("q", PathKind::reference, {});
  CHECK_THROWS_AS(validate_path(empty), DataError);
  ReasoningPath long_path = make_path("q", PathKind::reference, {obs(0), obs(1), compute(), answer(0)});
  CHECK_THROWS_AS(validate_path(long_path, 3), DataError);
  CHECK_NOTHROW(validate_path(long_path, 4));
}

TEST_CASE("path json round trip") {
  ReasoningPath p = make_path("q42", PathKind::positive, {obs(1), chk(), answer(9)});
  const ReasoningPath back = path_from_json(path_to_json(p));
  CHECK(back.question_id == p.question_id);
  CHECK(back.kind == p.kind);
  CHECK(back.steps == p.steps);
  CHECK(back.truncated == p.truncated);

  ReasoningPath t = make_path("q", PathKind::sampled_backbone, {obs(0)});
  t.truncated = true;
  CHECK(path_from_json(path_to_json(t)).truncated);

  CHECK_THROWS_AS(path_from_json("{not json"), DataError);
}

TEST_CASE("derived seeds separate by tag and index") {
  const std::uint64_t master = 7;
  CHECK(derive_seed(master, "a", 0) != derive_seed(master, "a", 1));
  CHECK(derive_seed(master, "a", 0) != derive_seed(master, "b", 0));
  CHECK(derive_seed(master, "a", 0) == derive_seed(master, "a", 0));
  CHECK(derive_seed(master, "a", 0) != derive_seed(master + 1, "a", 0));
}

TEST_CASE("rng uniform_int stays in range and covers values") {
  Rng rng(123);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t v = rng.uniform_int(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("rng categorical respects weights") {
  Rng rng(5);
  const std::vector<double> w = {0.0, 1.0, 3.0};
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) ++counts[rng.categorical(w)];
  CHECK(counts[0] == 0);
  CHECK(std::abs(counts[2] / 20000.0 - 0.75) < 0.02);
  CHECK_THROWS_AS(rng.categorical(std::vector<double>{0.0, 0.0}), NumericError);
}

TEST_CASE("file checksum detects a byte flip") {
  const auto dir = scratch_dir("io");
  write_file(dir / "a.txt", "hello world\n");
  const std::string before = file_checksum(dir / "a.txt");
  write_file(dir / "a.txt", "hello World\n");
  CHECK(file_checksum(dir / "a.txt") != before);
  CHECK_THROWS_AS(read_file(dir / "missing.txt"), IoError);
}
