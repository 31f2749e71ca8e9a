#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "common.hpp"
#include "srpo/cli.hpp"
#include "srpo/config.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/manifest.hpp"

using namespace srpo;
using namespace srpo::testing;

namespace {

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv;
  argv.push_back("srpo");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("empty config resolves to the published defaults") {
  const RunConfig cfg = parse_config_text("");
  CHECK(cfg.train.lambda == 0.3);
  CHECK(cfg.train.k == 1.0);
  CHECK(cfg.train.learning_rate == 5e-5);
  CHECK(cfg.train.batch_size == 8);
  CHECK(cfg.explore.temperature == 0.5);
  CHECK(cfg.explore.branch_budget == 16);
  CHECK(cfg.eval.temperature == 1.0);
  CHECK(cfg.world.num_entities == 12);
  CHECK(cfg.world.value_modulus == 10);
  CHECK(cfg.world.max_path_len == 10);

  const RunConfig braces = parse_config_text("{}");
  CHECK(braces.train.lambda == 0.3);
}

TEST_CASE("config validation rejects out-of-range values with key paths") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"train": {"lambda": -0.1}})"),
                       doctest::Contains("train.lambda"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"k": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"batch_size": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"explore": {"temperature": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"explore": {"branch_budget": 1}})"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"train": {"lambda": "big"}})"),
                       doctest::Contains("expected a number"), ConfigError);
}

TEST_CASE("unknown keys are rejected with a suggestion") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"train": {"lamda": 0.5}})"),
                       doctest::Contains("lambda"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"wolrd": {}})"), doctest::Contains("world"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"zzz_completely_unknown": 1}})"), ConfigError);
}

TEST_CASE("config echo parses back to the same values") {
  const RunConfig cfg = parse_config_text(R"({"train": {"lambda": 0.5, "epochs": 3}, "workers": 2})");
  const RunConfig back = parse_config_text(config_to_json_text(cfg));
  CHECK(back.train.lambda == 0.5);
  CHECK(back.train.epochs == 3);
  CHECK(back.workers == 2);
  CHECK(back.world.num_entities == cfg.world.num_entities);
}

TEST_CASE("manifest round trip and output verification") {
  const auto dir = scratch_dir("manifest");
  write_file(dir / "out.txt", "payload");
  RunManifest m;
  m.subcommand = "test";
  m.master_seed = 9;
  m.config_json = "{}";
  m.outputs["out.txt"] = file_checksum(dir / "out.txt");
  m.started_at = iso8601_now();
  m.finished_at = iso8601_now();
  write_manifest(m, dir / "manifest.json");

  const RunManifest back = read_manifest(dir / "manifest.json");
  CHECK(back.subcommand == "test");
  CHECK(back.master_seed == 9);
  CHECK_NOTHROW(verify_manifest_outputs(back, dir));

  write_file(dir / "out.txt", "tampered");
  CHECK_THROWS_WITH_AS(verify_manifest_outputs(back, dir), doctest::Contains("integrity"), DataError);
}

TEST_CASE("cli: exit codes for usage errors") {
  CHECK(run_cli({"definitely-not-a-subcommand"}) == 2);
  CHECK(run_cli({"gen-data", "--no-such-flag", "1"}) == 2);
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"--version"}) == 0);
}

TEST_CASE("cli: gen-data then report; manifests verify; reruns are byte-identical") {
  const auto dir = scratch_dir("cligen");
  const std::string out1 = (dir / "run1").string();
  const std::string out2 = (dir / "run2").string();
  CHECK(run_cli({"gen-data", "--n", "30", "--seed", "7", "--out", out1}) == 0);
  CHECK(run_cli({"gen-data", "--n", "30", "--seed", "7", "--out", out2}) == 0);
  CHECK(read_file(dir / "run1" / "dataset.jsonl") == read_file(dir / "run2" / "dataset.jsonl"));
  CHECK(read_file(dir / "run1" / "pipeline_report.json") == read_file(dir / "run2" / "pipeline_report.json"));

  const RunManifest m = read_manifest(dir / "run1" / "manifest.json");
  CHECK(m.subcommand == "gen-data");
  CHECK_NOTHROW(verify_manifest_outputs(m, dir / "run1"));

  CHECK(run_cli({"report", out1}) == 0);
  CHECK(read_file(dir / "run1" / "report.txt").find("gen-data") != std::string::npos);
}

TEST_CASE("cli: train without a corpus for srpo exits with the data code naming the input") {
  const auto dir = scratch_dir("clitrain");
  const std::string data_out = (dir / "data").string();
  REQUIRE(run_cli({"gen-data", "--n", "20", "--seed", "3", "--out", data_out}) == 0);
  const std::string dataset = (dir / "data" / "dataset.jsonl").string();
  CHECK(run_cli({"train", "--method", "srpo", "--data", dataset, "--out", (dir / "t").string()}) == 3);
  CHECK(run_cli({"train", "--method", "srpo", "--data", dataset, "--corpus",
                 (dir / "data" / "missing.jsonl").string(), "--out", (dir / "t").string()}) == 3);
}

TEST_CASE("cli: report on an empty directory lists what was expected") {
  const auto dir = scratch_dir("cliempty");
  CHECK(run_cli({"report", dir.string()}) == 3);
  // a tampered output makes report fail with the data exit code
  const std::string out = (dir / "run").string();
  REQUIRE(run_cli({"gen-data", "--n", "10", "--seed", "2", "--out", out}) == 0);
  write_file(dir / "run" / "dataset.jsonl", "corrupted");
  CHECK(run_cli({"report", out}) == 3);
}

TEST_CASE("cli: gradcheck runs and writes its report") {
  const auto dir = scratch_dir("cligrad");
  const std::string out = (dir / "g").string();
  CHECK(run_cli({"gradcheck", "--eps", "1e-5", "--seed", "4", "--out", out}) == 0);
  const std::string report = read_file(dir / "g" / "gradcheck_report.json");
  CHECK(report.find("max_relative_error") != std::string::npos);
}
