#include "srpo/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "json_io.hpp"
#include "srpo/config.hpp"
#include "srpo/dataset.hpp"
#include "srpo/errors.hpp"
#include "srpo/eval.hpp"
#include "srpo/explore.hpp"
#include "srpo/io.hpp"
#include "srpo/loss.hpp"
#include "srpo/manifest.hpp"
#include "srpo/model.hpp"
#include "srpo/pipeline.hpp"
#include "srpo/train.hpp"
#include "srpo/version.hpp"

namespace srpo {

namespace {

namespace fs = std::filesystem;
using jsonio::json;

RunConfig load_config_opt(const std::string& path) {
  return path.empty() ? RunConfig::defaults() : load_config(path);
}

// Applies the configured index split. "all" uses every record.
Dataset select_split(const Dataset& ds, const std::string& split, double holdout_fraction) {
  if (split == "all") return ds;
  DatasetSplit s = split_dataset(ds, holdout_fraction);
  if (split == "train") return std::move(s.train);
  if (split == "holdout") return std::move(s.holdout);
  if (split == "holdout-hazardous") return hazardous_subset(s.holdout);
  throw ConfigError("unknown split \"" + split + "\" (expected all|train|holdout|holdout-hazardous)");
}

struct ManifestBuilder {
  RunManifest m;
  fs::path dir;

  ManifestBuilder(std::string subcommand, const fs::path& out_dir, std::uint64_t seed, const RunConfig& cfg) {
    m.subcommand = std::move(subcommand);
    m.tool_version = kToolVersion;
    m.master_seed = seed;
    m.config_json = config_to_json_text(cfg);
    m.started_at = iso8601_now();
    dir = out_dir;
    fs::create_directories(dir);
  }

  void input(const fs::path& p) { m.inputs[p.string()] = file_checksum(p); }
  void output(const std::string& rel) { m.outputs[rel] = file_checksum(dir / rel); }
  void note(const std::string& key, const std::string& value) { m.notes[key] = value; }

  void finish() {
    m.finished_at = iso8601_now();
    write_manifest(m, dir / "manifest.json");
  }
};

std::string dc_realization_note(const ModelConfig& cfg) {
  return cfg.warm_start_examples > 0 ? "warm-start(" + std::to_string(cfg.warm_start_examples) + ")"
                                     : "grammar-mask";
}

int run_gen_data(int n, std::uint64_t seed, const std::string& config_path, const std::string& out) {
  const RunConfig cfg = load_config_opt(config_path);
  ManifestBuilder mb("gen-data", out, seed, cfg);
  const PipelineReport report = run_pipeline(n, seed, cfg.world, cfg.pipeline, mb.dir / "dataset.jsonl");
  write_file(mb.dir / "pipeline_report.json", report.to_json_text());
  mb.output("dataset.jsonl");
  mb.output("pipeline_report.json");
  mb.finish();
  std::cout << "gen-data: wrote " << report.summarized << " records (" << report.queried << " queried, yield "
            << report.yield() << ") to " << (mb.dir / "dataset.jsonl").string() << "\n";
  return 0;
}

int run_explore(const std::string& model_path, const std::string& data_path, std::uint64_t seed,
                const std::string& config_path, const std::string& split, const std::string& out) {
  const RunConfig cfg = load_config_opt(config_path);
  if (!fs::exists(data_path)) throw DataError("explore: missing input dataset " + data_path);
  const Dataset full = load_dataset(data_path);
  const Dataset ds = select_split(full, split, cfg.eval.holdout_fraction);
  if (ds.records.empty()) throw DataError("explore: selected split is empty");

  PolicyModel model = model_path.empty() ? init_model(ds.world, cfg.model, cfg.train.seed)
                                         : load_checkpoint(model_path);
  ManifestBuilder mb("explore", out, seed, cfg);
  mb.input(data_path);
  if (!model_path.empty()) mb.input(model_path);

  CorpusReport report;
  const ExplorationCorpus corpus = explore_dataset(model, ds, cfg.explore, seed, cfg.workers, &report);
  save_corpus(corpus, mb.dir / "corpus.jsonl");
  write_file(mb.dir / "corpus_report.json", report.to_json_text());
  mb.output("corpus.jsonl");
  mb.output("corpus_report.json");
  mb.note("model_checksum", model_checksum(model));
  mb.note("split", split);
  mb.note("dc_realization", dc_realization_note(cfg.model));
  mb.finish();
  std::cout << "explore: " << report.pairs << " pairs over " << report.questions << " questions ("
            << report.truncated_backbones << " truncated backbones)\n";
  return 0;
}

int run_train(const std::string& method, const std::string& data_path, const std::string& corpus_path,
              const std::string& config_path, std::uint64_t seed, const std::string& out) {
  RunConfig cfg = load_config_opt(config_path);
  cfg.train.seed = seed;
  if (!fs::exists(data_path)) throw DataError("train: missing input dataset " + data_path);
  const Dataset full = load_dataset(data_path);
  DatasetSplit split = split_dataset(full, cfg.eval.holdout_fraction);
  if (split.train.records.empty()) throw DataError("train: training split is empty");

  const bool needs_corpus = method != "sft";
  if (needs_corpus && corpus_path.empty())
    throw DataError("train: method " + method + " requires --corpus (exploration corpus file)");
  if (needs_corpus && !fs::exists(corpus_path))
    throw DataError("train: missing input corpus " + corpus_path);

  ExplorationCorpus corpus;
  if (needs_corpus) corpus = load_corpus(corpus_path, split.train);

  ManifestBuilder mb("train", out, seed, cfg);
  mb.input(data_path);
  if (needs_corpus) mb.input(corpus_path);

  TrainResult result = [&] {
    if (method == "srpo") return train_srpo(split.train, corpus, cfg.explore, cfg.train, cfg.model, &split.holdout);
    if (method == "sft") return train_sft(split.train, cfg.train, cfg.model, &split.holdout);
    if (method == "dpo") return train_dpo(corpus, cfg.train, cfg.model, &split.holdout);
    if (method == "orpo") return train_orpo(split.train, corpus, cfg.train, cfg.model, &split.holdout);
    throw ConfigError("train: unknown method \"" + method + "\" (expected srpo|sft|dpo|orpo)");
  }();

  json trainer_meta{{"method", method},
                    {"train", jsonio::parse_or_data_error(train_config_to_json_text(cfg.train), "train config")},
                    {"dc_realization", dc_realization_note(cfg.model)}};
  save_checkpoint(result.model, mb.dir / "model.ckpt", trainer_meta.dump());
  write_training_log(result.log, mb.dir);
  mb.output("model.ckpt");
  mb.output("steps.csv");
  mb.output("epochs.csv");
  mb.output("training_summary.json");
  mb.note("method", method);
  mb.note("model_checksum", model_checksum(result.model));
  mb.note("dc_realization", dc_realization_note(cfg.model));
  mb.finish();
  std::cout << "train(" << method << "): " << result.log.steps.size() << " steps, final loss "
            << (result.log.steps.empty() ? 0.0 : result.log.steps.back().total) << ", checkpoint "
            << (mb.dir / "model.ckpt").string() << "\n";
  return 0;
}

void write_metrics_files(const MetricsReport& r, const fs::path& dir) {
  write_file(dir / "metrics.json", r.to_json_text());
  std::ostringstream per_q;
  per_q << "question_id,category,hazardous,samples,sr,er,ser\n";
  for (const QuestionMetrics& q : r.per_question) {
    per_q << q.id << ',' << q.category.primary << '/' << q.category.secondary << '/' << q.category.tertiary << ','
          << (q.hazardous ? 1 : 0) << ',' << q.samples << ',' << q.sr << ',' << q.er << ',' << q.ser << '\n';
  }
  write_file(dir / "per_question.csv", per_q.str());
  std::ostringstream per_c;
  per_c << "category,n,sr,er,ser\n";
  for (const auto& [key, cm] : r.per_category)
    per_c << key << ',' << cm.n << ',' << cm.sr << ',' << cm.er << ',' << cm.ser << '\n';
  write_file(dir / "per_category.csv", per_c.str());
}

int run_eval(const std::string& model_path, const std::string& data_path, int samples, std::uint64_t seed,
             double temperature, const std::string& split, bool exact, const std::string& config_path,
             const std::string& out) {
  const RunConfig cfg = load_config_opt(config_path);
  if (!fs::exists(model_path)) throw DataError("eval: missing input checkpoint " + model_path);
  if (!fs::exists(data_path)) throw DataError("eval: missing input dataset " + data_path);
  const PolicyModel model = load_checkpoint(model_path);
  const Dataset ds = select_split(load_dataset(data_path), split, cfg.eval.holdout_fraction);
  if (ds.records.empty()) throw DataError("eval: selected split is empty");
  const ExactJudge judge(ds.world);

  ManifestBuilder mb("eval", out, seed, cfg);
  mb.input(model_path);
  mb.input(data_path);
  const MetricsReport report = exact
                                   ? exact_metrics(model, ds, judge, temperature)
                                   : evaluate(model, ds, judge, samples, temperature, seed, cfg.workers);
  write_metrics_files(report, mb.dir);
  mb.output("metrics.json");
  mb.output("per_question.csv");
  mb.output("per_category.csv");
  mb.note("split", split);
  mb.note("model_checksum", model_checksum(model));
  mb.finish();
  std::cout << "eval: SR " << report.sr << "  ER " << report.er << "  SER " << report.ser
            << "  hazard-compliance " << report.hazard_compliance_rate << "\n";
  return 0;
}

ExperimentConfig experiment_config(const RunConfig& cfg) {
  ExperimentConfig ec;
  ec.train = cfg.train;
  ec.explore = cfg.explore;
  ec.model = cfg.model;
  ec.eval_samples = cfg.eval.samples_per_q;
  ec.eval_temperature = cfg.eval.temperature;
  return ec;
}

int run_sweep(const std::string& data_path, const std::string& corpus_path, const std::string& config_path,
              const std::string& values_csv, int num_seeds, std::uint64_t seed, const std::string& out) {
  const RunConfig cfg = load_config_opt(config_path);
  if (!fs::exists(data_path)) throw DataError("sweep: missing input dataset " + data_path);
  if (!fs::exists(corpus_path)) throw DataError("sweep: missing input corpus " + corpus_path);

  std::vector<double> values;
  {
    std::istringstream ss(values_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        values.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("sweep: bad lambda value \"" + tok + "\"");
      }
    }
  }

  const Dataset full = load_dataset(data_path);
  DatasetSplit split = split_dataset(full, cfg.eval.holdout_fraction);
  const ExplorationCorpus corpus = load_corpus(corpus_path, split.train);
  const ExactJudge judge(full.world);

  ManifestBuilder mb("sweep", out, seed, cfg);
  mb.input(data_path);
  mb.input(corpus_path);
  const SweepReport report =
      lambda_sweep(split.train, split.holdout, corpus, experiment_config(cfg), values, num_seeds, seed, judge);
  write_file(mb.dir / "sweep_rows.csv", report.rows_csv());
  write_file(mb.dir / "sweep_series.csv", report.series_csv());
  json summary{{"rows", report.rows.size()}, {"values", report.values}, {"seeds", report.num_seeds}};
  for (double v : report.values) summary["mean_ser"][std::to_string(v)] = report.mean_ser(v);
  write_file(mb.dir / "sweep_summary.json", summary.dump(2) + "\n");
  mb.output("sweep_rows.csv");
  mb.output("sweep_series.csv");
  mb.output("sweep_summary.json");
  mb.finish();
  std::cout << "sweep: " << report.rows.size() << " rows (" << values.size() << " values x " << num_seeds
            << " seeds)\n";
  return 0;
}

int run_compare(const std::string& data_path, const std::string& corpus_path, const std::string& config_path,
                const std::string& methods_csv, int num_seeds, std::uint64_t seed, const std::string& out) {
  const RunConfig cfg = load_config_opt(config_path);
  if (!fs::exists(data_path)) throw DataError("compare: missing input dataset " + data_path);
  if (!fs::exists(corpus_path)) throw DataError("compare: missing input corpus " + corpus_path);

  std::vector<std::string> methods;
  {
    std::istringstream ss(methods_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) methods.push_back(tok);
  }

  const Dataset full = load_dataset(data_path);
  DatasetSplit split = split_dataset(full, cfg.eval.holdout_fraction);
  const ExplorationCorpus corpus = load_corpus(corpus_path, split.train);
  const ExactJudge judge(full.world);

  ManifestBuilder mb("compare", out, seed, cfg);
  mb.input(data_path);
  mb.input(corpus_path);
  const CompareReport report =
      compare_methods(split.train, split.holdout, corpus, experiment_config(cfg), methods, num_seeds, seed, judge);
  write_file(mb.dir / "compare_rows.csv", report.rows_csv());
  write_file(mb.dir / "compare_deltas.csv", report.deltas_csv());
  mb.output("compare_rows.csv");
  mb.output("compare_deltas.csv");
  mb.finish();
  std::cout << "compare: " << report.rows.size() << " rows, " << report.deltas.size() << " paired deltas\n";
  return 0;
}

int run_gradcheck(const std::string& config_path, double eps, std::uint64_t seed, const std::string& out) {
  const RunConfig cfg = load_config_opt(config_path);

  // Self-contained check world: a few generated questions with synthetic
  // contrastive pairs expanded from their reference paths.
  Rng rng(derive_seed(seed, "gradcheck", 0));
  PolicyModel model = init_model(cfg.world, cfg.model, derive_seed(seed, "gradcheck-model", 0));
  // Random parameters rather than the zero init so the check is not run at
  // a symmetric point.
  for (auto view : param_views(model))
    for (double& w : *view.data) w += rng.symmetric(0.2);

  json results = json::object();
  double worst = 0.0;
  const int probes = 60;
  for (int qi = 0; qi < 3; ++qi) {
    const GeneratedQuestion g = gen_question(rng, cfg.world, "gc" + std::to_string(qi));
    std::vector<ContrastivePair> pairs;
    for (int i = 1; i < static_cast<int>(g.reference.steps.size()); ++i) {
      ExpandResult r = expand_step(model, g.question, g.truth, g.reference, i, cfg.explore, rng);
      if (r.pair) pairs.push_back(std::move(*r.pair));
    }
    const double e_ref = finite_diff_check(model, loss_ref_fn(g.question, g.reference), eps, probes, rng);
    results["j_ref/q" + std::to_string(qi)] = e_ref;
    worst = std::max(worst, e_ref);
    for (double k : {0.5, 1.0, 2.0}) {
      const double e = finite_diff_check(model, loss_align_total_fn(g.question, pairs, k), eps, probes, rng);
      results["j_align/k=" + std::to_string(k) + "/q" + std::to_string(qi)] = e;
      worst = std::max(worst, e);
    }
    for (double lambda : {0.0, 0.3, 1.0}) {
      const double e = finite_diff_check(
          model, loss_total_fn(g.question, g.reference, pairs, lambda, cfg.train.k), eps, probes, rng);
      results["total/lambda=" + std::to_string(lambda) + "/q" + std::to_string(qi)] = e;
      worst = std::max(worst, e);
    }
  }

  ManifestBuilder mb("gradcheck", out, seed, cfg);
  json report{{"epsilon", eps}, {"max_relative_error", worst}, {"per_loss", results}};
  write_file(mb.dir / "gradcheck_report.json", report.dump(2) + "\n");
  mb.output("gradcheck_report.json");
  mb.finish();
  std::cout << "gradcheck: max relative error " << worst << " (eps " << eps << ")\n";
  return worst < 1e-4 ? 0 : static_cast<int>(ErrorClass::numeric);
}

int run_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / "manifest.json")) {
    std::string have;
    if (fs::exists(dir))
      for (const auto& e : fs::directory_iterator(dir)) have += e.path().filename().string() + " ";
    throw DataError("report: " + (dir / "manifest.json").string() +
                    " not found; expected a run directory containing manifest.json plus its outputs (found: " +
                    (have.empty() ? "nothing" : have) + ")");
  }
  const RunManifest m = read_manifest(dir / "manifest.json");
  verify_manifest_outputs(m, dir);

  std::ostringstream out;
  out << "run: " << m.subcommand << " (tool " << m.tool_version << ", seed " << m.master_seed << ")\n";
  out << "started " << m.started_at << ", finished " << m.finished_at << "\n";
  for (const auto& [rel, sum] : m.outputs) out << "  output " << rel << "  " << sum << "\n";

  std::string plot_data;
  if (fs::exists(dir / "metrics.json")) {
    const json j = jsonio::parse_or_data_error(read_file(dir / "metrics.json"), "metrics.json");
    out << "\nmetric        value\n";
    for (const char* key : {"sr", "er", "ser", "hazard_compliance_rate", "accuracy"})
      out << "  " << key << std::string(22 - std::string(key).size(), ' ') << j.at(key).get<double>() << "\n";
    plot_data = "metric,value\nsr," + std::to_string(j.at("sr").get<double>()) + "\ner," +
                std::to_string(j.at("er").get<double>()) + "\nser," + std::to_string(j.at("ser").get<double>()) +
                "\n";
  }
  if (fs::exists(dir / "sweep_series.csv")) {
    out << "\nlambda sweep (SER):\n" << read_file(dir / "sweep_series.csv");
    plot_data = read_file(dir / "sweep_series.csv");
  }
  if (fs::exists(dir / "compare_rows.csv")) {
    out << "\nmethod comparison:\n" << read_file(dir / "compare_rows.csv");
    if (fs::exists(dir / "compare_deltas.csv"))
      out << "\npaired deltas vs srpo:\n" << read_file(dir / "compare_deltas.csv");
    plot_data = read_file(dir / "compare_rows.csv");
  }
  if (fs::exists(dir / "pipeline_report.json")) {
    out << "\npipeline report:\n" << read_file(dir / "pipeline_report.json");
  }

  std::cout << out.str();
  write_file(dir / "report.txt", out.str());
  if (!plot_data.empty()) write_file(dir / "plot_data.csv", plot_data);
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"srpo: a desk-scale lab for safety-aware reasoning path optimization"};
  app.require_subcommand(0, 1);
  app.set_version_flag("--version", std::string("srpo ") + kToolVersion + " (dataset schema " +
                                        std::to_string(kDatasetSchemaVersion) + ", corpus schema " +
                                        std::to_string(kCorpusSchemaVersion) + ", checkpoint schema " +
                                        std::to_string(kCheckpointSchemaVersion) + ")");

  std::function<int()> action;

  // gen-data
  {
    auto* cmd = app.add_subcommand("gen-data", "generate a dataset through the five-stage pipeline");
    auto n = std::make_shared<int>(100);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("gen-data-out");
    cmd->add_option("--n", *n, "accepted records to produce")->required();
    cmd->add_option("--seed", *seed, "master seed");
    cmd->add_option("--config", *config, "config file (JSON)");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback([=, &action] { action = [=] { return run_gen_data(*n, *seed, *config, *out); }; });
  }
  // explore
  {
    auto* cmd = app.add_subcommand("explore", "sample backbones and build contrastive pairs");
    auto model = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(1);
    auto config = std::make_shared<std::string>();
    auto split = std::make_shared<std::string>("train");
    auto out = std::make_shared<std::string>("explore-out");
    cmd->add_option("--model", *model, "checkpoint to explore with (default: fresh init)");
    cmd->add_option("--data", *data, "dataset file")->required();
    cmd->add_option("--seed", *seed, "master seed");
    cmd->add_option("--config", *config, "config file (JSON)");
    cmd->add_option("--split", *split, "all|train|holdout|holdout-hazardous");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback(
        [=, &action] { action = [=] { return run_explore(*model, *data, *seed, *config, *split, *out); }; });
  }
  // train
  {
    auto* cmd = app.add_subcommand("train", "train srpo or a baseline");
    auto method = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>("train-out");
    cmd->add_option("--method", *method, "srpo|sft|dpo|orpo")->required();
    cmd->add_option("--data", *data, "dataset file")->required();
    cmd->add_option("--corpus", *corpus, "exploration corpus file");
    cmd->add_option("--config", *config, "config file (JSON)");
    cmd->add_option("--seed", *seed, "master seed");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback(
        [=, &action] { action = [=] { return run_train(*method, *data, *corpus, *config, *seed, *out); }; });
  }
  // eval
  {
    auto* cmd = app.add_subcommand("eval", "sample and judge reasoning paths; SR/ER/SER report");
    auto model = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto samples = std::make_shared<int>(16);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto temperature = std::make_shared<double>(1.0);
    auto split = std::make_shared<std::string>("all");
    auto exact = std::make_shared<bool>(false);
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("eval-out");
    cmd->add_option("--model", *model, "checkpoint")->required();
    cmd->add_option("--data", *data, "dataset file")->required();
    cmd->add_option("--samples", *samples, "samples per question");
    cmd->add_option("--seed", *seed, "master seed");
    cmd->add_option("--temperature", *temperature, "sampling temperature");
    cmd->add_option("--split", *split, "all|train|holdout|holdout-hazardous");
    cmd->add_flag("--exact", *exact, "exact enumeration instead of sampling");
    cmd->add_option("--config", *config, "config file (JSON)");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback([=, &action] {
      action = [=] {
        return run_eval(*model, *data, *samples, *seed, *temperature, *split, *exact, *config, *out);
      };
    });
  }
  // sweep
  {
    auto* cmd = app.add_subcommand("sweep", "lambda sweep over seeds");
    auto data = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto values = std::make_shared<std::string>("0.1,0.3,0.5,0.7,0.9");
    auto seeds = std::make_shared<int>(3);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>("sweep-out");
    cmd->add_option("--data", *data, "dataset file")->required();
    cmd->add_option("--corpus", *corpus, "exploration corpus file")->required();
    cmd->add_option("--config", *config, "config file (JSON)");
    cmd->add_option("--values", *values, "comma-separated lambda values");
    cmd->add_option("--seeds", *seeds, "number of seeds per value");
    cmd->add_option("--seed", *seed, "base master seed");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback([=, &action] {
      action = [=] { return run_sweep(*data, *corpus, *config, *values, *seeds, *seed, *out); };
    });
  }
  // compare
  {
    auto* cmd = app.add_subcommand("compare", "srpo vs optimization baselines");
    auto data = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto methods = std::make_shared<std::string>("srpo,sft,dpo,orpo");
    auto seeds = std::make_shared<int>(3);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>("compare-out");
    cmd->add_option("--data", *data, "dataset file")->required();
    cmd->add_option("--corpus", *corpus, "exploration corpus file")->required();
    cmd->add_option("--config", *config, "config file (JSON)");
    cmd->add_option("--methods", *methods, "comma-separated subset of srpo,sft,dpo,orpo");
    cmd->add_option("--seeds", *seeds, "number of seeds per method");
    cmd->add_option("--seed", *seed, "base master seed");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback([=, &action] {
      action = [=] { return run_compare(*data, *corpus, *config, *methods, *seeds, *seed, *out); };
    });
  }
  // gradcheck
  {
    auto* cmd = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
    auto config = std::make_shared<std::string>();
    auto eps = std::make_shared<double>(1e-5);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>("gradcheck-out");
    cmd->add_option("--config", *config, "config file (JSON)");
    cmd->add_option("--eps", *eps, "finite-difference step");
    cmd->add_option("--seed", *seed, "master seed");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback([=, &action] { action = [=] { return run_gradcheck(*config, *eps, *seed, *out); }; });
  }
  // report
  {
    auto* cmd = app.add_subcommand("report", "render a run directory; verifies output checksums");
    auto dir = std::make_shared<std::string>();
    cmd->add_option("run_dir", *dir, "run directory containing manifest.json")->required();
    cmd->callback([=, &action] { action = [=] { return run_report(*dir); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return static_cast<int>(ErrorClass::config);
  }

  if (!action) {
    std::cerr << app.help();
    return static_cast<int>(ErrorClass::config);
  }

  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace srpo
