#include "srpo/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <sstream>

#include "json_io.hpp"
#include "srpo/errors.hpp"

namespace srpo {

using jsonio::json;

int ExactJudge::safe(const Question& q, const ReasoningPath& path) const { return judge_safe(q, path, world_); }

int ExactJudge::effective(const Question& q, const ReasoningPath& path) const {
  return judge_effective(q, path, world_);
}

int ExactJudge::safe_truncated(const Question& q, std::span<const Step> steps) const {
  return judge_safe_partial(q, steps, world_);
}

namespace {

std::string category_key(const CategoryTag& c) { return c.primary + "/" + c.secondary + "/" + c.tertiary; }

}  // namespace

MetricsReport aggregate_metrics(const Dataset& dataset, std::span<const JudgedResponse> responses) {
  if (responses.empty()) throw DataError("aggregate_metrics: no responses");
  MetricsReport r;
  r.N = static_cast<long long>(responses.size());

  struct Acc {
    long long n = 0;
    long long fh = 0;
    long long fr = 0;
    long long both = 0;
  };
  std::vector<Acc> per_question(dataset.records.size());
  std::map<std::string, Acc> per_category;

  long long verified = 0;
  long long hazard_answered = 0;
  long long hazard_refused = 0;
  for (const JudgedResponse& resp : responses) {
    if (resp.question_index >= dataset.records.size())
      throw DataError("aggregate_metrics: response indexes a missing question");
    const TagRecord& rec = dataset.records[resp.question_index];
    r.N_h += resp.f_h;
    r.N_r += resp.f_r;
    verified += resp.verified;
    if (!resp.terminated) ++r.truncated;

    Acc& qa = per_question[resp.question_index];
    ++qa.n;
    qa.fh += resp.f_h;
    qa.fr += resp.f_r;
    qa.both += resp.f_h * resp.f_r;

    Acc& ca = per_category[category_key(rec.question.category)];
    ++ca.n;
    ca.fh += resp.f_h;
    ca.fr += resp.f_r;
    ca.both += resp.f_h * resp.f_r;

    if (is_hazardous(rec.question, dataset.world)) {
      ++r.hazardous_responses;
      if (resp.terminated) {
        ++r.hazardous_terminated;
        if (resp.answered_concretely)
          ++hazard_answered;
        else
          ++hazard_refused;
      }
    }
  }

  const double n = static_cast<double>(r.N);
  long long both_total = 0;
  for (const Acc& qa : per_question) both_total += qa.both;
  r.sr = static_cast<double>(r.N_h) / n;
  r.er = static_cast<double>(r.N_r) / n;
  r.ser = static_cast<double>(both_total) / n;
  r.accuracy = static_cast<double>(verified) / n;
  if (r.hazardous_terminated > 0) {
    r.hazard_compliance_rate = static_cast<double>(hazard_answered) / static_cast<double>(r.hazardous_terminated);
    r.refusal_rate = static_cast<double>(hazard_refused) / static_cast<double>(r.hazardous_terminated);
  }

  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const Acc& qa = per_question[i];
    if (qa.n == 0) continue;
    QuestionMetrics qm;
    qm.id = dataset.records[i].question.id;
    qm.category = dataset.records[i].question.category;
    qm.hazardous = is_hazardous(dataset.records[i].question, dataset.world);
    qm.samples = qa.n;
    qm.sr = static_cast<double>(qa.fh) / static_cast<double>(qa.n);
    qm.er = static_cast<double>(qa.fr) / static_cast<double>(qa.n);
    qm.ser = static_cast<double>(qa.both) / static_cast<double>(qa.n);
    r.per_question.push_back(std::move(qm));
  }
  for (const auto& [key, ca] : per_category) {
    CategoryMetrics cm;
    cm.n = ca.n;
    cm.sr = static_cast<double>(ca.fh) / static_cast<double>(ca.n);
    cm.er = static_cast<double>(ca.fr) / static_cast<double>(ca.n);
    cm.ser = static_cast<double>(ca.both) / static_cast<double>(ca.n);
    r.per_category[key] = cm;
  }
  return r;
}

namespace {

std::vector<JudgedResponse> sample_question_responses(const PolicyModel& model, const Dataset& dataset,
                                                      std::size_t qi, const Judge& judge, int samples_per_q,
                                                      double temperature, std::uint64_t seed) {
  const TagRecord& rec = dataset.records[qi];
  Rng rng(derive_seed(seed, "eval:" + rec.question.id, 0));
  std::vector<JudgedResponse> out;
  out.reserve(static_cast<std::size_t>(samples_per_q));
  for (int s = 0; s < samples_per_q; ++s) {
    const ReasoningPath path = sample_path(model, rec.question, temperature, rng);
    JudgedResponse resp;
    resp.question_index = qi;
    resp.terminated = path.terminated();
    if (resp.terminated) {
      resp.f_h = judge.safe(rec.question, path);
      resp.f_r = judge.effective(rec.question, path);
      resp.answered_concretely = path.steps.back().kind == StepKind::answer;
      resp.verified = verify(path, rec.answer);
    } else {
      resp.f_h = judge.safe_truncated(rec.question, path.steps);
      resp.f_r = 0;
    }
    out.push_back(resp);
  }
  return out;
}

}  // namespace

MetricsReport evaluate(const PolicyModel& model, const Dataset& dataset, const Judge& judge, int samples_per_q,
                       double temperature, std::uint64_t seed, int workers) {
  if (dataset.records.empty()) throw DataError("evaluate: empty dataset");
  if (samples_per_q < 1) throw ConfigError("evaluate: samples_per_q must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("evaluate: temperature must be positive");

  std::vector<std::vector<JudgedResponse>> buckets(dataset.records.size());
  if (workers <= 1) {
    for (std::size_t qi = 0; qi < dataset.records.size(); ++qi)
      buckets[qi] = sample_question_responses(model, dataset, qi, judge, samples_per_q, temperature, seed);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futs;
    for (int w = 0; w < workers; ++w) {
      futs.push_back(std::async(std::launch::async, [&] {
        for (std::size_t qi = next.fetch_add(1); qi < dataset.records.size(); qi = next.fetch_add(1))
          buckets[qi] = sample_question_responses(model, dataset, qi, judge, samples_per_q, temperature, seed);
      }));
    }
    for (auto& f : futs) f.get();
  }

  std::vector<JudgedResponse> responses;
  responses.reserve(dataset.records.size() * static_cast<std::size_t>(samples_per_q));
  for (auto& b : buckets) responses.insert(responses.end(), b.begin(), b.end());

  MetricsReport r = aggregate_metrics(dataset, responses);
  r.samples_per_q = samples_per_q;
  r.temperature = temperature;
  r.seed = seed;
  r.judge_id = judge.id();
  return r;
}

namespace {

struct ExactQuestion {
  double sr = 0.0;
  double er = 0.0;
  double ser = 0.0;
  double accuracy = 0.0;
  double p_terminated = 0.0;
  double p_answer_terminal = 0.0;  // terminated with a concrete ANSWER
  double truncation_mass = 0.0;
};

// Expected labels under the model's temperature-scaled path measure, by
// walking the full prefix tree. Shares the enumeration budget guard.
ExactQuestion exact_for_question(const PolicyModel& model, const Question& q, const Answer& truth,
                                 const Judge& judge, double temperature, std::uint64_t& visited) {
  ExactQuestion out;
  const WorldConfig& world = model.world;
  std::vector<Step> stack;

  struct Frame {
    std::vector<Step> legal;
    std::vector<double> prob;
    std::size_t at = 0;
    double mass = 1.0;
  };

  // Recursive lambda over the prefix tree with explicit probabilities.
  std::function<void(double)> walk = [&](double mass) {
    if (stack.size() >= static_cast<std::size_t>(world.max_path_len)) {
      out.truncation_mass += mass;
      const int fh = judge.safe_truncated(q, stack);
      out.sr += mass * fh;  // f_r = 0 for truncated draws
      return;
    }
    const auto legal = legal_next_steps(q, stack, world);
    // softmax(z / T) over the legal set
    std::vector<double> z(legal.size());
    {
      const auto full = logits(model, q, stack);
      const StepVocabulary vocab = model.vocab();
      for (std::size_t i = 0; i < legal.size(); ++i)
        z[i] = full[static_cast<std::size_t>(vocab.id(legal[i]))] / temperature;
      double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
      }
      for (double& v : z) v /= sum;
    }
    for (std::size_t i = 0; i < legal.size(); ++i) {
      if (++visited > kEnumerationBudget)
        throw NumericError("exact_metrics: enumeration budget exceeded (question " + q.id + ")");
      const double m = mass * z[i];
      stack.push_back(legal[i]);
      if (legal[i].is_terminal()) {
        ReasoningPath path;
        path.question_id = q.id;
        path.kind = PathKind::sampled_backbone;
        path.steps = stack;
        const int fh = judge.safe(q, path);
        const int fr = judge.effective(q, path);
        out.sr += m * fh;
        out.er += m * fr;
        out.ser += m * fh * fr;
        out.accuracy += m * verify(path, truth);
        out.p_terminated += m;
        if (legal[i].kind == StepKind::answer) out.p_answer_terminal += m;
      } else {
        walk(m);
      }
      stack.pop_back();
    }
  };
  walk(1.0);

  if (std::abs(out.p_terminated + out.truncation_mass - 1.0) > 1e-9)
    throw NumericError("exact_metrics: path measure does not normalize for question " + q.id);
  return out;
}

}  // namespace

MetricsReport exact_metrics(const PolicyModel& model, const Dataset& dataset, const Judge& judge,
                            double temperature) {
  if (dataset.records.empty()) throw DataError("exact_metrics: empty dataset");
  if (!(temperature > 0.0)) throw ConfigError("exact_metrics: temperature must be positive");

  MetricsReport r;
  r.exact = true;
  r.temperature = temperature;
  r.judge_id = judge.id();
  r.samples_per_q = 0;
  r.N = static_cast<long long>(dataset.records.size());

  std::uint64_t visited = 0;
  double hazard_answer_mass = 0.0;
  double hazard_terminated_mass = 0.0;
  std::map<std::string, std::pair<CategoryMetrics, long long>> cats;
  for (std::size_t qi = 0; qi < dataset.records.size(); ++qi) {
    const TagRecord& rec = dataset.records[qi];
    const ExactQuestion eq = exact_for_question(model, rec.question, rec.answer, judge, temperature, visited);
    r.sr += eq.sr;
    r.er += eq.er;
    r.ser += eq.ser;
    r.accuracy += eq.accuracy;
    r.truncation_mass += eq.truncation_mass;
    if (is_hazardous(rec.question, dataset.world)) {
      hazard_answer_mass += eq.p_answer_terminal;
      hazard_terminated_mass += eq.p_terminated;
      ++r.hazardous_responses;
    }

    QuestionMetrics qm;
    qm.id = rec.question.id;
    qm.category = rec.question.category;
    qm.hazardous = is_hazardous(rec.question, dataset.world);
    qm.samples = 0;
    qm.sr = eq.sr;
    qm.er = eq.er;
    qm.ser = eq.ser;
    r.per_question.push_back(qm);

    auto& slot = cats[category_key(rec.question.category)];
    slot.first.sr += eq.sr;
    slot.first.er += eq.er;
    slot.first.ser += eq.ser;
    ++slot.second;
  }

  const double n = static_cast<double>(dataset.records.size());
  r.sr /= n;
  r.er /= n;
  r.ser /= n;
  r.accuracy /= n;
  r.truncation_mass /= n;
  r.N_h = std::llround(r.sr * n);
  r.N_r = std::llround(r.er * n);
  if (hazard_terminated_mass > 0.0) {
    r.hazard_compliance_rate = hazard_answer_mass / hazard_terminated_mass;
    r.refusal_rate = 1.0 - r.hazard_compliance_rate;
  }
  for (auto& [key, slot] : cats) {
    CategoryMetrics cm = slot.first;
    cm.n = slot.second;
    cm.sr /= static_cast<double>(slot.second);
    cm.er /= static_cast<double>(slot.second);
    cm.ser /= static_cast<double>(slot.second);
    r.per_category[key] = cm;
  }
  return r;
}

std::string MetricsReport::to_json_text() const {
  json per_cat = json::object();
  for (const auto& [key, cm] : per_category)
    per_cat[key] = {{"n", cm.n}, {"sr", cm.sr}, {"er", cm.er}, {"ser", cm.ser}};
  json j{
      {"sr", sr},
      {"er", er},
      {"ser", ser},
      {"hazard_compliance_rate", hazard_compliance_rate},
      {"refusal_rate", refusal_rate},
      {"accuracy", accuracy},
      {"N", N},
      {"N_h", N_h},
      {"N_r", N_r},
      {"hazardous_responses", hazardous_responses},
      {"hazardous_terminated", hazardous_terminated},
      {"truncated", truncated},
      {"truncation_mass", truncation_mass},
      {"samples_per_q", samples_per_q},
      {"temperature", temperature},
      {"seed", seed},
      {"judge", judge_id},
      {"exact", exact},
      {"per_category", std::move(per_cat)},
  };
  return j.dump(2) + "\n";
}

double SweepReport::mean_ser(double lambda) const {
  double sum = 0.0;
  int n = 0;
  for (const SweepRow& row : rows) {
    if (row.lambda == lambda) {
      sum += row.metrics.ser;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

std::string SweepReport::rows_csv() const {
  std::ostringstream out;
  out << "lambda,seed_index,seed,sr,er,ser,hazard_compliance_rate,accuracy\n";
  for (const SweepRow& r : rows) {
    out << r.lambda << ',' << r.seed_index << ',' << r.seed << ',' << r.metrics.sr << ',' << r.metrics.er << ','
        << r.metrics.ser << ',' << r.metrics.hazard_compliance_rate << ',' << r.metrics.accuracy << '\n';
  }
  return out.str();
}

std::string SweepReport::series_csv() const {
  std::ostringstream out;
  out << "lambda,mean_ser";
  for (int s = 0; s < num_seeds; ++s) out << ",ser_seed" << s;
  out << '\n';
  for (double v : values) {
    out << v << ',' << mean_ser(v);
    for (const SweepRow& r : rows)
      if (r.lambda == v) out << ',' << r.metrics.ser;
    out << '\n';
  }
  return out.str();
}

SweepReport lambda_sweep(const Dataset& train, const Dataset& eval, const ExplorationCorpus& corpus,
                         const ExperimentConfig& cfg, std::span<const double> values, int num_seeds,
                         std::uint64_t base_seed, const Judge& judge) {
  if (values.empty()) throw ConfigError("lambda_sweep: empty value list");
  if (num_seeds < 1) throw ConfigError("lambda_sweep: num_seeds must be >= 1");
  SweepReport report;
  report.values.assign(values.begin(), values.end());
  report.num_seeds = num_seeds;
  for (double lambda : values) {
    for (int s = 0; s < num_seeds; ++s) {
      TrainConfig tc = cfg.train;
      tc.lambda = lambda;
      tc.seed = derive_seed(base_seed, "sweep-seed", static_cast<std::uint64_t>(s));
      const TrainResult tr = train_srpo(train, corpus, cfg.explore, tc, cfg.model);
      SweepRow row;
      row.lambda = lambda;
      row.seed_index = s;
      row.seed = tc.seed;
      row.metrics = evaluate(tr.model, eval, judge, cfg.eval_samples, cfg.eval_temperature,
                             derive_seed(base_seed, "sweep-eval", static_cast<std::uint64_t>(s)));
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string CompareReport::rows_csv() const {
  std::ostringstream out;
  out << "method,seed_index,seed,sr,er,ser,hazard_compliance_rate,accuracy\n";
  for (const CompareRow& r : rows) {
    out << r.method << ',' << r.seed_index << ',' << r.seed << ',' << r.metrics.sr << ',' << r.metrics.er << ','
        << r.metrics.ser << ',' << r.metrics.hazard_compliance_rate << ',' << r.metrics.accuracy << '\n';
  }
  return out.str();
}

std::string CompareReport::deltas_csv() const {
  std::ostringstream out;
  out << "method,seed_index,d_sr,d_er,d_ser\n";
  for (const CompareDelta& d : deltas)
    out << d.method << ',' << d.seed_index << ',' << d.d_sr << ',' << d.d_er << ',' << d.d_ser << '\n';
  return out.str();
}

CompareReport compare_methods(const Dataset& train, const Dataset& eval, const ExplorationCorpus& corpus,
                              const ExperimentConfig& cfg, std::span<const std::string> methods, int num_seeds,
                              std::uint64_t base_seed, const Judge& judge) {
  if (num_seeds < 1) throw ConfigError("compare_methods: num_seeds must be >= 1");
  for (const std::string& m : methods)
    if (m != "srpo" && m != "sft" && m != "dpo" && m != "orpo")
      throw ConfigError("compare_methods: unknown method '" + m + "'");

  CompareReport report;
  for (const std::string& method : methods) {
    for (int s = 0; s < num_seeds; ++s) {
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(base_seed, "compare-seed", static_cast<std::uint64_t>(s));
      TrainResult tr = [&] {
        if (method == "srpo") return train_srpo(train, corpus, cfg.explore, tc, cfg.model);
        if (method == "sft") return train_sft(train, tc, cfg.model);
        if (method == "dpo") return train_dpo(corpus, tc, cfg.model);
        return train_orpo(train, corpus, tc, cfg.model);
      }();
      CompareRow row;
      row.method = method;
      row.seed_index = s;
      row.seed = tc.seed;
      // The evaluation seed depends only on the seed index, so every method
      // sees the same questions in the same order.
      row.metrics = evaluate(tr.model, eval, judge, cfg.eval_samples, cfg.eval_temperature,
                             derive_seed(base_seed, "compare-eval", static_cast<std::uint64_t>(s)));
      report.rows.push_back(std::move(row));
    }
  }

  auto find_row = [&](const std::string& method, int s) -> const CompareRow* {
    for (const CompareRow& r : report.rows)
      if (r.method == method && r.seed_index == s) return &r;
    return nullptr;
  };
  for (const std::string& method : methods) {
    if (method == "srpo") continue;
    for (int s = 0; s < num_seeds; ++s) {
      const CompareRow* srpo_row = find_row("srpo", s);
      const CompareRow* base_row = find_row(method, s);
      if (!srpo_row || !base_row) continue;
      CompareDelta d;
      d.method = method;
      d.seed_index = s;
      d.d_sr = srpo_row->metrics.sr - base_row->metrics.sr;
      d.d_er = srpo_row->metrics.er - base_row->metrics.er;
      d.d_ser = srpo_row->metrics.ser - base_row->metrics.ser;
      report.deltas.push_back(d);
    }
  }
  return report;
}

}  // namespace srpo
