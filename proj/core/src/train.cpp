#include "srpo/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_io.hpp"
#include "srpo/errors.hpp"
#include "srpo/eval.hpp"
#include "srpo/io.hpp"

namespace srpo {

using jsonio::json;

void TrainConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("train.lambda: must be >= 0");
  if (!(k > 0.0)) throw ConfigError("train.k: must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (refresh_every < 0) throw ConfigError("train.refresh_every: must be >= 0");
  if (!(dpo_beta > 0.0)) throw ConfigError("train.dpo_beta: must be positive");
  if (orpo_weight < 0.0) throw ConfigError("train.orpo_weight: must be >= 0");
}

AdamOptimizer::AdamOptimizer(const PolicyModel& model, AdamConfig cfg, double learning_rate)
    : cfg_(cfg), lr_(learning_rate), m_(Gradient::zeros_like(model)), v_(Gradient::zeros_like(model)) {}

void AdamOptimizer::step(PolicyModel& model, const Gradient& grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto params = param_views(model);
  auto grads = param_views(const_cast<Gradient&>(grad));
  auto ms = param_views(m_);
  auto vs = param_views(v_);
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto& p = *params[a].data;
    const auto& g = *grads[a].data;
    auto& m = *ms[a].data;
    auto& v = *vs[a].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

namespace {

struct ItemLoss {
  double j_ref = 0.0;
  double j_align = 0.0;
  double total = 0.0;
  int pairs = 0;
};

// Computes one item's loss and accumulates `scale` times its gradient.
using ItemFn = std::function<ItemLoss(const PolicyModel&, std::size_t, Gradient&, double)>;
// Called before each epoch; may rebuild per-item state (corpus refresh).
using EpochHook = std::function<void(const PolicyModel&, int)>;

TrainResult run_training(std::size_t item_count, const TrainConfig& cfg, const ModelConfig& model_cfg,
                         const WorldConfig& world, const Dataset* eval_split, const Dataset* warm_start_set,
                         const ItemFn& item_fn, const EpochHook& epoch_hook) {
  cfg.validate();
  if (item_count == 0) throw DataError("training: no items");

  TrainResult result;
  result.model = init_model(world, model_cfg, cfg.seed);
  AdamOptimizer opt(result.model, cfg.adam, cfg.learning_rate);

  // Optional D_c warm start: one supervised pass over the first m examples.
  if (model_cfg.warm_start_examples > 0) {
    if (!warm_start_set || warm_start_set->records.empty())
      throw DataError("warm_start_examples > 0 but no reference examples available");
    const std::size_t m =
        std::min<std::size_t>(static_cast<std::size_t>(model_cfg.warm_start_examples), warm_start_set->records.size());
    Rng rng(derive_seed(cfg.seed, "warmstart", 0));
    auto order = rng.permutation(m);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      Gradient grad = Gradient::zeros_like(result.model);
      const double scale = 1.0 / static_cast<double>(end - at);
      for (std::size_t b = at; b < end; ++b) {
        const TagRecord& rec = warm_start_set->records[order[b]];
        add_steps_loglik_grad(result.model, rec.question, {}, rec.reasoning.steps, -scale, grad);
      }
      grad.check_finite("warm start");
      opt.step(result.model, grad);
    }
  }

  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    epoch_hook(result.model, epoch);

    Rng batch_rng(derive_seed(cfg.seed, "batch", static_cast<std::uint64_t>(epoch)));
    const auto order = batch_rng.permutation(item_count);

    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(end - at);
      Gradient grad = Gradient::zeros_like(result.model);
      TrainStepRow row;
      row.step = global_step;
      row.epoch = epoch;
      for (std::size_t b = at; b < end; ++b) {
        const ItemLoss il = item_fn(result.model, order[b], grad, scale);
        row.j_ref += il.j_ref * scale;
        row.j_align += il.j_align * scale;
        row.total += il.total * scale;
        row.pair_count += il.pairs;
      }
      if (!std::isfinite(row.total))
        throw NumericError("training diverged: non-finite loss at step " + std::to_string(global_step) +
                           " (epoch " + std::to_string(epoch) + ", batch starting at item " +
                           std::to_string(at) + ")");
      grad.check_finite("training step " + std::to_string(global_step));
      row.grad_norm = std::sqrt(grad.squared_norm());
      opt.step(result.model, grad);
      result.log.steps.push_back(row);
      epoch_loss += row.total;
      ++epoch_batches;
      ++global_step;
    }

    EpochSnapshot snap;
    snap.epoch = epoch;
    snap.mean_loss = epoch_batches > 0 ? epoch_loss / epoch_batches : 0.0;
    if (eval_split && !eval_split->records.empty()) {
      // Small fixed-size snapshot so per-epoch cost stays negligible.
      Dataset subset;
      subset.world = eval_split->world;
      const std::size_t cap = std::min<std::size_t>(eval_split->records.size(), 64);
      subset.records.assign(eval_split->records.begin(),
                            eval_split->records.begin() + static_cast<std::ptrdiff_t>(cap));
      const ExactJudge judge(subset.world);
      const MetricsReport mr =
          evaluate(result.model, subset, judge, 4, 1.0, derive_seed(cfg.seed, "snapshot", static_cast<std::uint64_t>(epoch)));
      snap.sr = mr.sr;
      snap.er = mr.er;
      snap.ser = mr.ser;
      snap.has_metrics = true;
    }
    result.log.epochs.push_back(snap);
  }
  return result;
}

}  // namespace

std::optional<WholePathPair> earliest_whole_path_pair(const CorpusEntry& entry) {
  if (entry.pairs.empty()) return std::nullopt;
  const ContrastivePair& p = entry.pairs.front();  // step indices are increasing
  WholePathPair out;
  out.chosen = concat_path(p.prefix, p.positive, PathKind::positive);
  out.rejected = concat_path(p.prefix, p.negative, PathKind::negative);
  return out;
}

TrainResult train_srpo(const Dataset& train, const ExplorationCorpus& corpus, const ExploreConfig& explore_cfg,
                       const TrainConfig& cfg, const ModelConfig& model_cfg, const Dataset* eval_split) {
  for (const CorpusEntry& e : corpus.entries) {
    if (!train.find(e.question.id))
      throw DataError("train_srpo: corpus question " + e.question.id + " not in the training dataset");
  }

  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < train.records.size(); ++i) index_of[train.records[i].question.id] = i;

  // Pairs per training item, rebuilt on refresh epochs.
  auto live_corpus = std::make_shared<std::vector<std::vector<ContrastivePair>>>();
  auto index_pairs = [&train, &index_of, live_corpus](const ExplorationCorpus& c) {
    live_corpus->assign(train.records.size(), {});
    for (const CorpusEntry& e : c.entries) {
      auto at = index_of.find(e.question.id);
      if (at != index_of.end()) (*live_corpus)[at->second] = e.pairs;
    }
  };
  index_pairs(corpus);

  const ItemFn item_fn = [&train, cfg, live_corpus](const PolicyModel& model, std::size_t idx, Gradient& grad,
                                                    double scale) {
    const TagRecord& rec = train.records[idx];
    ItemLoss il;
    il.j_ref = loss_ref(model, rec.question, rec.reasoning);
    add_steps_loglik_grad(model, rec.question, {}, rec.reasoning.steps, -scale, grad);
    const auto& pairs = (*live_corpus)[idx];
    il.pairs = static_cast<int>(pairs.size());
    if (cfg.lambda != 0.0 && !pairs.empty()) {
      for (const ContrastivePair& pair : pairs) {
        const double pos = steps_loglik(model, rec.question, pair.prefix.steps, pair.positive.steps);
        const double neg = steps_loglik(model, rec.question, pair.prefix.steps, pair.negative.steps);
        const double delta = pos - neg;
        il.j_align += -cfg.k * log_sigmoid(delta);
        const double c = -cfg.k * sigmoid(-delta) * cfg.lambda * scale;
        add_steps_loglik_grad(model, rec.question, pair.prefix.steps, pair.positive.steps, c, grad);
        add_steps_loglik_grad(model, rec.question, pair.prefix.steps, pair.negative.steps, -c, grad);
      }
    }
    il.total = il.j_ref + cfg.lambda * il.j_align;
    return il;
  };

  const EpochHook hook = [&train, cfg, explore_cfg, index_pairs](const PolicyModel& model, int epoch) {
    if (epoch == 0 || cfg.refresh_every == 0) return;
    if (epoch % cfg.refresh_every != 0) return;
    const ExplorationCorpus fresh = explore_dataset(
        model, train, explore_cfg, derive_seed(cfg.seed, "refresh", static_cast<std::uint64_t>(epoch)));
    index_pairs(fresh);
  };

  return run_training(train.records.size(), cfg, model_cfg, train.world, eval_split, &train, item_fn, hook);
}

TrainResult train_sft(const Dataset& train, const TrainConfig& cfg, const ModelConfig& model_cfg,
                      const Dataset* eval_split) {
  const ItemFn item_fn = [&train](const PolicyModel& model, std::size_t idx, Gradient& grad, double scale) {
    const TagRecord& rec = train.records[idx];
    ItemLoss il;
    il.j_ref = loss_ref(model, rec.question, rec.reasoning);
    add_steps_loglik_grad(model, rec.question, {}, rec.reasoning.steps, -scale, grad);
    il.total = il.j_ref;
    return il;
  };
  return run_training(train.records.size(), cfg, model_cfg, train.world, eval_split, &train, item_fn,
                      [](const PolicyModel&, int) {});
}

namespace {

struct PreferenceItem {
  Question question;
  ReasoningPath chosen;
  ReasoningPath rejected;
  double ref_chosen = 0.0;
  double ref_rejected = 0.0;
};

std::vector<PreferenceItem> collect_preference_items(const ExplorationCorpus& corpus) {
  std::vector<PreferenceItem> items;
  for (const CorpusEntry& e : corpus.entries) {
    if (auto wp = earliest_whole_path_pair(e)) {
      PreferenceItem it;
      it.question = e.question;
      it.chosen = std::move(wp->chosen);
      it.rejected = std::move(wp->rejected);
      items.push_back(std::move(it));
    }
  }
  if (items.empty())
    throw DataError("preference training: corpus has no question with a complete contrastive pair");
  return items;
}

}  // namespace

TrainResult train_dpo(const ExplorationCorpus& corpus, const TrainConfig& cfg, const ModelConfig& model_cfg,
                      const Dataset* eval_split) {
  if (corpus.entries.empty()) throw DataError("train_dpo: empty corpus");
  auto items = std::make_shared<std::vector<PreferenceItem>>(collect_preference_items(corpus));
  const WorldConfig& world = corpus.world;

  // Reference log-likelihoods under the frozen initial model.
  const PolicyModel ref_model = init_model(world, model_cfg, cfg.seed);
  for (PreferenceItem& it : *items) {
    it.ref_chosen = path_loglik(ref_model, it.question, it.chosen);
    it.ref_rejected = path_loglik(ref_model, it.question, it.rejected);
  }

  const ItemFn item_fn = [items, cfg](const PolicyModel& model, std::size_t idx, Gradient& grad, double scale) {
    const PreferenceItem& it = (*items)[idx];
    const double lc = path_loglik(model, it.question, it.chosen);
    const double lr = path_loglik(model, it.question, it.rejected);
    const double margin = cfg.dpo_beta * ((lc - it.ref_chosen) - (lr - it.ref_rejected));
    ItemLoss il;
    il.total = -log_sigmoid(margin);
    il.j_align = il.total;
    il.pairs = 1;
    const double c = -sigmoid(-margin) * cfg.dpo_beta * scale;
    add_steps_loglik_grad(model, it.question, {}, it.chosen.steps, c, grad);
    add_steps_loglik_grad(model, it.question, {}, it.rejected.steps, -c, grad);
    return il;
  };
  return run_training(items->size(), cfg, model_cfg, world, eval_split, nullptr, item_fn,
                      [](const PolicyModel&, int) {});
}

TrainResult train_orpo(const Dataset& train, const ExplorationCorpus& corpus, const TrainConfig& cfg,
                       const ModelConfig& model_cfg, const Dataset* eval_split) {
  auto items = std::make_shared<std::vector<PreferenceItem>>(collect_preference_items(corpus));
  auto fns = std::make_shared<std::vector<LossFn>>();
  for (const PreferenceItem& it : *items)
    fns->push_back(orpo_pair_fn(it.question, it.chosen, it.rejected, cfg.orpo_weight));

  const ItemFn item_fn = [items, fns](const PolicyModel& model, std::size_t idx, Gradient& grad, double scale) {
    ItemLoss il;
    il.total = (*fns)[idx].value(model);
    il.pairs = 1;
    Gradient part = Gradient::zeros_like(model);
    (*fns)[idx].add_grad(model, part);
    grad.axpy(scale, part);
    return il;
  };
  return run_training(items->size(), cfg, model_cfg, train.world, eval_split, &train, item_fn,
                      [](const PolicyModel&, int) {});
}

void write_training_log(const TrainingLog& log, const std::filesystem::path& dir) {
  std::ostringstream steps;
  steps << "step,epoch,j_ref,j_align,total,grad_norm,pair_count\n";
  for (const TrainStepRow& r : log.steps) {
    steps << r.step << ',' << r.epoch << ',' << r.j_ref << ',' << r.j_align << ',' << r.total << ','
          << r.grad_norm << ',' << r.pair_count << '\n';
  }
  write_file(dir / "steps.csv", steps.str());

  std::ostringstream epochs;
  epochs << "epoch,mean_loss,sr,er,ser\n";
  for (const EpochSnapshot& s : log.epochs) {
    epochs << s.epoch << ',' << s.mean_loss << ',';
    if (s.has_metrics)
      epochs << s.sr << ',' << s.er << ',' << s.ser;
    else
      epochs << ",,";
    epochs << '\n';
  }
  write_file(dir / "epochs.csv", epochs.str());

  json summary{{"steps", log.steps.size()}, {"epochs", log.epochs.size()}};
  if (!log.steps.empty()) {
    summary["final_total"] = log.steps.back().total;
    summary["final_j_ref"] = log.steps.back().j_ref;
    summary["final_j_align"] = log.steps.back().j_align;
  }
  if (!log.epochs.empty()) {
    summary["first_epoch_mean_loss"] = log.epochs.front().mean_loss;
    summary["last_epoch_mean_loss"] = log.epochs.back().mean_loss;
  }
  write_file(dir / "training_summary.json", summary.dump(2) + "\n");
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
  json j{
      {"lambda", cfg.lambda},
      {"k", cfg.k},
      {"learning_rate", cfg.learning_rate},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"refresh_every", cfg.refresh_every},
      {"dpo_beta", cfg.dpo_beta},
      {"orpo_weight", cfg.orpo_weight},
      {"adam_beta1", cfg.adam.beta1},
      {"adam_beta2", cfg.adam.beta2},
      {"adam_eps", cfg.adam.eps},
      {"seed", cfg.seed},
  };
  return j.dump();
}

}  // namespace srpo
