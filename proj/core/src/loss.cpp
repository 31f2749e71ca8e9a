#include "srpo/loss.hpp"

#include <algorithm>
#include <cmath>

#include "srpo/errors.hpp"

namespace srpo {

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

LossFn constant_loss(double c) {
  return LossFn{[c](const PolicyModel&) { return c; }, [](const PolicyModel&, Gradient&) {}};
}

LossFn scale_loss(double a, LossFn f) {
  return LossFn{[a, value = f.value](const PolicyModel& m) { return a * value(m); },
                [a, add = f.add_grad](const PolicyModel& m, Gradient& g) {
                  if (a == 0.0) return;
                  Gradient part = Gradient::zeros_like(m);
                  add(m, part);
                  g.axpy(a, part);
                }};
}

LossFn sum_loss(std::vector<LossFn> fs) {
  auto shared = std::make_shared<std::vector<LossFn>>(std::move(fs));
  return LossFn{[shared](const PolicyModel& m) {
                  double total = 0.0;
                  for (const LossFn& f : *shared) total += f.value(m);
                  return total;
                },
                [shared](const PolicyModel& m, Gradient& g) {
                  for (const LossFn& f : *shared) f.add_grad(m, g);
                }};
}

namespace {

void require_pair(const ContrastivePair& pair) {
  if (pair.step_index < 1) throw DataError("contrastive pair: step_index must be >= 1");
  if (pair.prefix.steps.size() != static_cast<std::size_t>(pair.step_index - 1))
    throw DataError("contrastive pair: prefix length " + std::to_string(pair.prefix.steps.size()) +
                    " does not match step_index " + std::to_string(pair.step_index));
  validate_continuation(pair.positive);
  validate_continuation(pair.negative);
  if (pair.positive.truncated || pair.negative.truncated)
    throw DataError("contrastive pair: truncated continuation");
}

double align_delta(const PolicyModel& model, const Question& q, const ContrastivePair& pair) {
  const double pos = steps_loglik(model, q, pair.prefix.steps, pair.positive.steps);
  const double neg = steps_loglik(model, q, pair.prefix.steps, pair.negative.steps);
  return pos - neg;
}

}  // namespace

double loss_ref(const PolicyModel& model, const Question& q, const ReasoningPath& ref_path) {
  if (ref_path.kind != PathKind::reference)
    throw DataError("loss_ref: expected a reference path, got " + path_kind_to_string(ref_path.kind) +
                    " (question " + q.id + ")");
  if (!ref_path.terminated()) throw DataError("loss_ref: reference path not terminated (question " + q.id + ")");
  return -path_loglik(model, q, ref_path);
}

LossFn loss_ref_fn(Question q, ReasoningPath ref_path) {
  auto qp = std::make_shared<Question>(std::move(q));
  auto rp = std::make_shared<ReasoningPath>(std::move(ref_path));
  return LossFn{[qp, rp](const PolicyModel& m) { return loss_ref(m, *qp, *rp); },
                [qp, rp](const PolicyModel& m, Gradient& g) {
                  add_steps_loglik_grad(m, *qp, {}, rp->steps, -1.0, g);
                }};
}

double loss_align_step(const PolicyModel& model, const Question& q, const ContrastivePair& pair, double k) {
  if (!(k > 0.0)) throw ConfigError("loss_align_step: k must be positive");
  require_pair(pair);
  return -k * log_sigmoid(align_delta(model, q, pair));
}

LossFn loss_align_step_fn(Question q, ContrastivePair pair, double k) {
  require_pair(pair);
  auto qp = std::make_shared<Question>(std::move(q));
  auto pp = std::make_shared<ContrastivePair>(std::move(pair));
  return LossFn{[qp, pp, k](const PolicyModel& m) { return loss_align_step(m, *qp, *pp, k); },
                [qp, pp, k](const PolicyModel& m, Gradient& g) {
                  // d/dDelta of -k log sigma(Delta) is -k sigma(-Delta).
                  const double c = -k * sigmoid(-align_delta(m, *qp, *pp));
                  add_steps_loglik_grad(m, *qp, pp->prefix.steps, pp->positive.steps, c, g);
                  add_steps_loglik_grad(m, *qp, pp->prefix.steps, pp->negative.steps, -c, g);
                }};
}

double loss_align_total(const PolicyModel& model, const Question& q, std::span<const ContrastivePair> pairs,
                        double k) {
  double total = 0.0;
  for (const ContrastivePair& pair : pairs) total += loss_align_step(model, q, pair, k);
  return total;
}

LossFn loss_align_total_fn(Question q, std::vector<ContrastivePair> pairs, double k) {
  std::vector<LossFn> fs;
  fs.reserve(pairs.size());
  for (ContrastivePair& pair : pairs) fs.push_back(loss_align_step_fn(q, std::move(pair), k));
  if (fs.empty()) return constant_loss(0.0);
  return sum_loss(std::move(fs));
}

double loss_total(const PolicyModel& model, const Question& q, const ReasoningPath& ref_path,
                  std::span<const ContrastivePair> pairs, double lambda, double k) {
  if (lambda < 0.0) throw ConfigError("loss_total: lambda must be >= 0");
  double total = loss_ref(model, q, ref_path);
  if (lambda != 0.0 && !pairs.empty()) total += lambda * loss_align_total(model, q, pairs, k);
  return total;
}

LossFn loss_total_fn(Question q, ReasoningPath ref_path, std::vector<ContrastivePair> pairs, double lambda,
                     double k) {
  if (lambda < 0.0) throw ConfigError("loss_total_fn: lambda must be >= 0");
  std::vector<LossFn> fs;
  fs.push_back(loss_ref_fn(q, std::move(ref_path)));
  if (lambda != 0.0 && !pairs.empty())
    fs.push_back(scale_loss(lambda, loss_align_total_fn(std::move(q), std::move(pairs), k)));
  return sum_loss(std::move(fs));
}

namespace {

// log(1 - e^x) for x < 0, switching branches at -ln 2 for accuracy.
double log1mexp(double x) {
  if (x >= 0.0) throw NumericError("log1mexp: argument must be negative");
  return x > -0.6931471805599453 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// log odds of a path: L - log(1 - e^L). Probability-one paths (L == 0)
// cannot occur while any context has two or more legal steps.
double log_odds(double loglik) {
  const double capped = std::min(loglik, -1e-12);
  return capped - log1mexp(capped);
}

// d log_odds / dL = 1 / (1 - e^L)
double log_odds_slope(double loglik) {
  const double capped = std::min(loglik, -1e-12);
  return 1.0 / (-std::expm1(capped));
}

}  // namespace

LossFn dpo_pair_fn(Question q, ReasoningPath chosen, ReasoningPath rejected, double beta,
                   double ref_chosen_loglik, double ref_rejected_loglik) {
  if (!(beta > 0.0)) throw ConfigError("dpo_pair_fn: beta must be positive");
  auto qp = std::make_shared<Question>(std::move(q));
  auto cp = std::make_shared<ReasoningPath>(std::move(chosen));
  auto rp = std::make_shared<ReasoningPath>(std::move(rejected));
  auto margin = [qp, cp, rp, beta, ref_chosen_loglik, ref_rejected_loglik](const PolicyModel& m) {
    const double lc = path_loglik(m, *qp, *cp);
    const double lr = path_loglik(m, *qp, *rp);
    return beta * ((lc - ref_chosen_loglik) - (lr - ref_rejected_loglik));
  };
  return LossFn{[margin](const PolicyModel& m) { return -log_sigmoid(margin(m)); },
                [qp, cp, rp, beta, margin](const PolicyModel& m, Gradient& g) {
                  const double c = -sigmoid(-margin(m)) * beta;
                  add_steps_loglik_grad(m, *qp, {}, cp->steps, c, g);
                  add_steps_loglik_grad(m, *qp, {}, rp->steps, -c, g);
                }};
}

LossFn orpo_pair_fn(Question q, ReasoningPath chosen, ReasoningPath rejected, double weight) {
  if (weight < 0.0) throw ConfigError("orpo_pair_fn: weight must be >= 0");
  auto qp = std::make_shared<Question>(std::move(q));
  auto cp = std::make_shared<ReasoningPath>(std::move(chosen));
  auto rp = std::make_shared<ReasoningPath>(std::move(rejected));
  return LossFn{[qp, cp, rp, weight](const PolicyModel& m) {
                  const double lc = path_loglik(m, *qp, *cp);
                  double loss = -lc;
                  if (weight != 0.0) {
                    const double lr = path_loglik(m, *qp, *rp);
                    loss += weight * -log_sigmoid(log_odds(lc) - log_odds(lr));
                  }
                  return loss;
                },
                [qp, cp, rp, weight](const PolicyModel& m, Gradient& g) {
                  add_steps_loglik_grad(m, *qp, {}, cp->steps, -1.0, g);
                  if (weight == 0.0) return;
                  const double lc = path_loglik(m, *qp, *cp);
                  const double lr = path_loglik(m, *qp, *rp);
                  const double gap = log_odds(lc) - log_odds(lr);
                  const double c = -weight * sigmoid(-gap);
                  add_steps_loglik_grad(m, *qp, {}, cp->steps, c * log_odds_slope(lc), g);
                  add_steps_loglik_grad(m, *qp, {}, rp->steps, -c * log_odds_slope(lr), g);
                }};
}

Gradient grad_of(const PolicyModel& model, const LossFn& loss) {
  Gradient g = Gradient::zeros_like(model);
  loss.add_grad(model, g);
  g.accumulation_count = 1;
  g.check_finite("grad_of");
  return g;
}

double finite_diff_check(const PolicyModel& model, const LossFn& loss, double epsilon, int sample_size,
                         Rng& rng) {
  if (!(epsilon > 0.0)) throw NumericError("finite_diff_check: epsilon must be positive");
  Gradient analytic = grad_of(model, loss);
  auto grad_views = param_views(analytic);

  PolicyModel probe = model;
  auto probe_views = param_views(probe);
  const std::size_t total = probe.num_params();

  // Half the probes uniform over all parameters, half over the largest
  // analytic components so live coordinates are always exercised.
  std::vector<std::size_t> indices;
  for (int s = 0; s < sample_size; ++s) indices.push_back(rng.uniform_int(total));
  {
    std::vector<std::pair<double, std::size_t>> ranked;
    std::size_t base = 0;
    for (auto view : grad_views) {
      for (std::size_t k = 0; k < view.data->size(); ++k) ranked.emplace_back(std::abs((*view.data)[k]), base + k);
      base += view.data->size();
    }
    const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(sample_size), ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top), ranked.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < top; ++i) indices.push_back(ranked[i].second);
  }

  auto flat_ref = [&](std::vector<ParamView>& views, std::size_t flat) -> double& {
    for (auto view : views) {
      if (flat < view.data->size()) return (*view.data)[flat];
      flat -= view.data->size();
    }
    throw NumericError("finite_diff_check: flat index out of range");
  };

  double max_rel = 0.0;
  for (std::size_t flat : indices) {
    double& slot = flat_ref(probe_views, flat);
    const double saved = slot;
    slot = saved + epsilon;
    const double up = loss.value(probe);
    slot = saved - epsilon;
    const double down = loss.value(probe);
    slot = saved;
    const double fd = (up - down) / (2.0 * epsilon);
    const double an = flat_ref(grad_views, flat);
    const double rel = std::abs(fd - an) / std::max({1e-6, std::abs(fd), std::abs(an)});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace srpo
