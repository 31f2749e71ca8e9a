#pragma once

#include <functional>
#include <span>
#include <vector>

#include "srpo/model.hpp"
#include "srpo/path.hpp"
#include "srpo/world.hpp"

namespace srpo {

double sigmoid(double x);
double log_sigmoid(double x);

// A differentiable scalar loss: `value` re-evaluates under any parameter
// assignment (this is what finite differences perturb), `add_grad`
// accumulates the exact analytic gradient. The two routes are independent
// on purpose.
struct LossFn {
  std::function<double(const PolicyModel&)> value;
  std::function<void(const PolicyModel&, Gradient&)> add_grad;
};

LossFn constant_loss(double c);
LossFn scale_loss(double a, LossFn f);
LossFn sum_loss(std::vector<LossFn> fs);

// J_Ref: negated log-likelihood of the reference path, summed over every
// transition including the terminal emission. Rejects non-reference paths.
double loss_ref(const PolicyModel& model, const Question& q, const ReasoningPath& ref_path);
LossFn loss_ref_fn(Question q, ReasoningPath ref_path);

// J_Align,i = -k log sigma(Delta) with Delta the continuation-only
// log-likelihood difference; the shared prefix cancels exactly.
double loss_align_step(const PolicyModel& model, const Question& q, const ContrastivePair& pair, double k);
LossFn loss_align_step_fn(Question q, ContrastivePair pair, double k);

// J_Align: sum over the question's pairs; empty list contributes 0.
double loss_align_total(const PolicyModel& model, const Question& q, std::span<const ContrastivePair> pairs,
                        double k);
LossFn loss_align_total_fn(Question q, std::vector<ContrastivePair> pairs, double k);

// J = J_Ref + lambda * J_Align.
double loss_total(const PolicyModel& model, const Question& q, const ReasoningPath& ref_path,
                  std::span<const ContrastivePair> pairs, double lambda, double k);
LossFn loss_total_fn(Question q, ReasoningPath ref_path, std::vector<ContrastivePair> pairs, double lambda,
                     double k);

// DPO on a whole-path pair with a frozen reference model's log-likelihoods
// folded in as constants: -log sigma(beta * ((L - L_ref)+ - (L - L_ref)-)).
LossFn dpo_pair_fn(Question q, ReasoningPath chosen, ReasoningPath rejected, double beta,
                   double ref_chosen_loglik, double ref_rejected_loglik);

// ORPO: NLL of the chosen path plus weight * (-log sigma(log-odds gap)).
LossFn orpo_pair_fn(Question q, ReasoningPath chosen, ReasoningPath rejected, double weight);

Gradient grad_of(const PolicyModel& model, const LossFn& loss);

// Central differences on a random parameter subsample against the analytic
// gradient; returns the max relative error. This is the gradient oracle.
double finite_diff_check(const PolicyModel& model, const LossFn& loss, double epsilon, int sample_size,
                         Rng& rng);

}  // namespace srpo
