#pragma once

#include <cstdint>
#include <vector>

#include "vepm/ad/ops.hpp"
#include "vepm/model/vepm_model.hpp"
#include "vepm/prob/distributions.hpp"

namespace vepm::train {

struct ElboWeights {
  double task = 1.0;
  double egen = 1.0;
  double kl = 1.0;
};

struct ElboTerms {
  double l_task = 0.0;
  double l_egen = 0.0;
  double l_kl = 0.0;
  double total() const noexcept { return l_task + l_egen + l_kl; }
};

/// Observed labels as a selector matrix: entry (row, label) holds 1/count for
/// every selected row, so sum(selector * log_softmax(logits)) is the mean
/// log-probability of the observed labels.
struct TaskTargets {
  Matrix selector;
  std::size_t count = 0;
};

/// `rows` lists the selected rows (nodes or graphs). Throws on an empty
/// selection or a label outside [0, classes).
TaskTargets make_targets(const std::vector<int>& labels, const std::vector<std::size_t>& rows, std::size_t classes);
std::vector<std::size_t> mask_indices(const std::vector<std::uint8_t>& mask);

ad::Var task_loglik(ad::Var logits, const TaskTargets& targets);
/// -sum KL(Weibull || Gamma prior) over all nodes and communities.
ad::Var kl_term(const model::Posterior& posterior, const prob::GammaPrior& prior);

struct ElboGraph {
  model::ForwardResult forward;
  ad::Var l_task;  // invalid when no targets were given
  ad::Var l_egen;
  ad::Var l_kl;
  ad::Var objective;  // weighted sum of the terms present
  ElboTerms values() const;
};

/// Single-sample ELBO. Without targets the task term is skipped (pretraining
/// objective). `pairs` overrides the batch pair set, e.g. for a subgraph.
ElboGraph elbo(ad::Tape& tape, const ad::ParameterStore& store, const model::VepmModel& model,
               const model::GraphBatch& batch, const TaskTargets* targets, const Matrix& uniforms,
               const ElboWeights& weights, const model::ForwardOptions& opts, const prob::PairSet* pairs = nullptr);

}  // namespace vepm::train
