#include "vepm/train/elbo.hpp"

#include <stdexcept>
#include <string>

namespace vepm::train {

TaskTargets make_targets(const std::vector<int>& labels, const std::vector<std::size_t>& rows, std::size_t classes) {
  if (rows.empty()) throw std::invalid_argument("training selection is empty");
  TaskTargets t;
  t.selector = Matrix(labels.size(), classes);
  t.count = rows.size();
  const double w = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    if (r >= labels.size()) throw std::out_of_range("target row out of range");
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    t.selector(r, static_cast<std::size_t>(y)) += w;
  }
  return t;
}

std::vector<std::size_t> mask_indices(const std::vector<std::uint8_t>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

ad::Var task_loglik(ad::Var logits, const TaskTargets& targets) {
  if (!logits.value().same_shape(targets.selector))
    throw ShapeError("task targets " + targets.selector.shape_string() + " vs logits " + logits.value().shape_string());
  ad::Tape& t = logits.tape();
  return ad::reduce_sum(ad::mul(ad::log_softmax_rows(logits), t.constant(targets.selector)));
}

ad::Var kl_term(const model::Posterior& posterior, const prob::GammaPrior& prior) {
  ad::Var k = ad::clamp(posterior.shape, prob::kShapeMin, prob::kShapeMax);
  return ad::negate(ad::reduce_sum(ad::kl_weibull_gamma(k, posterior.scale, prior.alpha, prior.beta)));
}

ElboTerms ElboGraph::values() const {
  ElboTerms v;
  if (l_task.valid()) v.l_task = l_task.value().item();
  v.l_egen = l_egen.value().item();
  v.l_kl = l_kl.value().item();
  return v;
}

ElboGraph elbo(ad::Tape& tape, const ad::ParameterStore& store, const model::VepmModel& model,
               const model::GraphBatch& batch, const TaskTargets* targets, const Matrix& uniforms,
               const ElboWeights& weights, const model::ForwardOptions& opts, const prob::PairSet* pairs) {
  ElboGraph g;
  if (targets) {
    g.forward = model.forward(tape, store, batch, uniforms, opts);
    g.l_task = task_loglik(g.forward.output, *targets);
  } else {
    g.forward.posterior = model.encode(tape, store, batch, uniforms, opts);
    g.forward.gamma = model.gamma(tape, store);
  }
  g.l_egen = prob::bernoulli_poisson_loglik(g.forward.posterior.z, g.forward.gamma, pairs ? *pairs : batch.pairs);
  g.l_kl = kl_term(g.forward.posterior, model.config().prior);
  g.objective = ad::add(ad::scale(g.l_egen, weights.egen), ad::scale(g.l_kl, weights.kl));
  if (g.l_task.valid()) g.objective = ad::add(g.objective, ad::scale(g.l_task, weights.task));
  return g;
}

}  // namespace vepm::train
