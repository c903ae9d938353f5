#include "vepm/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "vepm/core/rng.hpp"
#include "vepm/graph/graph.hpp"

namespace vepm::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool is_decayed_weight(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot != std::string::npos && name.compare(dot + 1, 1, "w") == 0;
}

std::vector<double> degrees_of(const model::GraphBatch& batch) {
  std::vector<double> d;
  for (std::size_t v : degree_vector(*batch.adjacency)) d.push_back(static_cast<double>(v));
  return d;
}

}  // namespace

void TrainConfig::validate() const {
  if (inner_steps == 0) throw std::invalid_argument("train.inner_steps must be >= 1");
  if (!(lr_unsup >= 0.0 && lr_theta >= 0.0 && lr_phi >= 0.0)) throw std::invalid_argument("learning rates must be >= 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train.weight_decay must be >= 0");
}

void write_metrics_csv(const std::vector<EpochMetrics>& rows, const std::filesystem::path& file, bool append) {
  const bool header = !append || !std::filesystem::exists(file);
  std::ofstream out(file, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  if (header) out << "epoch,l_task,l_egen,l_kl,train_acc,val_acc,test_acc,wall_ms\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << cell(r.l_task) << ',' << cell(r.l_egen) << ',' << cell(r.l_kl) << ','
        << cell(r.train_acc) << ',' << cell(r.val_acc) << ',' << cell(r.test_acc) << ',' << cell(r.wall_ms) << '\n';
}

Trainer::Trainer(const model::VepmModel& model, ad::ParameterStore& store, TrainConfig config, SamplerConfig sampler,
                 std::uint64_t seed)
    : model_(model), store_(store), config_(config), sampler_(sampler), seed_(seed) {
  config_.validate();
  sampler_.validate();
  inference_names_ = store_.names(ad::ParamGroup::Inference);
  generative_names_ = store_.names(ad::ParamGroup::Generative);
  for (const auto& n : generative_names_)
    if (is_decayed_weight(n)) decayed_names_.push_back(n);
  if (!config_.pretrain) progress_.pretrain_done = true;
}

void Trainer::check_finite(double v, const char* what) const {
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + what);
}

prob::PairSet Trainer::egen_pairs(const model::GraphBatch& batch, std::uint64_t phase, std::size_t epoch) const {
  if (!sampler_.enabled || sampler_.n_sub >= batch.num_nodes) return batch.pairs;
  std::vector<double> importance =
      sampler_.importance == Importance::Degree ? degrees_of(batch) : std::vector<double>(batch.num_nodes, 1.0);
  Rng rng(derive_seed(seed_, "sampler", phase, epoch));
  SubgraphSample s =
      sample_subgraph(sampling_probabilities(importance, sampler_.k_mix, sampler_.alpha_sharp), sampler_.n_sub, rng);
  return restrict_pairs(batch.pairs, batch.num_nodes, s);
}

std::vector<EpochMetrics> Trainer::pretrain(const model::GraphBatch& batch, const TrainObserver* observer) {
  std::vector<EpochMetrics> history;
  if (progress_.pretrain_done) return history;
  const TrainConfig& c = config_;
  while (progress_.pretrain_epoch < c.pretrain_epochs) {
    const std::size_t epoch = progress_.pretrain_epoch;
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix u = model_.draw_uniforms(batch, derive_seed(seed_, "encoder-noise", 0, epoch));
    const prob::PairSet pairs = egen_pairs(batch, 0, epoch);
    ad::Tape tape;
    ElboGraph g = elbo(tape, store_, model_, batch, nullptr, u, c.weights, {}, &pairs);
    const ElboTerms v = g.values();
    const double objective = g.objective.value().item();
    check_finite(objective, "pretraining objective");
    store_.zero_grad();
    tape.backward(ad::negate(g.objective), store_);
    pre_.step(store_, inference_names_, c.lr_unsup);

    EpochMetrics m{epoch, kNaN, v.l_egen, v.l_kl, kNaN, kNaN, kNaN, 0.0};
    if (c.record_wall_time)
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(m);
    if (observer && observer->on_epoch) observer->on_epoch(m);

    ++progress_.pretrain_epoch;
    if (epoch == 0 || objective > progress_.best_objective + c.pretrain_tol) {
      progress_.best_objective = objective;
      progress_.objective_wait = 0;
    } else if (++progress_.objective_wait >= c.patience) {
      break;
    }
  }
  progress_.pretrain_done = true;
  return history;
}

std::vector<EpochMetrics> Trainer::finetune(const model::GraphBatch& batch, const TaskTargets& targets,
                                            const Evaluator& evaluate, const TrainObserver* observer) {
  std::vector<EpochMetrics> history;
  if (progress_.finetune_done) return history;
  const TrainConfig& c = config_;
  while (progress_.finetune_epoch < c.finetune_epochs) {
    const std::size_t epoch = progress_.finetune_epoch;
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix u = model_.draw_uniforms(batch, derive_seed(seed_, "encoder-noise", 1, epoch));

    // Encode and partition once; both stay fixed through the inner steps.
    Matrix z_fixed, part_fixed;
    {
      ad::Tape tape;
      model::Posterior post = model_.encode(tape, store_, batch, u);
      ad::Var part = model_.partition(tape, batch, post.z, model_.gamma(tape, store_));
      z_fixed = post.z.value();
      part_fixed = part.value();
    }
    for (std::size_t step = 0; step < c.inner_steps; ++step) {
      if (observer && observer->on_inner_step) observer->on_inner_step(epoch, step, part_fixed);
      ad::Tape tape;
      model::ForwardOptions opts{true, derive_seed(seed_, "dropout", epoch, step)};
      ad::Var logits = model_.generative_forward(tape, store_, batch, tape.constant(z_fixed),
                                                 tape.constant(part_fixed), opts);
      ad::Var l_task = task_loglik(logits, targets);
      check_finite(l_task.value().item(), "task log-likelihood");
      store_.zero_grad();
      tape.backward(ad::scale(l_task, -c.weights.task), store_);
      theta_.step(store_, generative_names_, c.lr_theta, c.weight_decay, decayed_names_);
    }

    // One inference-side step on the full objective.
    ElboTerms v;
    {
      const prob::PairSet pairs = egen_pairs(batch, 1, epoch);
      ad::Tape tape;
      model::ForwardOptions opts{true, derive_seed(seed_, "dropout", epoch, c.inner_steps)};
      ElboGraph g = elbo(tape, store_, model_, batch, &targets, u, c.weights, opts, &pairs);
      v = g.values();
      check_finite(g.objective.value().item(), "ELBO");
      store_.zero_grad();
      tape.backward(ad::negate(g.objective), store_);
      phi_.step(store_, inference_names_, c.lr_phi);
      if (observer && observer->on_phi_step) {
        ad::Tape after;
        model::Posterior post = model_.encode(after, store_, batch, u);
        observer->on_phi_step(epoch, model_.partition(after, batch, post.z, model_.gamma(after, store_)).value());
      }
    }
    store_.zero_grad();

    const auto acc = evaluate(store_, epoch);
    EpochMetrics m{epoch, v.l_task, v.l_egen, v.l_kl, acc[0], acc[1], acc[2], 0.0};
    if (c.record_wall_time)
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(m);
    if (observer && observer->on_epoch) observer->on_epoch(m);
    ++progress_.finetune_epoch;

    if (!std::isnan(acc[1])) {
      if (acc[1] > progress_.best_val) {
        progress_.best_val = acc[1];
        progress_.best_epoch = epoch;
        progress_.val_wait = 0;
        best_.clear();
        for (const auto& e : store_.entries()) best_.emplace_back(e.name, e.value);
      } else if (c.early_stopping && ++progress_.val_wait >= c.patience) {
        break;
      }
    }
  }
  progress_.finetune_done = true;
  return history;
}

void Trainer::restore_best() {
  for (const auto& [name, value] : best_) store_.value(name) = value;
}

ad::Checkpoint Trainer::checkpoint() const {
  ad::Checkpoint ckpt = ad::Checkpoint::from_store(store_);
  auto& m = ckpt.meta;
  m["seed"] = std::to_string(seed_);
  m["pretrain_epoch"] = std::to_string(progress_.pretrain_epoch);
  m["pretrain_done"] = progress_.pretrain_done ? "1" : "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", progress_.best_objective);
  m["best_objective"] = buf;
  m["objective_wait"] = std::to_string(progress_.objective_wait);
  m["finetune_epoch"] = std::to_string(progress_.finetune_epoch);
  m["finetune_done"] = progress_.finetune_done ? "1" : "0";
  std::snprintf(buf, sizeof buf, "%.17g", progress_.best_val);
  m["best_val"] = buf;
  m["best_epoch"] = std::to_string(progress_.best_epoch);
  m["val_wait"] = std::to_string(progress_.val_wait);
  pre_.save(ckpt);
  theta_.save(ckpt);
  phi_.save(ckpt);
  for (const auto& [name, value] : best_) ckpt.tensors.push_back({"best." + name, "best", value});
  return ckpt;
}

void Trainer::restore(const ad::Checkpoint& ckpt) {
  ckpt.restore(store_);
  auto get = [&](const char* key, const std::string& fallback) {
    auto it = ckpt.meta.find(key);
    return it == ckpt.meta.end() ? fallback : it->second;
  };
  progress_.pretrain_epoch = std::stoull(get("pretrain_epoch", "0"));
  progress_.pretrain_done = get("pretrain_done", config_.pretrain ? "0" : "1") == "1";
  progress_.best_objective = std::stod(get("best_objective", "0"));
  progress_.objective_wait = std::stoull(get("objective_wait", "0"));
  progress_.finetune_epoch = std::stoull(get("finetune_epoch", "0"));
  progress_.finetune_done = get("finetune_done", "0") == "1";
  progress_.best_val = std::stod(get("best_val", "-1"));
  progress_.best_epoch = std::stoull(get("best_epoch", "0"));
  progress_.val_wait = std::stoull(get("val_wait", "0"));
  // A larger budget than the checkpointed run had reopens a finished phase,
  // unless that phase ended by running out of patience.
  const bool pre_stalled = progress_.objective_wait >= config_.patience;
  progress_.pretrain_done =
      !config_.pretrain || pre_stalled || progress_.pretrain_epoch >= config_.pretrain_epochs;
  const bool ft_stalled = config_.early_stopping && progress_.val_wait >= config_.patience;
  progress_.finetune_done = ft_stalled || progress_.finetune_epoch >= config_.finetune_epochs;
  pre_.load(ckpt);
  theta_.load(ckpt);
  phi_.load(ckpt);
  best_.clear();
  for (const auto& t : ckpt.tensors)
    if (t.group == "best") best_.emplace_back(t.name.substr(5), t.value);
}

}  // namespace vepm::train
