#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "vepm/ad/parameter_store.hpp"
#include "vepm/model/vepm_model.hpp"
#include "vepm/train/adam.hpp"
#include "vepm/train/elbo.hpp"
#include "vepm/train/sampler.hpp"

namespace vepm::train {

struct TrainConfig {
  std::size_t pretrain_epochs = 200;
  std::size_t finetune_epochs = 400;
  std::size_t inner_steps = 5;
  double lr_unsup = 0.01;
  double lr_theta = 0.01;
  double lr_phi = 0.001;
  double weight_decay = 0.0;  // L2 on generative weight matrices
  std::size_t patience = 50;
  double pretrain_tol = 1e-4;
  bool early_stopping = true;
  bool pretrain = true;  // false: finetune from scratch
  bool record_wall_time = false;
  ElboWeights weights;
  void validate() const;
};

/// Thrown when a loss or parameter becomes non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double l_task = 0.0;
  double l_egen = 0.0;
  double l_kl = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double wall_ms = 0.0;
};

/// CSV with header `epoch,l_task,l_egen,l_kl,train_acc,val_acc,test_acc,wall_ms`;
/// NaN cells (metrics that do not apply) are left empty.
void write_metrics_csv(const std::vector<EpochMetrics>& rows, const std::filesystem::path& file, bool append = false);

struct TrainObserver {
  /// Partition (E x K) held fixed during inner theta step `step` of `epoch`.
  std::function<void(std::size_t epoch, std::size_t step, const Matrix& partition)> on_inner_step;
  /// Partition recomputed by the phi step at the end of `epoch`.
  std::function<void(std::size_t epoch, const Matrix& partition)> on_phi_step;
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Train / validation / test accuracy of the current parameters; NaN where a
/// split is absent.
using Evaluator = std::function<std::array<double, 3>(const ad::ParameterStore&, std::size_t epoch)>;

struct TrainProgress {
  std::size_t pretrain_epoch = 0;
  bool pretrain_done = false;
  double best_objective = 0.0;
  std::size_t objective_wait = 0;
  std::size_t finetune_epoch = 0;
  bool finetune_done = false;
  double best_val = -1.0;
  std::size_t best_epoch = 0;
  std::size_t val_wait = 0;
};

/// Pretrain-finetune loop. Pretraining updates the inference side (encoder
/// and gamma) on L_egen + L_KL; every finetune epoch encodes and partitions
/// once, takes `inner_steps` generative steps on L_task with Z and the
/// partition frozen, then one inference step on the full ELBO.
class Trainer {
 public:
  Trainer(const model::VepmModel& model, ad::ParameterStore& store, TrainConfig config, SamplerConfig sampler,
          std::uint64_t seed);

  std::vector<EpochMetrics> pretrain(const model::GraphBatch& batch, const TrainObserver* observer = nullptr);
  std::vector<EpochMetrics> finetune(const model::GraphBatch& batch, const TaskTargets& targets,
                                     const Evaluator& evaluate, const TrainObserver* observer = nullptr);

  const TrainProgress& progress() const noexcept { return progress_; }
  std::uint64_t optimizer_steps() const noexcept { return pre_.steps() + theta_.steps() + phi_.steps(); }

  /// Parameters, optimizer moments, progress and the best-validation snapshot.
  ad::Checkpoint checkpoint() const;
  void restore(const ad::Checkpoint& ckpt);
  /// Copies the best-validation parameters (if any) into the store.
  void restore_best();

 private:
  prob::PairSet egen_pairs(const model::GraphBatch& batch, std::uint64_t phase, std::size_t epoch) const;
  void check_finite(double v, const char* what) const;

  const model::VepmModel& model_;
  ad::ParameterStore& store_;
  TrainConfig config_;
  SamplerConfig sampler_;
  std::uint64_t seed_;
  std::vector<std::string> inference_names_;
  std::vector<std::string> generative_names_;
  std::vector<std::string> decayed_names_;
  Adam pre_{"pretrain"};
  Adam theta_{"theta"};
  Adam phi_{"phi"};
  TrainProgress progress_;
  std::vector<std::pair<std::string, Matrix>> best_;
};

}  // namespace vepm::train
