#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vepm/eval/metrics.hpp"
#include "vepm/eval/report.hpp"
#include "vepm/graph/graph.hpp"
#include "vepm/model/vepm_model.hpp"
#include "vepm/train/trainer.hpp"

namespace vepm::eval {

enum class Protocol { Xu, Zhang };
Protocol parse_protocol(std::string_view s);
std::string_view to_string(Protocol p);

struct EpochSelection {
  std::optional<std::size_t> shared_epoch;  // Xu: one epoch for every fold
  std::vector<std::size_t> per_fold_epochs;
  std::vector<double> per_fold;
  MeanStderr summary;
};

/// Xu et al.: the epoch maximizing the fold-averaged test curve (earliest on
/// ties); every fold is scored at that same epoch.
EpochSelection select_xu(const std::vector<std::vector<double>>& test_curves);
/// Zhang et al.: each fold's validation curve picks its epoch (earliest on
/// ties); the test curve is read once at that epoch.
EpochSelection select_zhang(const std::vector<std::vector<double>>& val_curves,
                            const std::vector<std::vector<double>>& test_curves);

struct ReducedMask {
  std::vector<std::uint8_t> train;
  std::vector<std::string> warnings;
};
/// Keeps round(keep_rate * n_c) training labels of every class c (at least
/// one when n_c > 0 and keep_rate > 0), chosen by a seeded shuffle.
ReducedMask reduce_training_mask(const std::vector<std::uint8_t>& train, const std::vector<int>& labels,
                                 double keep_rate, std::uint64_t seed);

struct PipelineConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  train::SamplerConfig sampler;
  bool row_normalize = false;
  std::uint64_t seed = 0;
  std::string dataset;
  std::vector<std::pair<std::string, std::string>> snapshot;  // copied into reports
};

/// Node classification on one graph with a standard split: owns the batch,
/// model, parameters and trainer for one run.
class NodeSession {
 public:
  NodeSession(const Graph& graph, PipelineConfig config, double keep_rate = 1.0);

  const model::VepmModel& model() const noexcept { return model_; }
  const model::GraphBatch& batch() const noexcept { return batch_; }
  ad::ParameterStore& store() noexcept { return store_; }
  train::Trainer& trainer() noexcept { return trainer_; }
  const std::vector<std::uint8_t>& train_mask() const noexcept { return train_mask_; }

  std::vector<train::EpochMetrics> pretrain(const train::TrainObserver* observer = nullptr);
  /// Finetunes and restores the best-validation parameters.
  std::vector<train::EpochMetrics> finetune(const train::TrainObserver* observer = nullptr);

  /// Test accuracy with `model.mc_samples` posterior draws plus NMI values.
  EvalReport report();
  /// NMI between node labels and communities hard-assigned from the posterior mean of Z.
  double community_nmi();
  /// Accuracy on train/val/test with a given number of draws and seed.
  std::array<double, 3> accuracies(std::size_t samples, std::uint64_t seed);

 private:
  const Graph& graph_;
  PipelineConfig config_;
  double keep_rate_;
  model::GraphBatch batch_;
  model::VepmModel model_;
  ad::ParameterStore store_;
  train::Trainer trainer_;
  std::vector<std::uint8_t> train_mask_;
  std::vector<std::string> warnings_;
  std::optional<double> nmi_pretrain_;
};

/// Standard pipeline at a reduced label rate: pretrain, finetune, report.
EvalReport reduced_label_run(const Graph& graph, double keep_rate, const PipelineConfig& config);

struct CvOptions {
  std::size_t folds = 10;
  Protocol protocol = Protocol::Xu;
  std::size_t jobs = 1;
};

struct CvResult {
  EvalReport report;
  std::vector<train::EpochMetrics> pretrain_history;
  std::vector<std::vector<train::EpochMetrics>> fold_histories;
  std::size_t training_runs = 0;
};

struct GraphPretrain {
  ad::ParameterStore store;
  ad::Checkpoint checkpoint;  // trainer state after pretraining
  std::vector<train::EpochMetrics> history;
};

/// Label-free pretraining of the inference side on the whole collection,
/// optionally continuing from a trainer checkpoint.
GraphPretrain pretrain_graphs(const GraphCollection& collection, const PipelineConfig& config,
                              const ad::Checkpoint* resume = nullptr);

/// Model configuration with the random-partition seed derived from the run seed.
model::ModelConfig seeded_model_config(const PipelineConfig& config);

/// Graph classification by stratified k-fold cross-validation. The inference
/// side is pretrained once on the whole (label-free) collection, or taken
/// from `pretrained` when given; every fold then finetunes its own copy for
/// a fixed epoch budget.
CvResult cross_validate_graphs(const GraphCollection& collection, const PipelineConfig& config,
                               const CvOptions& options, const ad::ParameterStore* pretrained = nullptr);

/// Builds the model matching a graph collection and initializes its store.
model::VepmModel make_graph_model(const GraphCollection& collection, const model::ModelConfig& config);

}  // namespace vepm::eval
