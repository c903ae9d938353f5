#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vepm/ad/ops.hpp"
#include "vepm/ad/parameter_store.hpp"
#include "vepm/model/graph_batch.hpp"
#include "vepm/prob/distributions.hpp"

namespace vepm::model {

enum class LayerKind { Gcn, Gin };
enum class ComposerKind { Gnn, Dense };
enum class PartitionMode { Learned, Even, Random };
enum class InputMode { FeaturesAndZ, FeaturesOnly, ZOnly, Random };

LayerKind parse_layer_kind(std::string_view s);
ComposerKind parse_composer_kind(std::string_view s);
PartitionMode parse_partition_mode(std::string_view s);
InputMode parse_input_mode(std::string_view s);
std::string_view to_string(LayerKind v);
std::string_view to_string(ComposerKind v);
std::string_view to_string(PartitionMode v);
std::string_view to_string(InputMode v);

struct ModelConfig {
  std::size_t k_meta = 4;
  std::size_t block_width = 4;  // communities per metacommunity
  double tau = 1.0;
  std::size_t encoder_layers = 2;
  std::size_t bank_layers = 2;
  std::size_t composer_layers = 2;
  std::size_t hidden_dim = 64;
  std::size_t encoder_hidden = 0;  // 0: same as hidden_dim
  LayerKind layer_kind = LayerKind::Gcn;
  ComposerKind composer_kind = ComposerKind::Gnn;
  PartitionMode partition_mode = PartitionMode::Learned;
  InputMode input_mode = InputMode::FeaturesAndZ;
  std::size_t mc_samples = 1;
  double dropout = 0.5;
  prob::GammaPrior prior;
  std::uint64_t random_partition_seed = 0;

  std::size_t communities() const noexcept { return k_meta * block_width; }
  /// Hidden width of each community GNN: ceil(hidden_dim / k_meta).
  std::size_t bank_width() const noexcept { return (hidden_dim + k_meta - 1) / k_meta; }
  std::size_t encoder_width() const noexcept { return encoder_hidden ? encoder_hidden : hidden_dim; }
  /// Throws std::invalid_argument on zero counts, tau <= 0, bad dropout.
  void validate() const;
};

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

/// Variational posterior for one batch: Weibull shape/scale and one sample.
struct Posterior {
  ad::Var shape;
  ad::Var scale;
  ad::Var z;
};

struct ForwardResult {
  Posterior posterior;
  ad::Var gamma;              // 1 x C, positive
  ad::Var partition;          // E x K, rows on the simplex (undirected edges)
  std::vector<ad::Var> bank;  // K community representations
  ad::Var output;             // node logits (N x classes) or graph logits (G x classes)
};

/// The four-module architecture: community encoder (inference side), edge
/// partitioner, community-GNN bank and representation composer (generative
/// side), plus sum pooling and a linear readout for graph tasks.
class VepmModel {
 public:
  VepmModel(ModelConfig config, std::size_t input_dim, std::size_t num_classes, bool graph_task);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  bool graph_task() const noexcept { return graph_task_; }

  /// Registers every parameter (Glorot-uniform weights, zero biases, gamma at
  /// softplus^-1(1)). Encoder weights and gamma go to the inference group.
  void init_parameters(ad::ParameterStore& store, std::uint64_t seed) const;

  /// Uniforms for one reparameterized draw over the batch.
  Matrix draw_uniforms(const GraphBatch& batch, std::uint64_t seed) const;

  ad::Var gamma(ad::Tape& tape, const ad::ParameterStore& store) const;
  /// E[Z] = lambda * Gamma(1 + 1/k) under the current posterior (shape clamped).
  Matrix posterior_mean(const ad::ParameterStore& store, const GraphBatch& batch) const;
  Posterior encode(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch, const Matrix& uniforms,
                   const ForwardOptions& opts = {}) const;
  /// Per-undirected-edge weights over the K parts; each row sums to 1.
  ad::Var partition(ad::Tape& tape, const GraphBatch& batch, ad::Var z, ad::Var gamma) const;
  std::vector<ad::Var> community_bank(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                                      ad::Var z, ad::Var partition, const ForwardOptions& opts) const;
  /// Composer output: node logits for node tasks, node embeddings for graph tasks.
  ad::Var compose(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                  const std::vector<ad::Var>& bank, const ForwardOptions& opts) const;
  /// Sum pooling over each graph followed by the linear readout.
  ad::Var pool_and_readout(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                           ad::Var node_repr) const;

  /// Generative pipeline from a given Z and partition (either live or frozen constants).
  ad::Var generative_forward(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch, ad::Var z,
                             ad::Var partition, const ForwardOptions& opts, std::vector<ad::Var>* bank_out = nullptr) const;

  ForwardResult forward(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                        const Matrix& uniforms, const ForwardOptions& opts = {}) const;

  /// Class probabilities averaged over `samples` posterior draws (probabilities,
  /// not logits). Rows are nodes for node tasks and graphs for graph tasks.
  Matrix posterior_predictive(const ad::ParameterStore& store, const GraphBatch& batch, std::size_t samples,
                              std::uint64_t seed) const;

  std::vector<std::string> encoder_parameter_names() const;
  std::vector<std::string> generative_parameter_names() const;

 private:
  ModelConfig config_;
  std::size_t input_dim_;
  std::size_t num_classes_;
  bool graph_task_;
};

/// Softmax probabilities of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

}  // namespace vepm::model
