#include "vepm/model/vepm_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vepm/core/rng.hpp"

namespace vepm::model {

namespace {

using ad::Var;

template <typename E>
E parse_enum(std::string_view s, std::initializer_list<std::pair<std::string_view, E>> table, const char* what) {
  for (const auto& [name, v] : table)
    if (name == s) return v;
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

// One input block of a layer: either a constant sparse matrix or a Var.
struct Input {
  std::string tag;
  std::shared_ptr<const SparseMatrix> sparse;
  Var dense;
  std::size_t width() const { return sparse ? sparse->n_cols() : dense.cols(); }
};

// How a layer aggregates over neighbors after its linear transform.
struct Propagation {
  enum class Kind { None, Fixed, WeightedGcn, Sum, WeightedSum } kind = Kind::None;
  std::shared_ptr<const SparseMatrix> matrix;   // Fixed (normalized) or Sum (raw A)
  std::shared_ptr<const ad::EdgeIndex> edges;   // weighted kinds
  Var edge_weights;                             // E_dir x 1
  Var self_weights;                             // N x 1, WeightedGcn
};

std::shared_ptr<const SparseMatrix> sparse_dropout(const std::shared_ptr<const SparseMatrix>& s, double rate,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(s->values().begin(), s->values().end());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& x : v) x = rng.uniform() < rate ? 0.0 : x * keep_scale;
  return std::make_shared<SparseMatrix>(s->with_values(std::move(v)));
}

Matrix glorot(std::size_t in, std::size_t fan_in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + out));
  Matrix w(in, out);
  for (double& v : w.data()) v = rng.uniform(-a, a);
  return w;
}

std::string weight_name(const std::string& prefix, LayerKind kind, const std::string& tag) {
  return prefix + (kind == LayerKind::Gin ? ".w1" : ".w") + tag;
}

void register_layer(ad::ParameterStore& store, ad::ParamGroup group, const std::string& prefix, LayerKind kind,
                    const std::vector<std::pair<std::string, std::size_t>>& inputs, std::size_t out, Rng& rng) {
  std::size_t fan_in = 0;
  for (const auto& in : inputs) fan_in += in.second;
  for (const auto& [tag, width] : inputs) store.add(weight_name(prefix, kind, tag), group, glorot(width, fan_in, out, rng));
  if (kind == LayerKind::Gin) {
    store.add(prefix + ".b1", group, Matrix(1, out));
    store.add(prefix + ".w2", group, glorot(out, out, out, rng));
    store.add(prefix + ".b2", group, Matrix(1, out));
    store.add(prefix + ".eps", group, Matrix(1, 1));
  } else {
    store.add(prefix + ".b", group, Matrix(1, out));
  }
}

Var propagate(ad::Tape& tape, const ad::ParameterStore& store, const std::string& prefix, LayerKind kind,
              const Propagation& p, Var t) {
  using K = Propagation::Kind;
  switch (p.kind) {
    case K::None:
      return t;
    case K::Fixed:
      return ad::sparse_dense_matmul(p.matrix, t);
    case K::WeightedGcn:
      return ad::add(ad::edge_weighted_matmul(p.edges, p.edge_weights, t), ad::mul(p.self_weights, t));
    case K::Sum:
    case K::WeightedSum: {
      if (kind != LayerKind::Gin) throw std::logic_error("sum aggregation requires a GIN layer");
      Var self = ad::mul(ad::add_scalar(tape.parameter(store, prefix + ".eps"), 1.0), t);
      Var nbr = p.kind == K::Sum ? ad::sparse_dense_matmul(p.matrix, t)
                                 : ad::edge_weighted_matmul(p.edges, p.edge_weights, t);
      return ad::add(self, nbr);
    }
  }
  return t;
}

// Linear transform of the (possibly multi-block) input, aggregation, bias and
// activation. GIN layers append a second linear map (two-layer MLP).
Var apply_layer(ad::Tape& tape, const ad::ParameterStore& store, const std::string& prefix, LayerKind kind,
                const std::vector<Input>& inputs, const Propagation& prop, bool activation, double dropout,
                const ForwardOptions& opts) {
  const bool drop = opts.training && dropout > 0.0;
  Var t;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const Input& in = inputs[b];
    const std::uint64_t seed = derive_seed(opts.dropout_seed, "dropout", hash_name(prefix), b);
    Var w = tape.parameter(store, weight_name(prefix, kind, in.tag));
    Var term;
    if (in.sparse) {
      term = ad::sparse_dense_matmul(drop ? sparse_dropout(in.sparse, dropout, seed) : in.sparse, w);
    } else {
      term = ad::matmul(ad::dropout(in.dense, drop ? dropout : 0.0, seed, opts.training), w);
    }
    t = t.valid() ? ad::add(t, term) : term;
  }
  Var h = propagate(tape, store, prefix, kind, prop, t);
  if (kind == LayerKind::Gin) {
    h = ad::relu(ad::add(h, tape.parameter(store, prefix + ".b1")));
    h = ad::add(ad::matmul(h, tape.parameter(store, prefix + ".w2")), tape.parameter(store, prefix + ".b2"));
  } else {
    h = ad::add(h, tape.parameter(store, prefix + ".b"));
  }
  return activation ? ad::relu(h) : h;
}

Propagation full_graph_propagation(const GraphBatch& batch, LayerKind kind) {
  Propagation p;
  if (kind == LayerKind::Gin) {
    p.kind = Propagation::Kind::Sum;
    p.matrix = batch.adjacency;
  } else {
    p.kind = Propagation::Kind::Fixed;
    p.matrix = batch.norm_adjacency;
  }
  return p;
}

// Aggregation along part k of the partition: raw weights for GIN, and for GCN
// a self loop plus symmetric normalization by the weighted degrees of A^(k).
Propagation part_propagation(ad::Tape& tape, const GraphBatch& batch, Var partition, std::size_t k,
                             LayerKind kind) {
  Propagation p;
  p.edges = batch.directed;
  Var w = ad::gather_rows(ad::slice_columns(partition, k, k + 1), batch.directed_to_undirected);
  if (kind == LayerKind::Gin) {
    p.kind = Propagation::Kind::WeightedSum;
    p.edge_weights = w;
    return p;
  }
  p.kind = Propagation::Kind::WeightedGcn;
  Var ones = tape.constant(Matrix(batch.num_nodes, 1, 1.0));
  Var deg = ad::add_scalar(ad::edge_weighted_matmul(batch.directed, w, ones), 1.0);
  Var dinv = ad::pow(deg, -0.5);
  p.edge_weights = ad::mul(w, ad::mul(ad::gather_rows(dinv, batch.directed->src), ad::gather_rows(dinv, batch.directed->dst)));
  p.self_weights = ad::reciprocal(deg);
  return p;
}

}  // namespace

LayerKind parse_layer_kind(std::string_view s) {
  return parse_enum<LayerKind>(s, {{"gcn", LayerKind::Gcn}, {"gin", LayerKind::Gin}}, "layer kind");
}
ComposerKind parse_composer_kind(std::string_view s) {
  return parse_enum<ComposerKind>(s, {{"gnn", ComposerKind::Gnn}, {"dense", ComposerKind::Dense}}, "composer kind");
}
PartitionMode parse_partition_mode(std::string_view s) {
  return parse_enum<PartitionMode>(
      s, {{"learned", PartitionMode::Learned}, {"even", PartitionMode::Even}, {"random", PartitionMode::Random}},
      "partition mode");
}
InputMode parse_input_mode(std::string_view s) {
  return parse_enum<InputMode>(s,
                               {{"features_and_z", InputMode::FeaturesAndZ},
                                {"features_only", InputMode::FeaturesOnly},
                                {"z_only", InputMode::ZOnly},
                                {"random", InputMode::Random}},
                               "input mode");
}
std::string_view to_string(LayerKind v) { return v == LayerKind::Gin ? "gin" : "gcn"; }
std::string_view to_string(ComposerKind v) { return v == ComposerKind::Dense ? "dense" : "gnn"; }
std::string_view to_string(PartitionMode v) {
  switch (v) {
    case PartitionMode::Even: return "even";
    case PartitionMode::Random: return "random";
    default: return "learned";
  }
}
std::string_view to_string(InputMode v) {
  switch (v) {
    case InputMode::FeaturesOnly: return "features_only";
    case InputMode::ZOnly: return "z_only";
    case InputMode::Random: return "random";
    default: return "features_and_z";
  }
}

void ModelConfig::validate() const {
  if (k_meta == 0 || block_width == 0 || encoder_layers == 0 || bank_layers == 0 || composer_layers == 0 ||
      hidden_dim == 0 || mc_samples == 0)
    throw std::invalid_argument("model counts must all be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("model.tau must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model.dropout must be in [0, 1)");
  prior.validate();
}

VepmModel::VepmModel(ModelConfig config, std::size_t input_dim, std::size_t num_classes, bool graph_task)
    : config_(config), input_dim_(input_dim), num_classes_(num_classes), graph_task_(graph_task) {
  config_.validate();
  if (input_dim_ == 0) throw std::invalid_argument("model input dimension must be >= 1");
  if (num_classes_ < 2) throw std::invalid_argument("model needs at least two classes");
}

void VepmModel::init_parameters(ad::ParameterStore& store, std::uint64_t seed) const {
  Rng rng(derive_seed(seed, "init"));
  const auto inf = ad::ParamGroup::Inference;
  const auto gen = ad::ParamGroup::Generative;
  const LayerKind kind = config_.layer_kind;
  const std::size_t c = config_.communities();

  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? input_dim_ : config_.encoder_width();
    const std::size_t out = l + 1 == config_.encoder_layers ? 2 * c : config_.encoder_width();
    register_layer(store, inf, "enc." + std::to_string(l), kind, {{"", in}}, out, rng);
  }
  store.add("gamma_raw", inf, Matrix(1, c, prob::inverse_softplus(1.0)));

  const std::size_t bw = config_.bank_width();
  std::vector<std::pair<std::string, std::size_t>> first;
  switch (config_.input_mode) {
    case InputMode::FeaturesAndZ: first = {{".x", input_dim_}, {".z", c}}; break;
    case InputMode::FeaturesOnly:
    case InputMode::Random: first = {{".x", input_dim_}}; break;
    case InputMode::ZOnly: first = {{".z", c}}; break;
  }
  for (std::size_t k = 0; k < config_.k_meta; ++k)
    for (std::size_t l = 0; l < config_.bank_layers; ++l) {
      const std::string prefix = "bank." + std::to_string(k) + "." + std::to_string(l);
      if (l == 0)
        register_layer(store, gen, prefix, kind, first, bw, rng);
      else
        register_layer(store, gen, prefix, kind, {{"", bw}}, bw, rng);
    }

  const LayerKind ckind = config_.composer_kind == ComposerKind::Dense ? LayerKind::Gcn : kind;
  for (std::size_t l = 0; l < config_.composer_layers; ++l) {
    const std::size_t in = l == 0 ? bw * config_.k_meta : config_.hidden_dim;
    const bool last = l + 1 == config_.composer_layers;
    const std::size_t out = (last && !graph_task_) ? num_classes_ : config_.hidden_dim;
    register_layer(store, gen, "comp." + std::to_string(l), ckind, {{"", in}}, out, rng);
  }
  if (graph_task_) {
    store.add("readout.w", gen, glorot(config_.hidden_dim, config_.hidden_dim, num_classes_, rng));
    store.add("readout.b", gen, Matrix(1, num_classes_));
  }
}

Matrix VepmModel::draw_uniforms(const GraphBatch& batch, std::uint64_t seed) const {
  Matrix u(batch.num_nodes, config_.communities());
  Rng rng(seed);
  for (double& v : u.data()) v = rng.uniform_open();
  return u;
}

Var VepmModel::gamma(ad::Tape& tape, const ad::ParameterStore& store) const {
  return ad::softplus(tape.parameter(store, "gamma_raw"));
}

Posterior VepmModel::encode(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                            const Matrix& uniforms, const ForwardOptions& opts) const {
  const std::size_t c = config_.communities();
  const Propagation prop = full_graph_propagation(batch, config_.layer_kind);
  ForwardOptions enc_opts = opts;
  enc_opts.training = false;  // the encoder runs without dropout
  std::vector<Input> in{{"", batch.features, {}}};
  Var h;
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    const bool last = l + 1 == config_.encoder_layers;
    h = apply_layer(tape, store, "enc." + std::to_string(l), config_.layer_kind, in, prop, !last, 0.0, enc_opts);
    in = {{"", nullptr, h}};
  }
  if (h.cols() != 2 * c)
    throw ShapeError("encoder output has " + std::to_string(h.cols()) + " columns, expected " + std::to_string(2 * c));
  Posterior post;
  post.shape = ad::softplus(ad::slice_columns(h, 0, c));
  post.scale = ad::softplus(ad::slice_columns(h, c, 2 * c));
  post.z = prob::weibull_rsample(post.shape, post.scale, uniforms);
  return post;
}

Matrix VepmModel::posterior_mean(const ad::ParameterStore& store, const GraphBatch& batch) const {
  ad::Tape tape;
  const Posterior post =
      encode(tape, store, batch, Matrix(batch.num_nodes, config_.communities(), 0.5));
  const Matrix& k = post.shape.value();
  const Matrix& lambda = post.scale.value();
  Matrix out(k.rows(), k.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = prob::weibull_mean(std::clamp(k[i], prob::kShapeMin, prob::kShapeMax), lambda[i]);
  return out;
}

Var VepmModel::partition(ad::Tape& tape, const GraphBatch& batch, Var z, Var gamma) const {
  const std::size_t k = config_.k_meta;
  const std::size_t e = batch.num_edges();
  switch (config_.partition_mode) {
    case PartitionMode::Learned:
      return ad::row_softmax_with_temperature(
          prob::edge_block_rates(z, gamma, batch.pairs.src, batch.pairs.dst, k), config_.tau);
    case PartitionMode::Even:
      return tape.constant(Matrix(e, k, 1.0 / static_cast<double>(k)));
    case PartitionMode::Random: {
      Matrix w(e, k);
      for (std::size_t i = 0; i < e; ++i) {
        Rng rng(derive_seed(config_.random_partition_seed, "random-partition", batch.edge_keys[i]));
        double mx = 0.0;
        for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, w(i, j) = rng.uniform(0.0, 100.0));
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += w(i, j) = std::exp(w(i, j) - mx);
        for (std::size_t j = 0; j < k; ++j) w(i, j) /= s;
      }
      return tape.constant(std::move(w));
    }
  }
  throw std::logic_error("unreachable partition mode");
}

std::vector<Var> VepmModel::community_bank(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                                           Var z, Var partition, const ForwardOptions& opts) const {
  std::vector<Input> first;
  switch (config_.input_mode) {
    case InputMode::FeaturesAndZ: first = {{".x", batch.features, {}}, {".z", nullptr, z}}; break;
    case InputMode::FeaturesOnly: first = {{".x", batch.features, {}}}; break;
    case InputMode::ZOnly: first = {{".z", nullptr, z}}; break;
    case InputMode::Random:
      if (!batch.noise_features) throw std::invalid_argument("random input mode needs noise features on the batch");
      first = {{".x", batch.noise_features, {}}};
      break;
  }
  std::vector<Var> out;
  for (std::size_t k = 0; k < config_.k_meta; ++k) {
    const Propagation prop = part_propagation(tape, batch, partition, k, config_.layer_kind);
    std::vector<Input> in = first;
    Var h;
    for (std::size_t l = 0; l < config_.bank_layers; ++l) {
      h = apply_layer(tape, store, "bank." + std::to_string(k) + "." + std::to_string(l), config_.layer_kind, in, prop,
                      true, config_.dropout, opts);
      in = {{"", nullptr, h}};
    }
    out.push_back(h);
  }
  return out;
}

Var VepmModel::compose(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                       const std::vector<Var>& bank, const ForwardOptions& opts) const {
  const bool dense = config_.composer_kind == ComposerKind::Dense;
  const LayerKind kind = dense ? LayerKind::Gcn : config_.layer_kind;
  const Propagation prop = dense ? Propagation{} : full_graph_propagation(batch, kind);
  Var h = ad::concat_columns(bank);
  for (std::size_t l = 0; l < config_.composer_layers; ++l) {
    const bool last = l + 1 == config_.composer_layers;
    h = apply_layer(tape, store, "comp." + std::to_string(l), kind, {{"", nullptr, h}}, prop, graph_task_ || !last,
                    config_.dropout, opts);
  }
  return h;
}

Var VepmModel::pool_and_readout(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                                Var node_repr) const {
  if (batch.num_nodes == 0) throw std::invalid_argument("cannot pool an empty graph");
  Var pooled = batch.pairs.segments ? ad::sparse_dense_matmul(batch.pairs.segments, node_repr)
                                    : ad::reduce_sum(node_repr, ad::Axis::Rows);
  return ad::add(ad::matmul(pooled, tape.parameter(store, "readout.w")), tape.parameter(store, "readout.b"));
}

Var VepmModel::generative_forward(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch, Var z,
                                  Var partition, const ForwardOptions& opts, std::vector<Var>* bank_out) const {
  std::vector<Var> bank = community_bank(tape, store, batch, z, partition, opts);
  Var h = compose(tape, store, batch, bank, opts);
  if (bank_out) *bank_out = bank;
  return graph_task_ ? pool_and_readout(tape, store, batch, h) : h;
}

ForwardResult VepmModel::forward(ad::Tape& tape, const ad::ParameterStore& store, const GraphBatch& batch,
                                 const Matrix& uniforms, const ForwardOptions& opts) const {
  ForwardResult r;
  r.posterior = encode(tape, store, batch, uniforms, opts);
  r.gamma = gamma(tape, store);
  r.partition = partition(tape, batch, r.posterior.z, r.gamma);
  r.output = generative_forward(tape, store, batch, r.posterior.z, r.partition, opts, &r.bank);
  return r;
}

Matrix VepmModel::posterior_predictive(const ad::ParameterStore& store, const GraphBatch& batch,
                                       std::size_t samples, std::uint64_t seed) const {
  if (samples == 0) throw std::invalid_argument("posterior_predictive needs at least one sample");
  Matrix avg;
  for (std::size_t s = 0; s < samples; ++s) {
    ad::Tape tape;
    ForwardResult r = forward(tape, store, batch, draw_uniforms(batch, derive_seed(seed, "mc", s)));
    Matrix p = softmax_rows(r.output.value());
    if (s == 0) {
      avg = std::move(p);
    } else {
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += p[i];
    }
  }
  for (double& v : avg.data()) v /= static_cast<double>(samples);
  return avg;
}

std::vector<std::string> VepmModel::encoder_parameter_names() const {
  ad::ParameterStore tmp;
  init_parameters(tmp, 0);
  return tmp.names(ad::ParamGroup::Inference);
}

std::vector<std::string> VepmModel::generative_parameter_names() const {
  ad::ParameterStore tmp;
  init_parameters(tmp, 0);
  return tmp.names(ad::ParamGroup::Generative);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += p(i, j) = std::exp(r[j] - mx);
    for (std::size_t j = 0; j < r.size(); ++j) p(i, j) /= s;
  }
  return p;
}

}  // namespace vepm::model
