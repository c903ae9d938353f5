#include "vepm/eval/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "vepm/core/rng.hpp"
#include "vepm/graph/kfold.hpp"

namespace vepm::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ad::ParameterStore initial_store(const model::VepmModel& m, std::uint64_t seed) {
  ad::ParameterStore s;
  m.init_parameters(s, seed);
  return s;
}

model::ModelConfig seeded(model::ModelConfig m, std::uint64_t seed) {
  m.random_partition_seed = derive_seed(seed, "random-partition");
  return m;
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

Protocol parse_protocol(std::string_view s) {
  if (s == "xu") return Protocol::Xu;
  if (s == "zhang") return Protocol::Zhang;
  throw std::invalid_argument("unknown protocol '" + std::string(s) + "' (expected xu or zhang)");
}

std::string_view to_string(Protocol p) { return p == Protocol::Xu ? "xu" : "zhang"; }

EpochSelection select_xu(const std::vector<std::vector<double>>& test_curves) {
  if (test_curves.empty()) throw std::invalid_argument("select_xu: no folds");
  std::size_t epochs = test_curves.front().size();
  for (const auto& c : test_curves) epochs = std::min(epochs, c.size());
  if (epochs == 0) throw std::invalid_argument("select_xu: empty curves");
  std::vector<double> mean(epochs, 0.0);
  for (const auto& c : test_curves)
    for (std::size_t e = 0; e < epochs; ++e) mean[e] += c[e] / static_cast<double>(test_curves.size());
  EpochSelection s;
  s.shared_epoch = argmax_first(mean);
  for (const auto& c : test_curves) {
    s.per_fold.push_back(c[*s.shared_epoch]);
    s.per_fold_epochs.push_back(*s.shared_epoch);
  }
  s.summary = mean_stderr(s.per_fold);
  return s;
}

EpochSelection select_zhang(const std::vector<std::vector<double>>& val_curves,
                            const std::vector<std::vector<double>>& test_curves) {
  if (val_curves.size() != test_curves.size() || val_curves.empty())
    throw std::invalid_argument("select_zhang: fold count mismatch");
  EpochSelection s;
  for (std::size_t f = 0; f < val_curves.size(); ++f) {
    if (val_curves[f].empty() || val_curves[f].size() != test_curves[f].size())
      throw std::invalid_argument("select_zhang: curve length mismatch");
    const std::size_t e = argmax_first(val_curves[f]);
    s.per_fold_epochs.push_back(e);
    s.per_fold.push_back(test_curves[f][e]);
  }
  s.summary = mean_stderr(s.per_fold);
  return s;
}

ReducedMask reduce_training_mask(const std::vector<std::uint8_t>& train, const std::vector<int>& labels,
                                 double keep_rate, std::uint64_t seed) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) throw std::invalid_argument("keep rate must be in (0, 1]");
  if (train.size() != labels.size()) throw std::invalid_argument("training mask and labels differ in length");
  ReducedMask out{train, {}};
  if (keep_rate == 1.0) return out;
  int max_label = -1;
  for (int y : labels) max_label = std::max(max_label, y);
  std::fill(out.train.begin(), out.train.end(), 0);
  for (int c = 0; c <= max_label; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train[i] && labels[i] == c) members.push_back(i);
    if (members.empty()) {
      out.warnings.push_back("class " + std::to_string(c) + " has no training labels");
      continue;
    }
    Rng rng(derive_seed(seed, "keep-rate", static_cast<std::uint64_t>(c)));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(keep_rate * static_cast<double>(members.size()))));
    for (std::size_t i = 0; i < keep; ++i) out.train[members[i]] = 1;
  }
  return out;
}

NodeSession::NodeSession(const Graph& graph, PipelineConfig config, double keep_rate)
    : graph_(graph),
      config_(std::move(config)),
      keep_rate_(keep_rate),
      batch_(model::make_node_batch(graph, config_.row_normalize)),
      model_(seeded(config_.model, config_.seed), graph.features.cols(), graph.num_classes(), false),
      store_(initial_store(model_, config_.seed)),
      trainer_(model_, store_, config_.train, config_.sampler, config_.seed) {
  if (!graph.masks) throw std::invalid_argument("node classification needs train/val/test masks");
  if (config_.model.input_mode == model::InputMode::Random) model::attach_noise_features(batch_, config_.seed);
  ReducedMask r = reduce_training_mask(graph.masks->train, graph.labels, keep_rate_, config_.seed);
  train_mask_ = std::move(r.train);
  warnings_ = std::move(r.warnings);
}

std::array<double, 3> NodeSession::accuracies(std::size_t samples, std::uint64_t seed) {
  const Matrix p = model_.posterior_predictive(store_, batch_, samples, seed);
  auto acc = [&](const std::vector<std::uint8_t>& mask) {
    auto rows = train::mask_indices(mask);
    return rows.empty() ? kNaN : accuracy(p, graph_.labels, rows);
  };
  return {acc(train_mask_), acc(graph_.masks->val), acc(graph_.masks->test)};
}

double NodeSession::community_nmi() {
  ad::Tape tape;
  const Matrix g = model_.gamma(tape, store_).value();
  const auto assign = hard_assign_communities(model_.posterior_mean(store_, batch_), g.data(), model_.config().k_meta);
  return nmi(assign, graph_.labels);
}

std::vector<train::EpochMetrics> NodeSession::pretrain(const train::TrainObserver* observer) {
  auto h = trainer_.pretrain(batch_, observer);
  nmi_pretrain_ = community_nmi();
  return h;
}

std::vector<train::EpochMetrics> NodeSession::finetune(const train::TrainObserver* observer) {
  const train::TaskTargets targets =
      train::make_targets(graph_.labels, train::mask_indices(train_mask_), model_.num_classes());
  const std::size_t samples = model_.config().mc_samples;
  auto evaluate = [this, samples](const ad::ParameterStore&, std::size_t epoch) {
    return accuracies(samples, derive_seed(config_.seed, "eval", epoch));
  };
  auto h = trainer_.finetune(batch_, targets, evaluate, observer);
  trainer_.restore_best();
  return h;
}

EvalReport NodeSession::report() {
  EvalReport r;
  r.protocol = "standard";
  r.dataset = config_.dataset;
  r.seed = config_.seed;
  r.keep_rate = keep_rate_;
  const auto acc = accuracies(model_.config().mc_samples, derive_seed(config_.seed, "final"));
  r.accuracy_mean = acc[2];
  r.per_fold = {acc[2]};
  if (trainer_.progress().best_val >= 0.0) r.selected_epoch = trainer_.progress().best_epoch;
  r.nmi_pretrain = nmi_pretrain_;
  r.nmi_finetune = community_nmi();
  r.config = config_.snapshot;
  r.warnings = warnings_;
  return r;
}

EvalReport reduced_label_run(const Graph& graph, double keep_rate, const PipelineConfig& config) {
  NodeSession s(graph, config, keep_rate);
  s.pretrain();
  s.finetune();
  return s.report();
}

model::VepmModel make_graph_model(const GraphCollection& collection, const model::ModelConfig& config) {
  if (collection.size() == 0) throw std::invalid_argument("empty graph collection");
  return model::VepmModel(config, collection.graphs.front().features.cols(), collection.num_classes(), true);
}

model::ModelConfig seeded_model_config(const PipelineConfig& config) { return seeded(config.model, config.seed); }

GraphPretrain pretrain_graphs(const GraphCollection& collection, const PipelineConfig& config,
                              const ad::Checkpoint* resume) {
  collection.validate();
  const model::VepmModel model = make_graph_model(collection, seeded(config.model, config.seed));
  std::vector<std::size_t> all(collection.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  model::GraphBatch batch = model::make_graph_batch(collection, all);
  if (config.model.input_mode == model::InputMode::Random) model::attach_noise_features(batch, config.seed);
  GraphPretrain out{initial_store(model, config.seed), {}, {}};
  train::Trainer t(model, out.store, config.train, config.sampler, config.seed);
  if (resume) t.restore(*resume);
  if (config.train.pretrain) out.history = t.pretrain(batch);
  out.checkpoint = t.checkpoint();
  return out;
}

CvResult cross_validate_graphs(const GraphCollection& collection, const PipelineConfig& config,
                               const CvOptions& options, const ad::ParameterStore* pretrained) {
  collection.validate();
  if (options.folds < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  const model::VepmModel model = make_graph_model(collection, seeded(config.model, config.seed));
  const bool noise = config.model.input_mode == model::InputMode::Random;
  auto batch_of = [&](const std::vector<std::size_t>& idx) {
    model::GraphBatch b = model::make_graph_batch(collection, idx);
    if (noise) model::attach_noise_features(b, config.seed);
    return b;
  };

  CvResult result;
  ad::ParameterStore base;
  if (pretrained) {
    base = *pretrained;
  } else {
    GraphPretrain p = pretrain_graphs(collection, config);
    base = std::move(p.store);
    result.pretrain_history = std::move(p.history);
  }

  const auto folds = stratified_kfold_split(collection.graph_labels, options.folds, derive_seed(config.seed, "cv"));
  const std::size_t classes = collection.num_classes();
  std::vector<std::string> warnings;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::uint8_t> seen(classes, 0);
    for (std::size_t i : folds[f].train) seen[static_cast<std::size_t>(collection.graph_labels[i])] = 1;
    for (std::size_t c = 0; c < classes; ++c)
      if (!seen[c]) warnings.push_back("class " + std::to_string(c) + " absent from training fold " + std::to_string(f));
  }

  result.fold_histories.resize(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());
  auto run_fold = [&](std::size_t f) {
    std::vector<std::size_t> train_idx = folds[f].train, val_idx;
    if (options.protocol == Protocol::Zhang) {
      std::vector<int> sub;
      for (std::size_t i : train_idx) sub.push_back(collection.graph_labels[i]);
      const auto inner = stratified_kfold_split(sub, options.folds - 1, derive_seed(config.seed, "cv-inner", f));
      std::vector<std::size_t> kept;
      for (std::size_t i : inner.front().test) val_idx.push_back(train_idx[i]);
      for (std::size_t i : inner.front().train) kept.push_back(train_idx[i]);
      std::sort(val_idx.begin(), val_idx.end());
      std::sort(kept.begin(), kept.end());
      train_idx = std::move(kept);
    }
    const model::GraphBatch train_batch = batch_of(train_idx);
    const model::GraphBatch test_batch = batch_of(folds[f].test);
    std::optional<model::GraphBatch> val_batch;
    if (!val_idx.empty()) val_batch = batch_of(val_idx);

    auto labels_of = [&](const std::vector<std::size_t>& idx) {
      std::vector<int> y;
      for (std::size_t i : idx) y.push_back(collection.graph_labels[i]);
      return y;
    };
    auto all_rows = [](std::size_t n) {
      std::vector<std::size_t> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = i;
      return r;
    };
    const std::vector<int> ytr = labels_of(train_idx), yte = labels_of(folds[f].test), yva = labels_of(val_idx);
    const train::TaskTargets targets = train::make_targets(ytr, all_rows(ytr.size()), classes);

    ad::ParameterStore store = base;
    train::TrainConfig tc = config.train;
    tc.pretrain = false;
    tc.early_stopping = false;
    const std::uint64_t fold_seed = derive_seed(config.seed, "fold", f);
    train::Trainer trainer(model, store, tc, config.sampler, fold_seed);
    const std::size_t samples = config.model.mc_samples;
    auto evaluate = [&](const ad::ParameterStore& s, std::size_t epoch) -> std::array<double, 3> {
      const std::uint64_t es = derive_seed(fold_seed, "eval", epoch);
      const double tr = accuracy(model.posterior_predictive(s, train_batch, samples, es), ytr, all_rows(ytr.size()));
      const double te =
          accuracy(model.posterior_predictive(s, test_batch, samples, es), yte, all_rows(yte.size()));
      const double va = val_batch ? accuracy(model.posterior_predictive(s, *val_batch, samples, es), yva,
                                             all_rows(yva.size()))
                                  : kNaN;
      return {tr, va, te};
    };
    result.fold_histories[f] = trainer.finetune(train_batch, targets, evaluate);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.jobs, folds.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f; (f = next.fetch_add(1)) < folds.size();) {
      try {
        run_fold(f);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  result.training_runs = folds.size();

  std::vector<std::vector<double>> test_curves, val_curves;
  for (const auto& h : result.fold_histories) {
    std::vector<double> te, va;
    for (const auto& m : h) {
      te.push_back(m.test_acc);
      va.push_back(m.val_acc);
    }
    test_curves.push_back(std::move(te));
    val_curves.push_back(std::move(va));
  }
  const EpochSelection sel =
      options.protocol == Protocol::Xu ? select_xu(test_curves) : select_zhang(val_curves, test_curves);

  EvalReport& r = result.report;
  r.protocol = std::string(to_string(options.protocol));
  r.dataset = config.dataset;
  r.seed = config.seed;
  r.accuracy_mean = sel.summary.mean;
  r.accuracy_stderr = sel.summary.std_error;
  r.per_fold = sel.per_fold;
  r.selected_epoch = sel.shared_epoch;
  r.per_fold_epochs = sel.per_fold_epochs;
  r.config = config.snapshot;
  r.warnings = std::move(warnings);
  return result;
}

}  // namespace vepm::eval
