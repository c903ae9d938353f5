#include "vepm/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "vepm/cli/verify.hpp"
#include "vepm/eval/confusion.hpp"
#include "vepm/eval/metrics.hpp"
#include "vepm/eval/protocols.hpp"
#include "vepm/graph/dataset_io.hpp"
#include "vepm/graph/synthetic.hpp"
#include "vepm/model/graph_batch.hpp"

namespace vepm::cli {

namespace fs = std::filesystem;

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void ensure_out_dir(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + c.out_dir.string() + ": " + ec.message());
}

ad::Checkpoint read_checkpoint(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw ConfigError("checkpoint not found: " + file.string());
  try {
    return ad::load_checkpoint(file);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

const char* task_name(Task t) { return t == Task::Node ? "node" : "graph"; }

void check_task(const ad::Checkpoint& ckpt, const RunConfig& c) {
  auto it = ckpt.meta.find("task");
  if (it != ckpt.meta.end() && it->second != task_name(c.task))
    throw ConfigError("checkpoint was written for a " + it->second + " task, config has " + task_name(c.task));
}

// Restore errors (missing tensors, shape or group mismatches) mean the
// checkpoint and the config describe different models.
template <class F>
void restore_or_config_error(F&& f) {
  try {
    f();
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("checkpoint does not match config: ") + e.what());
  }
}

void save_with_meta(ad::Checkpoint ckpt, const RunConfig& c) {
  ckpt.meta["task"] = task_name(c.task);
  ad::save_checkpoint(ckpt, c.out_dir / "checkpoint.bin");
}

Graph load_node(const RunConfig& c) {
  require_dataset(c);
  return load_node_dataset(c.dataset_path);
}

GraphCollection load_graphs(const RunConfig& c) {
  require_dataset(c);
  return load_graph_dataset(c.dataset_path);
}

std::vector<train::EpochMetrics> fold_average(const std::vector<std::vector<train::EpochMetrics>>& folds) {
  std::size_t epochs = folds.empty() ? 0 : folds.front().size();
  for (const auto& f : folds) epochs = std::min(epochs, f.size());
  std::vector<train::EpochMetrics> out(epochs);
  const double n = static_cast<double>(folds.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    train::EpochMetrics& m = out[e];
    m = {e, 0, 0, 0, 0, 0, 0, 0};
    for (const auto& f : folds) {
      m.l_task += f[e].l_task / n;
      m.l_egen += f[e].l_egen / n;
      m.l_kl += f[e].l_kl / n;
      m.train_acc += f[e].train_acc / n;
      m.val_acc += f[e].val_acc / n;
      m.test_acc += f[e].test_acc / n;
      m.wall_ms += f[e].wall_ms / n;
    }
  }
  return out;
}

void write_confusions(const std::vector<Matrix>& bank, const std::vector<int>& labels, const RunConfig& c,
                      eval::EvalReport& report) {
  eval::ConfusionResult cr = eval::community_confusion_matrices(bank, labels, c.folds,
                                                                derive_seed(c.seed, "confusion"));
  for (std::size_t k = 0; k < cr.matrices.size(); ++k)
    write_matrix_csv(cr.matrices[k], c.out_dir / ("confusion_" + std::to_string(k) + ".csv"));
  report.confusion = std::move(cr.matrices);
  report.confusion_classifier = "one-vs-rest ridge, stratified cross-validation";
  for (auto& w : cr.warnings) report.warnings.push_back(std::move(w));
}

// Bank outputs of one fixed posterior draw (no dropout).
std::vector<Matrix> bank_embeddings(const model::VepmModel& m, const ad::ParameterStore& store,
                                    const model::GraphBatch& batch, std::uint64_t seed) {
  ad::Tape tape;
  model::ForwardResult fr = m.forward(tape, store, batch, m.draw_uniforms(batch, seed));
  std::vector<Matrix> out;
  for (const auto& h : fr.bank) out.push_back(h.value());
  return out;
}

eval::CvOptions cv_options(const RunConfig& c) { return {c.folds, c.protocol, c.jobs}; }

struct NodeRun {
  eval::EvalReport report;
  std::vector<train::EpochMetrics> pretrain, finetune;
};

NodeRun run_node_pipeline(const Graph& g, const RunConfig& c) {
  eval::NodeSession s(g, c.pipeline(), c.keep_rate);
  NodeRun r;
  r.pretrain = s.pretrain();
  r.finetune = s.finetune();
  r.report = s.report();
  return r;
}

eval::EvalReport run_once(const RunConfig& c) {
  if (c.task == Task::Node) {
    const Graph g = load_node(c);
    return run_node_pipeline(g, c).report;
  }
  const GraphCollection col = load_graphs(c);
  return eval::cross_validate_graphs(col, c.pipeline(), cv_options(c)).report;
}

}  // namespace

RunConfig resolve_config(const Overrides& o) {
  std::map<std::string, std::string> values;
  fs::path base;
  if (o.config) {
    std::ifstream in(*o.config);
    if (!in) throw ConfigError("cannot read config file " + o.config->string());
    values = parse_key_values(in);
    base = o.config->parent_path();
  }
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
    values[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (o.seed) values["run.seed"] = std::to_string(*o.seed);
  if (o.jobs) values["run.jobs"] = std::to_string(*o.jobs);
  if (o.out) values["run.out"] = o.out->string();
  if (o.protocol) values["eval.protocol"] = *o.protocol;
  if (o.keep_rate) values["eval.keep_rate"] = real(*o.keep_rate);
  if (o.mc_samples) values["model.mc_samples"] = std::to_string(*o.mc_samples);
  return run_config_from_values(values, base);
}

void check_precision_env(std::ostream& log) {
  const char* p = std::getenv("VEPM_PRECISION");
  if (!p || std::string_view(p).empty() || std::string_view(p) == "f64") return;
  if (std::string_view(p) == "f32") {
    log << "warning: VEPM_PRECISION=f32 is not supported; computing in f64\n";
    return;
  }
  throw ConfigError(std::string("VEPM_PRECISION must be f32 or f64, got '") + p + "'");
}

int cmd_pretrain(const RunConfig& c, const std::optional<fs::path>& resume, std::ostream& log) {
  std::optional<ad::Checkpoint> ckpt;
  if (resume) {
    ckpt = read_checkpoint(*resume);
    check_task(*ckpt, c);
  }
  ensure_out_dir(c);
  RunConfig pc = c;
  pc.train.pretrain = true;
  if (c.task == Task::Node) {
    const Graph g = load_node(c);
    eval::NodeSession s(g, pc.pipeline(), c.keep_rate);
    if (ckpt) restore_or_config_error([&] { s.trainer().restore(*ckpt); });
    const auto h = s.pretrain();
    train::write_metrics_csv(h, c.out_dir / "pretrain_metrics.csv", ckpt.has_value());
    save_with_meta(s.trainer().checkpoint(), c);
    log << "pretrained " << h.size() << " epochs; community NMI " << fixed(s.community_nmi()) << "\n";
  } else {
    const GraphCollection col = load_graphs(c);
    eval::GraphPretrain p;
    restore_or_config_error([&] { p = eval::pretrain_graphs(col, pc.pipeline(), ckpt ? &*ckpt : nullptr); });
    train::write_metrics_csv(p.history, c.out_dir / "pretrain_metrics.csv", ckpt.has_value());
    save_with_meta(p.checkpoint, c);
    log << "pretrained " << p.history.size() << " epochs on " << col.size() << " graphs\n";
  }
  return 0;
}

int cmd_train(const RunConfig& c, const std::optional<fs::path>& resume, std::ostream& log) {
  std::optional<ad::Checkpoint> ckpt;
  if (resume) {
    ckpt = read_checkpoint(*resume);
    check_task(*ckpt, c);
  }
  ensure_out_dir(c);
  const bool append = ckpt.has_value();
  eval::EvalReport report;
  if (c.task == Task::Node) {
    const Graph g = load_node(c);
    eval::NodeSession s(g, c.pipeline(), c.keep_rate);
    if (ckpt) restore_or_config_error([&] { s.trainer().restore(*ckpt); });
    const auto pre = s.pretrain();
    if (!pre.empty() || !append) train::write_metrics_csv(pre, c.out_dir / "pretrain_metrics.csv", append);
    const auto ft = s.finetune();
    train::write_metrics_csv(ft, c.out_dir / "metrics.csv", append);
    save_with_meta(s.trainer().checkpoint(), c);
    report = s.report();
    write_confusions(bank_embeddings(s.model(), s.store(), s.batch(), derive_seed(c.seed, "final")), g.labels, c,
                     report);
  } else {
    const GraphCollection col = load_graphs(c);
    eval::GraphPretrain p;
    restore_or_config_error([&] { p = eval::pretrain_graphs(col, c.pipeline(), ckpt ? &*ckpt : nullptr); });
    if (!p.history.empty() || !append) train::write_metrics_csv(p.history, c.out_dir / "pretrain_metrics.csv", append);
    save_with_meta(p.checkpoint, c);
    eval::CvResult cv = eval::cross_validate_graphs(col, c.pipeline(), cv_options(c), &p.store);
    train::write_metrics_csv(fold_average(cv.fold_histories), c.out_dir / "metrics.csv");
    for (std::size_t f = 0; f < cv.fold_histories.size(); ++f)
      train::write_metrics_csv(cv.fold_histories[f], c.out_dir / ("metrics_fold" + std::to_string(f) + ".csv"));
    report = std::move(cv.report);
  }
  report.keep_rate = c.keep_rate;
  eval::write_report(report, c.out_dir / "report.json");
  log << "accuracy " << fixed(report.accuracy_mean);
  if (report.accuracy_stderr) log << " +- " << fixed(*report.accuracy_stderr);
  log << "\n";
  return 0;
}

int cmd_eval(const RunConfig& c, const fs::path& checkpoint, std::ostream& log) {
  const ad::Checkpoint ckpt = read_checkpoint(checkpoint);
  check_task(ckpt, c);
  ensure_out_dir(c);
  eval::EvalReport report;
  if (c.task == Task::Node) {
    const Graph g = load_node(c);
    eval::NodeSession s(g, c.pipeline(), c.keep_rate);
    restore_or_config_error([&] { ckpt.restore(s.store()); });
    report = s.report();
    write_confusions(bank_embeddings(s.model(), s.store(), s.batch(), derive_seed(c.seed, "final")), g.labels, c,
                     report);
  } else {
    // Graph checkpoints hold the pretrained inference side; scoring means
    // rerunning the fold protocol from it.
    const GraphCollection col = load_graphs(c);
    ad::ParameterStore store;
    eval::make_graph_model(col, eval::seeded_model_config(c.pipeline())).init_parameters(store, c.seed);
    restore_or_config_error([&] { ckpt.restore(store); });
    report = eval::cross_validate_graphs(col, c.pipeline(), cv_options(c), &store).report;
  }
  report.keep_rate = c.keep_rate;
  eval::write_report(report, c.out_dir / "report.json");
  log << "accuracy " << fixed(report.accuracy_mean) << "\n";
  return 0;
}

int cmd_synth(const RunConfig& c, std::ostream& log) {
  const SynthConfig& s = c.synth;
  std::vector<double> gamma = s.gamma.empty() ? std::vector<double>(s.c, 1.0) : s.gamma;
  if (gamma.size() != s.c)
    throw ConfigError("synth.gamma has " + std::to_string(gamma.size()) + " entries, expected synth.c = " +
                      std::to_string(s.c));
  SyntheticOptions opts;
  opts.home_boost = s.home_boost;
  std::pair<Graph, PlantedCommunities> sample;
  try {
    sample = sample_epm_graph(s.n, s.c, s.alpha, s.beta, gamma, c.seed, opts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  ensure_out_dir(c);
  save_node_dataset(sample.first, c.out_dir);
  write_matrix_csv(sample.second.z_true, c.out_dir / "z_true.csv");
  Matrix g(1, gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) g(0, i) = sample.second.gamma_true[i];
  write_matrix_csv(g, c.out_dir / "gamma_true.csv");
  std::ofstream labels(c.out_dir / "planted_labels.csv");
  for (int y : sample.second.hard_labels) labels << y << '\n';
  log << "wrote " << s.n << " nodes, " << sample.first.adjacency.nnz() / 2 << " edges to " << c.out_dir.string()
      << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, std::ostream& out) {
  bool ok = true;
  for (const CheckLine& l : run_verify_suite(suite, seed)) {
    out << (l.passed ? "PASS " : "FAIL ") << l.suite << ": " << l.name << " (" << l.measured << ")\n";
    ok = ok && l.passed;
  }
  return ok ? 0 : 1;
}

int cmd_partition_export(const RunConfig& c, const fs::path& checkpoint, std::ostream& log) {
  const ad::Checkpoint ckpt = read_checkpoint(checkpoint);
  check_task(ckpt, c);
  ensure_out_dir(c);
  std::optional<Graph> graph;
  std::optional<GraphCollection> col;
  std::optional<model::VepmModel> m;
  model::GraphBatch batch;
  const model::ModelConfig mc = eval::seeded_model_config(c.pipeline());
  if (c.task == Task::Node) {
    graph = load_node(c);
    m.emplace(mc, graph->features.cols(), graph->num_classes(), false);
    batch = model::make_node_batch(*graph, c.row_normalize);
  } else {
    col = load_graphs(c);
    m.emplace(eval::make_graph_model(*col, mc));
    std::vector<std::size_t> all(col->size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    batch = model::make_graph_batch(*col, all);
  }
  if (mc.input_mode == model::InputMode::Random) model::attach_noise_features(batch, c.seed);
  ad::ParameterStore store;
  m->init_parameters(store, c.seed);
  restore_or_config_error([&] { ckpt.restore(store); });

  ad::Tape tape;
  model::ForwardResult fr = m->forward(tape, store, batch, m->draw_uniforms(batch, derive_seed(c.seed, "final")));
  const Matrix& part = fr.partition.value();
  for (std::size_t k = 0; k < part.cols(); ++k) {
    std::ofstream f(c.out_dir / ("part_" + std::to_string(k) + ".csv"));
    for (std::size_t e = 0; e < part.rows(); ++e)
      f << batch.pairs.src[e] << ',' << batch.pairs.dst[e] << ',' << real(part(e, k)) << '\n';
  }
  const Matrix& z = fr.posterior.z.value();
  write_matrix_csv(z, c.out_dir / "z.csv");
  for (std::size_t k = 0; k < fr.bank.size(); ++k)
    write_matrix_csv(fr.bank[k].value(), c.out_dir / ("H_" + std::to_string(k) + ".csv"));
  const Matrix mu = eval::community_interactions(z, fr.gamma.value().data(), mc.k_meta);
  const auto assign = eval::argmax_rows(mu);
  std::ofstream order(c.out_dir / "node_order.csv");
  order << "node,metacommunity,interaction\n";
  for (std::size_t u : eval::node_ordering(mu))
    order << u << ',' << assign[u] << ',' << real(mu(u, static_cast<std::size_t>(assign[u]))) << '\n';
  log << "exported " << part.cols() << " parts over " << part.rows() << " edges\n";
  return 0;
}

std::string ablation_key(const std::string& axis) {
  if (axis == "partition_mode") return "model.partition_mode";
  if (axis == "composer_kind") return "model.composer_kind";
  if (axis == "tau") return "model.tau";
  if (axis == "input_mode") return "model.input_mode";
  if (axis == "k_meta") return "model.k_meta";
  if (axis == "training_scheme") return "train.scheme";
  throw ConfigError("unknown ablation axis '" + axis +
                    "' (expected partition_mode, composer_kind, tau, input_mode, k_meta, training_scheme)");
}

int cmd_ablate(const RunConfig& c, const std::string& axis, const std::vector<std::string>& values,
               std::ostream& log) {
  const std::string key = ablation_key(axis);
  if (values.empty()) throw ConfigError("ablate needs at least one value");
  std::vector<RunConfig> configs;
  for (const auto& v : values) {
    RunConfig rc = c;
    set_option(rc, key, v);
    try {
      rc.model.validate();
      rc.train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(axis + "=" + v + ": " + e.what());
    }
    configs.push_back(std::move(rc));
  }
  ensure_out_dir(c);

  // Node runs fan out across values; graph runs parallelize inside the folds.
  std::vector<eval::EvalReport> reports(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < configs.size();) {
      try {
        reports[i] = run_once(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = c.task == Task::Node ? std::max<std::size_t>(1, std::min(c.jobs, configs.size())) : 1;
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ofstream table(c.out_dir / "ablation.csv");
  table << "axis,value,accuracy_mean,accuracy_stderr,nmi_finetune\n";
  std::string json = "[\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& r = reports[i];
    table << axis << ',' << values[i] << ',' << fixed(r.accuracy_mean) << ','
          << (r.accuracy_stderr ? fixed(*r.accuracy_stderr) : "") << ','
          << (r.nmi_finetune ? fixed(*r.nmi_finetune) : "") << '\n';
    json += eval::to_json(r);
    json += i + 1 < values.size() ? ",\n" : "\n";
    log << axis << '=' << values[i] << ": accuracy " << fixed(r.accuracy_mean) << '\n';
  }
  json += "]\n";
  std::ofstream(c.out_dir / "ablation.json") << json;
  return 0;
}

}  // namespace vepm::cli
