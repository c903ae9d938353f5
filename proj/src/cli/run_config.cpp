#include "vepm/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace vepm::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(to_double(key, trim(item)));
  return out;
}

template <typename F>
auto wrap(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

struct Option {
  const char* key;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define VEPM_UINT(KEY, FIELD)                                                                          \
  Option {                                                                                             \
    KEY, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_uint(k, v); },    \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                                     \
  }
#define VEPM_REAL(KEY, FIELD)                                                                          \
  Option {                                                                                             \
    KEY, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_double(k, v); },  \
        [](const RunConfig& c) { return fmt(c.FIELD); }                                                \
  }
#define VEPM_BOOL(KEY, FIELD)                                                                          \
  Option {                                                                                             \
    KEY, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_bool(k, v); },    \
        [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }                     \
  }
#define VEPM_ENUM(KEY, FIELD, PARSE)                                                                   \
  Option {                                                                                             \
    KEY, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = wrap(k, [&] { return PARSE(v); }); }, \
        [](const RunConfig& c) { return std::string(to_string(c.FIELD)); }                             \
  }

std::string_view to_string(Task t) { return t == Task::Node ? "node" : "graph"; }
Task parse_task(std::string_view s) {
  if (s == "node") return Task::Node;
  if (s == "graph") return Task::Graph;
  throw std::invalid_argument("unknown task '" + std::string(s) + "' (expected node or graph)");
}
using eval::to_string;
using model::to_string;
using train::to_string;

const std::vector<Option>& options() {
  static const std::vector<Option> table = {
      {"dataset.path", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset_path = v; },
       [](const RunConfig& c) { return c.dataset_path.string(); }},
      {"dataset.name", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset_name = v; },
       [](const RunConfig& c) { return c.dataset_name; }},
      VEPM_ENUM("dataset.task", task, parse_task),
      VEPM_BOOL("dataset.row_normalize", row_normalize),
      VEPM_UINT("model.k_meta", model.k_meta),
      VEPM_UINT("model.block_width", model.block_width),
      VEPM_REAL("model.tau", model.tau),
      VEPM_UINT("model.encoder_layers", model.encoder_layers),
      VEPM_UINT("model.bank_layers", model.bank_layers),
      VEPM_UINT("model.composer_layers", model.composer_layers),
      VEPM_UINT("model.hidden_dim", model.hidden_dim),
      VEPM_UINT("model.encoder_hidden", model.encoder_hidden),
      VEPM_ENUM("model.layer_kind", model.layer_kind, model::parse_layer_kind),
      VEPM_ENUM("model.composer_kind", model.composer_kind, model::parse_composer_kind),
      VEPM_ENUM("model.partition_mode", model.partition_mode, model::parse_partition_mode),
      VEPM_ENUM("model.input_mode", model.input_mode, model::parse_input_mode),
      VEPM_UINT("model.mc_samples", model.mc_samples),
      VEPM_REAL("model.dropout", model.dropout),
      VEPM_REAL("model.prior_alpha", model.prior.alpha),
      VEPM_REAL("model.prior_beta", model.prior.beta),
      VEPM_UINT("train.pretrain_epochs", train.pretrain_epochs),
      VEPM_UINT("train.finetune_epochs", train.finetune_epochs),
      VEPM_UINT("train.inner_steps", train.inner_steps),
      VEPM_REAL("train.lr_unsup", train.lr_unsup),
      VEPM_REAL("train.lr_theta", train.lr_theta),
      VEPM_REAL("train.lr_phi", train.lr_phi),
      VEPM_REAL("train.weight_decay", train.weight_decay),
      VEPM_UINT("train.patience", train.patience),
      VEPM_REAL("train.pretrain_tol", train.pretrain_tol),
      VEPM_BOOL("train.early_stopping", train.early_stopping),
      {"train.scheme",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "pretrain_finetune")
           c.train.pretrain = true;
         else if (v == "scratch")
           c.train.pretrain = false;
         else
           throw ConfigError("'" + k + "' expects pretrain_finetune or scratch, got '" + v + "'");
       },
       [](const RunConfig& c) { return std::string(c.train.pretrain ? "pretrain_finetune" : "scratch"); }},
      VEPM_BOOL("train.record_wall_time", train.record_wall_time),
      VEPM_REAL("train.weight_task", train.weights.task),
      VEPM_REAL("train.weight_egen", train.weights.egen),
      VEPM_REAL("train.weight_kl", train.weights.kl),
      VEPM_BOOL("sampler.enabled", sampler.enabled),
      VEPM_UINT("sampler.n_sub", sampler.n_sub),
      VEPM_REAL("sampler.k_mix", sampler.k_mix),
      VEPM_REAL("sampler.alpha_sharp", sampler.alpha_sharp),
      VEPM_ENUM("sampler.importance", sampler.importance, train::parse_importance),
      VEPM_UINT("eval.folds", folds),
      VEPM_ENUM("eval.protocol", protocol, eval::parse_protocol),
      VEPM_REAL("eval.keep_rate", keep_rate),
      {"run.out", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir.string(); }},
      VEPM_UINT("run.seed", seed),
      VEPM_UINT("run.jobs", jobs),
      VEPM_UINT("synth.n", synth.n),
      VEPM_UINT("synth.c", synth.c),
      VEPM_REAL("synth.alpha", synth.alpha),
      VEPM_REAL("synth.beta", synth.beta),
      {"synth.gamma", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.gamma = to_list(k, v); },
       [](const RunConfig& c) {
         std::string s;
         for (double g : c.synth.gamma) s += (s.empty() ? "" : ",") + fmt(g);
         return s;
       }},
      VEPM_REAL("synth.home_boost", synth.home_boost),
  };
  return table;
}

#undef VEPM_UINT
#undef VEPM_REAL
#undef VEPM_BOOL
#undef VEPM_ENUM

void apply_task_defaults(RunConfig& c) {
  if (c.task == Task::Node) {
    c.model.layer_kind = model::LayerKind::Gcn;
    c.model.encoder_layers = 2;
    c.model.bank_layers = 1;
    c.model.composer_layers = 1;
    c.model.hidden_dim = 64;
    c.model.dropout = 0.5;
  } else {
    c.model.layer_kind = model::LayerKind::Gin;
    c.model.encoder_layers = 2;
    c.model.bank_layers = 2;
    c.model.composer_layers = 2;
    c.model.hidden_dim = 32;
    c.model.dropout = 0.0;
    c.train.early_stopping = false;
  }
}

}  // namespace

eval::PipelineConfig RunConfig::pipeline() const {
  eval::PipelineConfig p;
  p.model = model;
  p.train = train;
  p.sampler = sampler;
  p.row_normalize = row_normalize;
  p.seed = seed;
  p.dataset = dataset_name.empty() ? dataset_path.filename().string() : dataset_name;
  p.snapshot = snapshot();
  return p;
}

std::vector<std::pair<std::string, std::string>> RunConfig::snapshot() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& o : options()) out.emplace_back(o.key, o.get(*this));
  return out;
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }
  return out;
}

void set_option(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& o : options())
    if (key == o.key) {
      o.set(config, key, value);
      return;
    }
  throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig run_config_from_values(const std::map<std::string, std::string>& values,
                                 const std::filesystem::path& base_dir) {
  RunConfig c;
  if (auto it = values.find("dataset.task"); it != values.end()) set_option(c, it->first, it->second);
  apply_task_defaults(c);
  for (const auto& [k, v] : values) set_option(c, k, v);
  if (!c.dataset_path.empty() && c.dataset_path.is_relative() && !base_dir.empty())
    c.dataset_path = base_dir / c.dataset_path;
  try {
    c.model.validate();
    c.train.validate();
    c.sampler.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.folds < 2) throw ConfigError("eval.folds must be >= 2");
  if (!(c.keep_rate > 0.0 && c.keep_rate <= 1.0)) throw ConfigError("eval.keep_rate must be in (0, 1]");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  return run_config_from_values(parse_key_values(in), file.parent_path());
}

void require_dataset(const RunConfig& config) {
  if (config.dataset_path.empty()) throw ConfigError("dataset.path is not set");
  if (!std::filesystem::is_directory(config.dataset_path))
    throw ConfigError("dataset path does not exist: " + config.dataset_path.string());
}

}  // namespace vepm::cli
