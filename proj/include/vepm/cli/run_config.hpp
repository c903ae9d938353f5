#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vepm/eval/protocols.hpp"
#include "vepm/model/vepm_model.hpp"
#include "vepm/train/sampler.hpp"
#include "vepm/train/trainer.hpp"

namespace vepm::cli {

/// Invalid configuration or command-line input (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { Node, Graph };

struct SynthConfig {
  std::size_t n = 200;
  std::size_t c = 4;
  double alpha = 1.0;
  double beta = 1.0;
  std::vector<double> gamma;  // empty: 1.0 per community
  double home_boost = 1.0;
};

struct RunConfig {
  std::filesystem::path dataset_path;
  std::string dataset_name;
  Task task = Task::Node;
  bool row_normalize = false;
  model::ModelConfig model;
  train::TrainConfig train;
  train::SamplerConfig sampler;
  std::size_t folds = 10;
  eval::Protocol protocol = eval::Protocol::Xu;
  double keep_rate = 1.0;
  std::filesystem::path out_dir = "vepm-out";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  SynthConfig synth;

  eval::PipelineConfig pipeline() const;
  /// Every recognised key with its resolved value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> snapshot() const;
};

/// `key = value` lines; `#` starts a comment; blank lines ignored. Throws
/// ConfigError on malformed lines and duplicate keys.
std::map<std::string, std::string> parse_key_values(std::istream& in);

/// Applies one dotted key. Throws ConfigError for unknown keys or bad values.
void set_option(RunConfig& config, const std::string& key, const std::string& value);

/// Task-dependent defaults (`dataset.task` is read first), then every key.
/// Relative dataset paths resolve against `base_dir`.
RunConfig run_config_from_values(const std::map<std::string, std::string>& values,
                                 const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);

/// Throws ConfigError naming the path if the dataset directory is missing.
void require_dataset(const RunConfig& config);

}  // namespace vepm::cli
