#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vepm/cli/run_config.hpp"

namespace vepm::cli {

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> protocol;
  std::optional<double> keep_rate;
  std::optional<std::size_t> mc_samples;
  std::vector<std::string> set;  // extra key=value pairs
};

/// Loads the config file (if any), applies overrides and validates.
RunConfig resolve_config(const Overrides& overrides);

/// Reads VEPM_PRECISION. f64 (or unset) is silent; f32 prints a warning and
/// computes in f64; anything else is a ConfigError.
void check_precision_env(std::ostream& log);

// Every command writes into config.out_dir and returns the process exit
// status. Errors propagate as exceptions (ConfigError, DivergenceError, ...).

/// Unsupervised pretraining: pretrain_metrics.csv, checkpoint.bin.
int cmd_pretrain(const RunConfig& config, const std::optional<std::filesystem::path>& resume, std::ostream& log);
/// Pretraining (unless already done in `resume`) then finetuning:
/// pretrain_metrics.csv, metrics.csv, checkpoint.bin, report.json.
int cmd_train(const RunConfig& config, const std::optional<std::filesystem::path>& resume, std::ostream& log);
/// Scores a trained checkpoint: report.json and confusion_k.csv files.
int cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
/// Planted-community dataset in the loader layout plus z_true.csv,
/// gamma_true.csv and planted_labels.csv.
int cmd_synth(const RunConfig& config, std::ostream& log);
/// Prints one PASS/FAIL line per check; 0 iff all pass.
int cmd_verify(const std::string& suite, std::uint64_t seed, std::ostream& out);
/// part_k.csv (i,j,weight per undirected edge), node_order.csv, z.csv, H_k.csv.
int cmd_partition_export(const RunConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
/// Runs the pipeline once per value of `axis`: ablation.csv, ablation.json.
int cmd_ablate(const RunConfig& config, const std::string& axis, const std::vector<std::string>& values,
               std::ostream& log);

/// Config key varied by an ablation axis; ConfigError for unknown axes.
std::string ablation_key(const std::string& axis);

}  // namespace vepm::cli
