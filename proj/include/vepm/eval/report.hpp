#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vepm/core/matrix.hpp"

namespace vepm::eval {

struct EvalReport {
  std::string protocol;  // standard, xu, zhang
  std::string dataset;
  std::uint64_t seed = 0;
  double keep_rate = 1.0;
  double accuracy_mean = 0.0;
  std::optional<double> accuracy_stderr;
  std::vector<double> per_fold;
  std::optional<std::size_t> selected_epoch;
  std::vector<std::size_t> per_fold_epochs;
  std::optional<double> nmi_pretrain;
  std::optional<double> nmi_finetune;
  std::vector<Matrix> confusion;
  std::string confusion_classifier;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> warnings;
};

/// JSON with a fixed key order; optional fields are omitted when absent.
std::string to_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& file);

}  // namespace vepm::eval
