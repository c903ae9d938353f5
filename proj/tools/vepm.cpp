// vepm command-line front end.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vepm/cli/commands.hpp"
#include "vepm/graph/dataset_io.hpp"
#include "vepm/train/trainer.hpp"

namespace {

void error_line(const std::string& kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit"] = code;
  std::cerr << j.dump() << std::endl;
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace vepm::cli;
  CLI::App app{"Variational edge partition models for graph learning"};
  app.require_subcommand(1);

  Overrides ov;
  std::optional<std::string> resume, checkpoint;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config, "Key-value config file");
    sub->add_option("--seed", ov.seed, "Root seed");
    sub->add_option("--jobs", ov.jobs, "Worker threads for CV folds and ablations")->check(CLI::PositiveNumber);
    sub->add_option("--out", ov.out, "Output directory");
    sub->add_option("--protocol", ov.protocol, "Graph CV protocol (xu or zhang)");
    sub->add_option("--keep-rate", ov.keep_rate, "Fraction of training labels kept");
    sub->add_option("--mc-samples", ov.mc_samples, "Posterior draws at prediction time");
    sub->add_option("--set", ov.set, "Extra key=value config entries");
  };

  auto* pretrain = app.add_subcommand("pretrain", "Unsupervised pretraining of the inference side");
  add_common(pretrain);
  pretrain->add_option("--resume", resume, "Checkpoint to continue from");
  auto* train = app.add_subcommand("train", "Pretrain (if needed) and finetune");
  add_common(train);
  train->add_option("--resume", resume, "Checkpoint to continue from");
  auto* eval = app.add_subcommand("eval", "Score a trained checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint,--resume", checkpoint, "Checkpoint to evaluate")->required();

  auto* synth = app.add_subcommand("synth", "Write a planted-community dataset");
  add_common(synth);
  std::optional<std::size_t> n, c;
  std::optional<double> alpha, beta, home_boost;
  std::optional<std::string> gamma;
  synth->add_option("--n", n, "Nodes");
  synth->add_option("--c", c, "Communities");
  synth->add_option("--alpha", alpha, "Gamma prior shape");
  synth->add_option("--beta", beta, "Gamma prior rate");
  synth->add_option("--gamma", gamma, "Comma-separated community activations");
  synth->add_option("--home-boost", home_boost, "Affiliation multiplier for each node's home community");

  auto* verify = app.add_subcommand("verify", "Run built-in oracle checks");
  std::string suite = "all";
  std::uint64_t verify_seed = 0;
  verify->add_option("suite", suite, "gradcheck, kl, sampler, partition or all");
  verify->add_option("--seed", verify_seed, "Seed for random inputs");

  auto* exporter = app.add_subcommand("partition-export", "Export edge parts, node ordering and embeddings");
  add_common(exporter);
  exporter->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();

  auto* ablate = app.add_subcommand("ablate", "Run the pipeline across values of one axis");
  add_common(ablate);
  std::string axis;
  std::vector<std::string> values;
  ablate->add_option("--axis", axis, "partition_mode, composer_kind, tau, input_mode, k_meta or training_scheme")
      ->required();
  ablate->add_option("--values", values, "Values to compare")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    error_line("usage", e.what(), 2);
    return 2;
  }

  try {
    check_precision_env(std::cerr);
    if (verify->parsed()) return cmd_verify(suite, verify_seed, std::cout);
    if (synth->parsed()) {
      if (n) ov.set.push_back("synth.n=" + std::to_string(*n));
      if (c) ov.set.push_back("synth.c=" + std::to_string(*c));
      if (alpha) ov.set.push_back("synth.alpha=" + real(*alpha));
      if (beta) ov.set.push_back("synth.beta=" + real(*beta));
      if (home_boost) ov.set.push_back("synth.home_boost=" + real(*home_boost));
      if (gamma) ov.set.push_back("synth.gamma=" + *gamma);
    }
    const RunConfig config = resolve_config(ov);
    if (pretrain->parsed()) return cmd_pretrain(config, resume, std::cout);
    if (train->parsed()) return cmd_train(config, resume, std::cout);
    if (eval->parsed()) return cmd_eval(config, *checkpoint, std::cout);
    if (synth->parsed()) return cmd_synth(config, std::cout);
    if (exporter->parsed()) return cmd_partition_export(config, *checkpoint, std::cout);
    if (ablate->parsed()) return cmd_ablate(config, axis, values, std::cout);
  } catch (const ConfigError& e) {
    error_line("config", e.what(), 2);
    return 2;
  } catch (const vepm::DatasetError& e) {
    error_line("dataset", e.what(), 2);
    return 2;
  } catch (const vepm::train::DivergenceError& e) {
    error_line("divergence", e.what(), 3);
    return 3;
  } catch (const std::exception& e) {
    error_line("runtime", e.what(), 1);
    return 1;
  }
  return 0;
}
