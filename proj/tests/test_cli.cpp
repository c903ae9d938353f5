#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "vepm/cli/commands.hpp"
#include "vepm/cli/run_config.hpp"
#include "vepm/cli/verify.hpp"
#include "vepm/graph/dataset_io.hpp"

namespace fs = std::filesystem;
using namespace vepm;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(VEPM_BINARY) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), p)) r.output += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vepm_cli_" + name);
  fs::remove_all(p);
  return p;
}

// Small synthetic dataset shared by the command tests.
const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = fresh("data");
    const Result r = run("synth --n 60 --c 3 --seed 5 --out " + d.string());
    if (r.code != 0) throw std::runtime_error(r.output);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const std::map<std::string, std::string>& extra = {}) {
  std::map<std::string, std::string> kv{{"dataset.path", dataset().string()},
                                        {"dataset.task", "node"},
                                        {"model.k_meta", "2"},
                                        {"model.block_width", "1"},
                                        {"model.hidden_dim", "8"},
                                        {"model.encoder_hidden", "8"},
                                        {"train.pretrain_epochs", "4"},
                                        {"train.finetune_epochs", "3"},
                                        {"train.inner_steps", "2"}};
  for (const auto& [k, v] : extra) kv[k] = v;
  const fs::path f = fs::temp_directory_path() / ("vepm_cli_" + name + ".conf");
  std::ofstream out(f);
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return f;
}

}  // namespace

TEST(Config, ParsesKeyValues) {
  std::istringstream in("# comment\n a = 1 \n\nb=two # trailing\n");
  const auto kv = cli::parse_key_values(in);
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two");
}

TEST(Config, Errors) {
  std::istringstream dup("a = 1\na = 2\n");
  EXPECT_THROW(cli::parse_key_values(dup), cli::ConfigError);
  std::istringstream bad("no equals sign\n");
  EXPECT_THROW(cli::parse_key_values(bad), cli::ConfigError);
  EXPECT_THROW(cli::run_config_from_values({{"model.nonexistent", "1"}}), cli::ConfigError);
  EXPECT_THROW(cli::run_config_from_values({{"model.tau", "-1"}}), cli::ConfigError);
  EXPECT_THROW(cli::run_config_from_values({{"model.k_meta", "many"}}), cli::ConfigError);
  EXPECT_THROW(cli::ablation_key("colour"), cli::ConfigError);
  EXPECT_EQ(cli::ablation_key("training_scheme"), "train.scheme");
}

TEST(Config, SnapshotRoundTrips) {
  const cli::RunConfig c = cli::run_config_from_values({{"model.tau", "10"}, {"train.inner_steps", "7"}});
  const auto snap = c.snapshot();
  const cli::RunConfig d = cli::run_config_from_values(std::map<std::string, std::string>(snap.begin(), snap.end()));
  EXPECT_EQ(d.snapshot(), snap);
  EXPECT_EQ(d.model.tau, 10.0);
  EXPECT_EQ(d.train.inner_steps, 7u);
}

TEST(Cli, MissingDatasetExitsTwoNamingThePath) {
  const Result r = run("train --set dataset.path=/no/such/vepm/dir --out " + fresh("missing").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("/no/such/vepm/dir"), std::string::npos) << r.output;
}

TEST(Cli, UnknownSubcommandOrSuite) {
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("verify bogus").code, 2);
}

TEST(Cli, BadPrecisionIsAConfigError) {
  const std::string cmd = "VEPM_PRECISION=f16 " + std::string(VEPM_BINARY) + " verify kl > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(Synth, LoadableAndDeterministic) {
  const fs::path a = fresh("synth_a"), b = fresh("synth_b");
  ASSERT_EQ(run("synth --seed 9 --out " + a.string()).code, 0);
  ASSERT_EQ(run("synth --seed 9 --out " + b.string()).code, 0);
  const Graph g = load_node_dataset(a);
  EXPECT_EQ(g.num_nodes(), 200u);
  for (const char* f : {"edges.csv", "features.csv", "labels.csv", "z_true.csv", "gamma_true.csv", "planted_labels.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Synth, GammaLengthMismatchExitsTwo) {
  EXPECT_EQ(run("synth --c 3 --gamma 1,2 --out " + fresh("synth_bad").string()).code, 2);
}

TEST(Verify, KlSuitePasses) {
  const Result r = run("verify kl");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
}

TEST(Verify, SuitesReportTheirChecks) {
  const auto lines = cli::run_verify_suite("partition", 0);
  ASSERT_FALSE(lines.empty());
  for (const auto& l : lines) EXPECT_TRUE(l.passed) << l.name << " " << l.measured;
  EXPECT_THROW(cli::run_verify_suite("nope", 0), cli::ConfigError);
}

TEST(Commands, PretrainThenTrainWritesArtifacts) {
  const fs::path out = fresh("artifacts");
  const fs::path conf = write_config("artifacts");
  ASSERT_EQ(run("pretrain --config " + conf.string() + " --out " + out.string()).code, 0);
  EXPECT_TRUE(fs::exists(out / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(out / "pretrain_metrics.csv"));
  const Result r = run("train --config " + conf.string() + " --out " + out.string() + " --resume " +
                       (out / "checkpoint.bin").string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"metrics.csv", "checkpoint.bin", "report.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const Result e = run("eval --config " + conf.string() + " --out " + out.string() + " --checkpoint " +
                       (out / "checkpoint.bin").string());
  EXPECT_EQ(e.code, 0) << e.output;
}

TEST(Commands, ResumeRestoresTheStepCounter) {
  // Four pretraining epochs in one go must equal two, a checkpoint, then two more.
  const fs::path straight = fresh("straight"), split = fresh("split");
  const fs::path conf = write_config("resume");
  ASSERT_EQ(run("train --config " + conf.string() + " --out " + straight.string()).code, 0);
  ASSERT_EQ(run("pretrain --config " + conf.string() + " --set train.pretrain_epochs=2 --out " + split.string()).code, 0);
  ASSERT_EQ(run("train --config " + conf.string() + " --out " + split.string() + " --resume " +
                (split / "checkpoint.bin").string())
                .code,
            0);
  EXPECT_EQ(slurp(split / "pretrain_metrics.csv"), slurp(straight / "pretrain_metrics.csv"));
  EXPECT_EQ(slurp(split / "metrics.csv"), slurp(straight / "metrics.csv"));
  const auto a = ad::load_checkpoint(straight / "checkpoint.bin"), b = ad::load_checkpoint(split / "checkpoint.bin");
  EXPECT_EQ(a.meta, b.meta);
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_EQ(a.tensors[i].value.data(), b.tensors[i].value.data());
}

TEST(Commands, ResumeWithWrongTaskIsRejected) {
  const fs::path out = fresh("wrong_task");
  const fs::path conf = write_config("wrong_task");
  ASSERT_EQ(run("pretrain --config " + conf.string() + " --out " + out.string()).code, 0);
  const Result r = run("pretrain --config " + conf.string() + " --set dataset.task=graph --out " + out.string() +
                       " --resume " + (out / "checkpoint.bin").string());
  EXPECT_EQ(r.code, 2) << r.output;
}

TEST(Commands, MetricsAreByteIdenticalAcrossReruns) {
  const fs::path a = fresh("det_a"), b = fresh("det_b");
  const fs::path conf = write_config("det", {{"sampler.enabled", "true"}, {"sampler.n_sub", "30"}, {"model.mc_samples", "3"}});
  ASSERT_EQ(run("train --config " + conf.string() + " --seed 3 --out " + a.string()).code, 0);
  ASSERT_EQ(run("train --config " + conf.string() + " --seed 3 --out " + b.string()).code, 0);
  for (const char* f : {"metrics.csv", "pretrain_metrics.csv", "confusion_0.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Commands, SingleMetacommunityExportIsTheEdgeList) {
  const fs::path out = fresh("export1");
  const fs::path conf = write_config("export1");
  ASSERT_EQ(run("train --config " + conf.string() + " --set model.k_meta=1 --out " + out.string()).code, 0);
  ASSERT_EQ(run("partition-export --config " + conf.string() + " --set model.k_meta=1 --out " + out.string() +
                " --checkpoint " + (out / "checkpoint.bin").string())
                .code,
            0);
  EXPECT_FALSE(fs::exists(out / "part_1.csv"));
  const Graph g = load_node_dataset(dataset());
  std::ifstream in(out / "part_0.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::size_t i = 0, j = 0;
    double w = 0.0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%zu,%zu,%lf", &i, &j, &w), 3);
    EXPECT_TRUE(g.adjacency.contains(i, j));
    EXPECT_EQ(w, 1.0);
    ++rows;
  }
  EXPECT_EQ(rows, g.adjacency.nnz() / 2);
  for (const char* f : {"z.csv", "H_0.csv", "node_order.csv"}) EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Commands, ExportIsDeterministicAndPartsSumToOne) {
  const fs::path out = fresh("export3"), again = fresh("export3b");
  const fs::path conf = write_config("export3", {{"model.k_meta", "3"}});
  ASSERT_EQ(run("train --config " + conf.string() + " --out " + out.string()).code, 0);
  const std::string ck = (out / "checkpoint.bin").string();
  ASSERT_EQ(run("partition-export --config " + conf.string() + " --out " + out.string() + " --checkpoint " + ck).code, 0);
  ASSERT_EQ(run("partition-export --config " + conf.string() + " --out " + again.string() + " --checkpoint " + ck).code, 0);
  std::vector<double> sums;
  for (int k = 0; k < 3; ++k) {
    const auto f = "part_" + std::to_string(k) + ".csv";
    EXPECT_EQ(slurp(out / f), slurp(again / f));
    std::ifstream in(out / f);
    std::string line;
    for (std::size_t e = 0; std::getline(in, line); ++e) {
      std::size_t i, j;
      double w;
      std::sscanf(line.c_str(), "%zu,%zu,%lf", &i, &j, &w);
      if (sums.size() <= e) sums.push_back(0.0);
      sums[e] += w;
    }
  }
  for (double s : sums) EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(Commands, AblationHasOneRowPerValue) {
  const fs::path out = fresh("ablate");
  const fs::path conf = write_config("ablate", {{"train.pretrain_epochs", "2"}, {"train.finetune_epochs", "2"}});
  const Result r = run("ablate --config " + conf.string() + " --axis training_scheme --values scratch,pretrain_finetune --jobs 2 --out " +
                       out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(out / "ablation.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "axis,value,accuracy_mean,accuracy_stderr,nmi_finetune");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2u);
  EXPECT_TRUE(fs::exists(out / "ablation.json"));
  EXPECT_EQ(run("ablate --config " + conf.string() + " --axis colour --values a --out " + out.string()).code, 2);
}
