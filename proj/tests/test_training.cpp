#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>

#include "vepm/ad/gradcheck.hpp"
#include "vepm/ad/ops.hpp"
#include "vepm/graph/synthetic.hpp"
#include "vepm/model/graph_batch.hpp"
#include "vepm/model/vepm_model.hpp"
#include "vepm/train/adam.hpp"
#include "vepm/train/elbo.hpp"
#include "vepm/train/sampler.hpp"
#include "vepm/train/trainer.hpp"

using namespace vepm;
using namespace vepm::train;

namespace {

struct Fixture {
  Graph graph;
  model::GraphBatch batch;
  std::unique_ptr<model::VepmModel> model;
  ad::ParameterStore store;
  TaskTargets targets;

  explicit Fixture(std::uint64_t seed, std::size_t n = 30) {
    graph = sample_epm_graph(n, 3, 1.0, 1.0, {0.3, 0.3, 0.3}, seed).first;
    batch = model::make_node_batch(graph);
    model::ModelConfig c;
    c.k_meta = 2;
    c.block_width = 2;
    c.hidden_dim = 8;
    c.encoder_hidden = 8;
    c.bank_layers = 1;
    c.composer_layers = 1;
    c.dropout = 0.0;
    model = std::make_unique<model::VepmModel>(c, graph.features.cols(), graph.num_classes(), false);
    model->init_parameters(store, seed);
    targets = make_targets(graph.labels, mask_indices(graph.masks->train), graph.num_classes());
  }
};

TrainConfig short_config() {
  TrainConfig c;
  c.pretrain_epochs = 5;
  c.finetune_epochs = 4;
  c.inner_steps = 3;
  c.early_stopping = false;
  return c;
}

Evaluator no_eval() {
  return [](const ad::ParameterStore&, std::size_t) {
    return std::array<double, 3>{std::nan(""), std::nan(""), std::nan("")};
  };
}

std::vector<Matrix> values_of(const ad::ParameterStore& s) {
  std::vector<Matrix> out;
  for (const auto& e : s.entries()) out.push_back(e.value);
  return out;
}

}  // namespace

TEST(AdamTest, ZeroGradientLeavesParameters) {
  ad::ParameterStore store;
  store.add("w", ad::ParamGroup::Generative, Matrix{{1.0, -2.0, 3.0}});
  Adam adam("t");
  for (int i = 0; i < 3; ++i) adam.step(store, {"w"}, 0.1);
  EXPECT_EQ(store.value("w"), (Matrix{{1.0, -2.0, 3.0}}));
  EXPECT_EQ(adam.steps(), 3u);
}

TEST(AdamTest, FirstStepHasMagnitudeLr) {
  for (double g : {1e-3, 1.0, 250.0}) {
    ad::ParameterStore store;
    store.add("w", ad::ParamGroup::Generative, Matrix{{0.5, 0.5}});
    store.grad("w") = Matrix{{g, -g}};
    Adam adam("t");
    adam.step(store, {"w"}, 0.01);
    // m_hat = g, v_hat = g^2 at t = 1.
    EXPECT_NEAR(store.value("w")(0, 0), 0.5 - 0.01 * g / (g + 1e-8), 1e-15);
    EXPECT_NEAR(store.value("w")(0, 1), 0.5 + 0.01 * g / (g + 1e-8), 1e-15);
    EXPECT_NEAR(std::abs(store.value("w")(0, 0) - 0.5), 0.01, 1e-7);
  }
}

TEST(AdamTest, StateRoundTripsThroughCheckpoint) {
  ad::ParameterStore a, b;
  a.add("w", ad::ParamGroup::Generative, Matrix{{1.0}});
  b.add("w", ad::ParamGroup::Generative, Matrix{{1.0}});
  Adam x("t"), y("t");
  a.grad("w")(0, 0) = 0.3;
  b.grad("w")(0, 0) = 0.3;
  x.step(a, {"w"}, 0.1);
  y.step(b, {"w"}, 0.1);
  ad::Checkpoint ck;
  x.save(ck);
  Adam z("t");
  z.load(ck);
  a.grad("w")(0, 0) = -0.7;
  b.grad("w")(0, 0) = -0.7;
  z.step(a, {"w"}, 0.1);
  y.step(b, {"w"}, 0.1);
  EXPECT_EQ(a.value("w"), b.value("w"));
  EXPECT_EQ(z.steps(), 2u);
}

TEST(Targets, Errors) {
  EXPECT_THROW(make_targets({0, 1}, {}, 2), std::invalid_argument);
  EXPECT_THROW(make_targets({0, 3}, {0, 1}, 2), std::invalid_argument);
}

TEST(Elbo, KlVanishesAtThePrior) {
  ad::Tape tape;
  model::Posterior p{tape.constant(Matrix(4, 3, 1.0)), tape.constant(Matrix(4, 3, 1.0)), tape.constant(Matrix(4, 3, 1.0))};
  EXPECT_NEAR(kl_term(p, prob::GammaPrior{1.0, 1.0}).value().item(), 0.0, 1e-12);
}

TEST(Elbo, PerfectPredictionsHaveZeroTaskTerm) {
  ad::Tape tape;
  Matrix logits{{800, 0, 0}, {0, 800, 0}, {0, 0, 800}};
  const TaskTargets t = make_targets({0, 1, 2}, {0, 1, 2}, 3);
  EXPECT_NEAR(task_loglik(tape.constant(logits), t).value().item(), 0.0, 1e-12);
}

TEST(Elbo, TermsHaveTheRightSigns) {
  Fixture s(1);
  ad::Tape tape;
  const ElboGraph g = elbo(tape, s.store, *s.model, s.batch, &s.targets, s.model->draw_uniforms(s.batch, 1), {}, {});
  const ElboTerms v = g.values();
  EXPECT_LE(v.l_kl, 0.0);
  EXPECT_LE(v.l_task, 0.0);
  EXPECT_LE(v.l_egen, 0.0);
  EXPECT_NEAR(g.objective.value().item(), v.total(), 1e-9 * std::abs(v.total()));
}

TEST(Elbo, SingleTermGradients) {
  Fixture s(2);
  const Matrix u = s.model->draw_uniforms(s.batch, 5);
  for (int term = 0; term < 3; ++term) {
    ElboWeights w{term == 0 ? 1.0 : 0.0, term == 1 ? 1.0 : 0.0, term == 2 ? 1.0 : 0.0};
    auto build = [&](ad::Tape& tape, const ad::ParameterStore& store) {
      return elbo(tape, store, *s.model, s.batch, &s.targets, u, w, {}).objective;
    };
    const auto r = ad::finite_difference_check(build, s.store, {1e-5, 120, static_cast<std::uint64_t>(term), {}});
    EXPECT_LT(r.max_rel_error, 1e-4) << "term " << term << " worst " << r.worst_param;
  }
}

TEST(SamplerTest, HandExample) {
  const auto p = sampling_probabilities({2, 1, 1}, 0.9, 1.0);
  EXPECT_NEAR(p[0], 0.475, 1e-15);
  EXPECT_NEAR(p[1], 0.2625, 1e-15);
  EXPECT_NEAR(p[2], 0.2625, 1e-15);
}

TEST(SamplerTest, SumsToOneAndUniformLimit) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> deg(2 + rng.index(200));
    for (double& d : deg) d = static_cast<double>(rng.index(30));
    const double k = rng.uniform();
    double s = 0.0;
    for (double v : sampling_probabilities(deg, k, rng.uniform(0.0, 3.0))) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (double v : sampling_probabilities(deg, 1.0, 0.0)) EXPECT_NEAR(v, 1.0 / deg.size(), 1e-15);
  }
  for (double v : sampling_probabilities({0, 0, 0, 0}, 0.9, 1.0)) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(SamplerTest, FullSampleRecoversExactLikelihood) {
  Fixture s(3, 40);
  Matrix z(40, 4);
  Rng rng(2);
  for (double& v : z.data()) v = rng.uniform(0.0, 1.0);
  ad::Tape tape;
  ad::Var zv = tape.constant(z), g = tape.constant(Matrix{{0.4, 0.8, 1.1, 0.2}});
  const double full = prob::bernoulli_poisson_loglik(zv, g, s.batch.pairs).value().item();
  const auto probs = sampling_probabilities(std::vector<double>(40, 1.0), 0.9, 1.0);
  double mean = 0.0;
  for (int r = 0; r < 200; ++r) {
    const SubgraphSample sample = sample_subgraph(probs, 40, rng);
    EXPECT_EQ(sample.nodes.size(), 40u);
    mean += prob::bernoulli_poisson_loglik(zv, g, restrict_pairs(s.batch.pairs, 40, sample)).value().item() / 200.0;
  }
  EXPECT_NEAR(mean, full, 1e-9 * std::abs(full));
}

TEST(SamplerTest, HalfSampleIsWithinFivePercent) {
  auto [graph, planted] = sample_epm_graph(200, 4, 1.0, 1.0, {0.02, 0.02, 0.02, 0.02}, 4);
  const model::GraphBatch batch = model::make_node_batch(graph);
  ad::Tape tape;
  ad::Var zv = tape.constant(planted.z_true), g = tape.constant(Matrix{{0.02, 0.02, 0.02, 0.02}});
  const double full = prob::bernoulli_poisson_loglik(zv, g, batch.pairs).value().item();
  const auto probs = sampling_probabilities(std::vector<double>(200, 1.0), 1.0, 0.0);
  Rng rng(9);
  double mean = 0.0;
  for (int r = 0; r < 500; ++r) {
    const SubgraphSample sample = sample_subgraph(probs, 100, rng);
    mean += prob::bernoulli_poisson_loglik(zv, g, restrict_pairs(batch.pairs, 200, sample)).value().item() / 500.0;
  }
  EXPECT_LE(std::abs(mean - full), 0.05 * std::abs(full)) << mean << " vs " << full;
}

TEST(TrainerTest, ZeroPretrainEpochsIsIdentity) {
  Fixture s(4);
  const auto before = values_of(s.store);
  TrainConfig c = short_config();
  c.pretrain_epochs = 0;
  Trainer t(*s.model, s.store, c, {}, 1);
  EXPECT_TRUE(t.pretrain(s.batch).empty());
  EXPECT_EQ(values_of(s.store), before);
  EXPECT_EQ(t.optimizer_steps(), 0u);
}

TEST(TrainerTest, PretrainTouchesOnlyTheInferenceSide) {
  Fixture s(5);
  const auto gen = s.model->generative_parameter_names();
  std::vector<Matrix> before;
  for (const auto& n : gen) before.push_back(s.store.value(n));
  Trainer t(*s.model, s.store, short_config(), {}, 1);
  EXPECT_EQ(t.pretrain(s.batch).size(), 5u);
  for (std::size_t i = 0; i < gen.size(); ++i) EXPECT_EQ(s.store.value(gen[i]), before[i]) << gen[i];
}

TEST(TrainerTest, SameSeedSameCheckpoint) {
  auto run = [] {
    Fixture s(6);
    Trainer t(*s.model, s.store, short_config(), {}, 11);
    t.pretrain(s.batch);
    t.finetune(s.batch, s.targets, no_eval());
    return t.checkpoint();
  };
  const ad::Checkpoint a = run(), b = run();
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_EQ(a.tensors[i].value.data(), b.tensors[i].value.data());
  EXPECT_EQ(a.meta, b.meta);
}

TEST(TrainerTest, PartitionFixedAcrossInnerSteps) {
  Fixture s(7);
  std::map<std::size_t, std::vector<Matrix>> seen;
  TrainObserver obs;
  obs.on_inner_step = [&](std::size_t epoch, std::size_t, const Matrix& p) { seen[epoch].push_back(p); };
  Trainer t(*s.model, s.store, short_config(), {}, 2);
  t.pretrain(s.batch);
  t.finetune(s.batch, s.targets, no_eval(), &obs);
  ASSERT_EQ(seen.size(), 4u);
  for (const auto& [epoch, parts] : seen) {
    ASSERT_EQ(parts.size(), 3u);
    for (const auto& p : parts) EXPECT_EQ(p.data(), parts.front().data());
  }
  EXPECT_NE(seen[0].front().data(), seen[3].front().data());
}

TEST(TrainerTest, OneInnerStepGivesOneOfEach) {
  Fixture s(8);
  TrainConfig c = short_config();
  c.inner_steps = 1;
  c.pretrain = false;
  Trainer t(*s.model, s.store, c, {}, 3);
  t.finetune(s.batch, s.targets, no_eval());
  EXPECT_EQ(t.optimizer_steps(), 8u);
}

TEST(TrainerTest, FrozenInferenceSideStaysPut) {
  Fixture s(9);
  TrainConfig c = short_config();
  c.pretrain = false;
  c.lr_phi = 0.0;
  const auto names = s.model->encoder_parameter_names();
  std::vector<Matrix> before;
  for (const auto& n : names) before.push_back(s.store.value(n));
  Trainer t(*s.model, s.store, c, {}, 3);
  const auto hist = t.finetune(s.batch, s.targets, no_eval());
  for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(s.store.value(names[i]), before[i]) << names[i];
  EXPECT_EQ(hist.size(), 4u);
}

TEST(TrainerTest, PretrainObjectiveEmaRises) {
  auto [graph, planted] = sample_epm_graph(200, 4, 1.0, 1.0, std::vector<double>(4, 5e-5), 1, {300.0});
  const model::GraphBatch batch = model::make_node_batch(graph);
  model::ModelConfig mc;
  mc.block_width = 1;
  mc.dropout = 0.0;
  model::VepmModel model(mc, graph.features.cols(), graph.num_classes(), false);
  ad::ParameterStore store;
  model.init_parameters(store, 1);
  TrainConfig c;
  c.pretrain_epochs = 50;
  Trainer t(model, store, c, {}, 1);
  const auto hist = t.pretrain(batch);
  ASSERT_EQ(hist.size(), 50u);
  double ema = hist[0].l_egen + hist[0].l_kl;
  for (std::size_t e = 1; e < hist.size(); ++e) {
    const double next = 0.9 * ema + 0.1 * (hist[e].l_egen + hist[e].l_kl);
    EXPECT_GE(next, ema) << "epoch " << e;
    ema = next;
  }
}

TEST(TrainerTest, ResumeMatchesUninterruptedRun) {
  TrainConfig full = short_config();
  Fixture a(10);
  Trainer ta(*a.model, a.store, full, {}, 5);
  ta.pretrain(a.batch);
  ta.finetune(a.batch, a.targets, no_eval());

  TrainConfig half = full;
  half.pretrain_epochs = 3;
  half.finetune_epochs = 0;
  Fixture b(10);
  ad::Checkpoint mid;
  {
    Trainer tb(*b.model, b.store, half, {}, 5);
    tb.pretrain(b.batch);
    mid = tb.checkpoint();
  }
  const auto file = std::filesystem::temp_directory_path() / "vepm_resume_test.bin";
  ad::save_checkpoint(mid, file);
  Fixture c(10);
  Trainer tc(*c.model, c.store, full, {}, 5);
  tc.restore(ad::load_checkpoint(file));
  EXPECT_EQ(tc.progress().pretrain_epoch, 3u);
  tc.pretrain(c.batch);
  tc.finetune(c.batch, c.targets, no_eval());
  EXPECT_EQ(tc.optimizer_steps(), ta.optimizer_steps());
  EXPECT_EQ(values_of(c.store), values_of(a.store));
}

TEST(TrainerTest, DivergenceIsReported) {
  Fixture s(11);
  s.store.value("gamma_raw").fill(std::nan(""));
  Trainer t(*s.model, s.store, short_config(), {}, 1);
  EXPECT_THROW(t.pretrain(s.batch), DivergenceError);
}

TEST(MetricsCsv, HeaderAndEmptyCells) {
  const auto file = std::filesystem::temp_directory_path() / "vepm_metrics_test.csv";
  write_metrics_csv({{0, std::nan(""), -1.5, -0.25, std::nan(""), std::nan(""), std::nan(""), 0.0}}, file);
  std::ifstream in(file);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "epoch,l_task,l_egen,l_kl,train_acc,val_acc,test_acc,wall_ms");
  EXPECT_EQ(row.substr(0, 2), "0,");
  EXPECT_NE(row.find(",,"), std::string::npos);
}
