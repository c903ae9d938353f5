#include "vepm/cli/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "vepm/ad/gradcheck.hpp"
#include "vepm/ad/ops.hpp"
#include "vepm/cli/run_config.hpp"
#include "vepm/core/rng.hpp"
#include "vepm/graph/synthetic.hpp"
#include "vepm/model/graph_batch.hpp"
#include "vepm/model/vepm_model.hpp"
#include "vepm/prob/distributions.hpp"
#include "vepm/train/elbo.hpp"
#include "vepm/train/sampler.hpp"
#include "vepm/train/trainer.hpp"

namespace vepm::cli {

namespace {

using ad::Tape;
using ad::Var;

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Random entries in [lo, hi] kept at least `gap` away from zero.
Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0, double gap = 1e-3) {
  Matrix m(r, c);
  for (double& v : m.data()) {
    do v = rng.uniform(lo, hi);
    while (std::abs(v) < gap);
  }
  return m;
}

// Max relative error of d/dx sum(R * f(x...)) for a primitive f.
double check_op(std::uint64_t seed, std::vector<Matrix> inputs,
                const std::function<Var(Tape&, const std::vector<Var>&)>& f) {
  ad::ParameterStore store;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    store.add("x" + std::to_string(i), ad::ParamGroup::Generative, std::move(inputs[i]));
  Matrix weights;
  auto build = [&](Tape& t, const ad::ParameterStore& s) {
    std::vector<Var> xs;
    for (std::size_t i = 0; i < s.entries().size(); ++i) xs.push_back(t.parameter(s, "x" + std::to_string(i)));
    Var y = f(t, xs);
    if (weights.size() == 0) {
      Rng rng(derive_seed(seed, "weights"));
      weights = random_matrix(rng, y.rows(), y.cols(), -1.0, 1.0, 0.0);
    }
    return ad::reduce_sum(ad::mul(y, t.constant(weights)));
  };
  ad::GradCheckOptions o;
  o.eps = 1e-5;
  o.samples = 1000;
  o.seed = seed;
  return ad::finite_difference_check(build, store, o).max_rel_error;
}

std::vector<CheckLine> gradcheck_suite(std::uint64_t seed) {
  std::vector<CheckLine> out;
  for (const auto& [name, err] : primitive_gradient_errors(seed))
    out.push_back({"gradcheck", "primitive " + name, err < 1e-6, "max_rel_err=" + num(err)});
  const double e = elbo_gradient_error(seed);
  out.push_back({"gradcheck", "full ELBO (30 nodes, 200 coordinates)", e < 1e-4, "max_rel_err=" + num(e)});
  return out;
}

double kl_by_quadrature(double k, double lambda, double alpha, double beta) {
  // Substituting u = (x / lambda)^k turns q(x) dx into exp(-u) du.
  auto integrand = [=](double u) {
    const double w = std::exp(-u);
    if (w == 0.0 || u <= 0.0) return 0.0;
    const double log_x = std::log(lambda) + std::log(u) / k;
    const double log_q = std::log(k) - std::log(lambda) + (k - 1.0) / k * std::log(u) - u;
    const double log_p = alpha * std::log(beta) - std::lgamma(alpha) + (alpha - 1.0) * log_x - beta * std::exp(log_x);
    return w * (log_q - log_p);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(integrand);
}

std::vector<CheckLine> kl_suite() {
  std::vector<CheckLine> out;
  const double base = prob::kl_weibull_gamma(1.0, 1.0, 1.0, 1.0);
  out.push_back({"kl", "KL(W(1,1)||Ga(1,1)) = 0", std::abs(base) < 1e-12, "value=" + num(base)});
  double max_diff = 0.0, min_val = 1e300;
  const double grid[] = {0.5, 1.0, 2.0};
  for (double k : grid)
    for (double l : grid)
      for (double a : grid)
        for (double b : grid) {
          const double v = prob::kl_weibull_gamma(k, l, a, b);
          min_val = std::min(min_val, v);
          max_diff = std::max(max_diff, std::abs(v - kl_by_quadrature(k, l, a, b)));
        }
  out.push_back({"kl", "closed form vs quadrature on {0.5,1,2}^4", max_diff < 1e-4, "max_abs_diff=" + num(max_diff)});
  out.push_back({"kl", "nonnegative on {0.5,1,2}^4", min_val >= -1e-12, "min=" + num(min_val)});
  const double v2 = prob::kl_weibull_gamma(2.0, 1.0, 1.0, 1.0);
  out.push_back({"kl", "KL(W(2,1)||Ga(1,1)) = 0.29077", std::abs(v2 - 0.29077) < 1e-4, "value=" + num(v2)});
  return out;
}

std::vector<CheckLine> sampler_suite(std::uint64_t seed) {
  std::vector<CheckLine> out;
  Rng rng(derive_seed(seed, "verify-sampler"));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(200);
    std::vector<double> deg(n);
    for (double& d : deg) d = static_cast<double>(rng.index(50));
    const double k = rng.uniform(), alpha = rng.uniform(0.0, 3.0);
    double s = 0.0;
    for (double p : train::sampling_probabilities(deg, k, alpha)) s += p;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  out.push_back({"sampler", "probabilities sum to 1", worst < 1e-12, "max_dev=" + num(worst)});
  const auto p = train::sampling_probabilities({2, 1, 1}, 0.9, 1.0);
  const double dev = std::max({std::abs(p[0] - 0.475), std::abs(p[1] - 0.2625), std::abs(p[2] - 0.2625)});
  out.push_back({"sampler", "N=3 degrees (2,1,1) -> (0.475, 0.2625, 0.2625)", dev < 1e-12, "max_dev=" + num(dev)});
  const auto pu = train::sampling_probabilities({5, 0, 3, 9}, 1.0, 0.0);
  double udev = 0.0;
  for (double v : pu) udev = std::max(udev, std::abs(v - 0.25));
  out.push_back({"sampler", "k_mix=1, alpha=0 is uniform", udev < 1e-12, "max_dev=" + num(udev)});

  const double grid[] = {0.5, 1.0, 2.0};
  double worst_ks = 0.0, worst_mean = 0.0;
  for (double k : grid)
    for (double l : grid) {
      Rng r(derive_seed(seed, "verify-weibull", static_cast<std::uint64_t>(k * 10), static_cast<std::uint64_t>(l * 10)));
      std::vector<double> xs(100000);
      for (double& x : xs) x = prob::weibull_from_uniform(k, l, r.uniform_open());
      std::sort(xs.begin(), xs.end());
      double ks = 0.0;
      const double n = static_cast<double>(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = prob::weibull_cdf(xs[i], k, l);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
      }
      worst_ks = std::max(worst_ks, ks);
      double mean = 0.0;
      for (int i = 0; i < 1000000; ++i) mean += prob::weibull_from_uniform(k, l, r.uniform_open());
      mean /= 1e6;
      worst_mean = std::max(worst_mean, std::abs(mean / prob::weibull_mean(k, l) - 1.0));
    }
  out.push_back({"sampler", "Weibull KS statistic < 0.01 (1e5 draws)", worst_ks < 0.01, "max_ks=" + num(worst_ks)});
  out.push_back({"sampler", "Weibull mean within 1% (1e6 draws)", worst_mean < 0.01, "max_rel_dev=" + num(worst_mean)});
  return out;
}

double row_entropy(std::span<const double> w) {
  double h = 0.0;
  for (double v : w)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::vector<CheckLine> partition_suite(std::uint64_t seed) {
  std::vector<CheckLine> out;
  auto [graph, planted] = sample_epm_graph(80, 4, 1.0, 1.0, std::vector<double>(4, 1.0), seed);
  model::GraphBatch batch = model::make_node_batch(graph);

  // Sum-to-A after every optimizer step of a short run, per mode.
  for (auto mode : {model::PartitionMode::Learned, model::PartitionMode::Even, model::PartitionMode::Random}) {
    model::ModelConfig mc;
    mc.k_meta = 4;
    mc.block_width = 2;
    mc.hidden_dim = 16;
    mc.bank_layers = 1;
    mc.composer_layers = 1;
    mc.partition_mode = mode;
    mc.random_partition_seed = seed;
    model::VepmModel m(mc, graph.features.cols(), graph.num_classes(), false);
    ad::ParameterStore store;
    m.init_parameters(store, seed);
    train::TrainConfig tc;
    tc.pretrain_epochs = 3;
    tc.finetune_epochs = 5;
    train::Trainer trainer(m, store, tc, {}, seed);
    double worst = 0.0;
    auto check = [&](const Matrix& part) {
      for (std::size_t e = 0; e < part.rows(); ++e) {
        double s = 0.0;
        for (double v : part.row(e)) s += v;
        worst = std::max(worst, std::abs(s - 1.0));
      }
    };
    train::TrainObserver obs;
    obs.on_inner_step = [&](std::size_t, std::size_t, const Matrix& p) { check(p); };
    obs.on_phi_step = [&](std::size_t, const Matrix& p) { check(p); };
    trainer.pretrain(batch);
    const auto targets = train::make_targets(graph.labels, train::mask_indices(graph.masks->train), m.num_classes());
    auto nan3 = [](const ad::ParameterStore&, std::size_t) {
      return std::array<double, 3>{std::nan(""), std::nan(""), std::nan("")};
    };
    trainer.finetune(batch, targets, nan3, &obs);
    out.push_back({"partition", "sum of parts equals A (" + std::string(model::to_string(mode)) + ")", worst < 1e-9,
                   "max_dev=" + num(worst)});
  }

  // Entropy monotone in tau, and one-hot limit, on random block rates.
  Rng rng(derive_seed(seed, "verify-tau"));
  const double taus[] = {0.1, 1.0, 10.0, 100.0, 1000.0};
  bool monotone = true;
  double min_onehot = 1.0;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix rates(1, 4);
    for (double& v : rates.data()) v = rng.uniform(0.0, 3.0);
    double prev = -1.0;
    for (double tau : taus) {
      Tape t;
      const Matrix w = ad::row_softmax_with_temperature(t.constant(rates), tau).value();
      const double h = row_entropy(w.row(0));
      if (h < prev - 1e-12) monotone = false;
      prev = h;
    }
    // The limit is one-hot only when the largest rate is unique.
    std::vector<double> sorted(rates.data().begin(), rates.data().end());
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] - sorted[1] < 0.05) continue;
    Tape t;
    const Matrix w = ad::row_softmax_with_temperature(t.constant(rates), 1e-3).value();
    min_onehot = std::min(min_onehot, *std::max_element(w.data().begin(), w.data().end()));
  }
  out.push_back({"partition", "weight entropy non-decreasing on tau grid", monotone, monotone ? "ok" : "violated"});
  out.push_back({"partition", "tau=1e-3 gives one-hot weights", min_onehot > 0.999, "min_max_weight=" + num(min_onehot)});
  return out;
}

}  // namespace

std::vector<std::pair<std::string, double>> primitive_gradient_errors(std::uint64_t seed) {
  std::vector<std::pair<std::string, double>> out;
  Rng rng(derive_seed(seed, "verify-primitives"));
  auto m = [&](std::size_t r, std::size_t c) { return random_matrix(rng, r, c); };
  auto pos = [&](std::size_t r, std::size_t c) { return random_matrix(rng, r, c, 0.2, 2.0); };
  auto s = [&](const char* name, std::vector<Matrix> in, std::function<Var(Tape&, const std::vector<Var>&)> f) {
    out.emplace_back(name, check_op(derive_seed(seed, name), std::move(in), f));
  };

  auto sparse = std::make_shared<SparseMatrix>(
      SparseMatrix::from_triplets(4, 5, {{0, 1, 0.5}, {1, 0, -1.5}, {2, 4, 2.0}, {3, 3, 1.0}, {3, 0, 0.25}}));
  auto edges = std::make_shared<ad::EdgeIndex>();
  edges->n_out = edges->n_in = 4;
  edges->src = {0, 1, 1, 2, 3, 3};
  edges->dst = {1, 0, 2, 1, 3, 0};

  s("matmul", {m(3, 4), m(4, 2)}, [](Tape&, const std::vector<Var>& x) { return ad::matmul(x[0], x[1]); });
  s("sparse_dense_matmul", {m(5, 3)}, [&](Tape&, const std::vector<Var>& x) { return ad::sparse_dense_matmul(sparse, x[0]); });
  s("edge_weighted_matmul", {m(6, 1), m(4, 3)},
    [&](Tape&, const std::vector<Var>& x) { return ad::edge_weighted_matmul(edges, x[0], x[1]); });
  s("add", {m(3, 4), m(1, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::add(x[0], x[1]); });
  s("sub", {m(3, 4), m(3, 1)}, [](Tape&, const std::vector<Var>& x) { return ad::sub(x[0], x[1]); });
  s("elementwise_mul", {m(3, 4), m(3, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::mul(x[0], x[1]); });
  s("broadcast_mul", {m(3, 4), m(1, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::mul(x[0], x[1]); });
  s("negate", {m(3, 3)}, [](Tape&, const std::vector<Var>& x) { return ad::negate(x[0]); });
  s("scale", {m(3, 3)}, [](Tape&, const std::vector<Var>& x) { return ad::scale(x[0], -1.7); });
  s("relu", {m(4, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::relu(x[0]); });
  s("softplus", {m(4, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::softplus(x[0]); });
  s("log", {pos(4, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::log(x[0]); });
  s("exp", {m(4, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::exp(x[0]); });
  s("reciprocal", {pos(4, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::reciprocal(x[0]); });
  s("pow", {pos(4, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::pow(x[0], -0.5); });
  s("log_one_minus_exp_neg", {pos(4, 4)},
    [](Tape&, const std::vector<Var>& x) { return ad::log_one_minus_exp_neg(x[0], 1e-10); });
  s("reduce_sum_all", {m(3, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::reduce_sum(ad::mul(x[0], x[0])); });
  s("reduce_sum_rows", {m(3, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::reduce_sum(x[0], ad::Axis::Rows); });
  s("reduce_sum_cols", {m(3, 4)}, [](Tape&, const std::vector<Var>& x) { return ad::reduce_sum(x[0], ad::Axis::Cols); });
  s("concat_columns", {m(3, 2), m(3, 3)}, [](Tape&, const std::vector<Var>& x) { return ad::concat_columns({x[0], x[1]}); });
  s("slice_columns", {m(3, 5)}, [](Tape&, const std::vector<Var>& x) { return ad::slice_columns(x[0], 1, 4); });
  s("gather_rows", {m(4, 3)}, [](Tape&, const std::vector<Var>& x) { return ad::gather_rows(x[0], {3, 0, 0, 2}); });
  s("block_sum_columns", {m(3, 6)}, [](Tape&, const std::vector<Var>& x) { return ad::block_sum_columns(x[0], 3); });
  s("row_softmax_tau1", {m(4, 5)}, [](Tape&, const std::vector<Var>& x) { return ad::row_softmax_with_temperature(x[0], 1.0); });
  s("row_softmax_tau0.3", {m(4, 5)},
    [](Tape&, const std::vector<Var>& x) { return ad::row_softmax_with_temperature(x[0], 0.3); });
  s("log_softmax_rows", {m(4, 5)}, [](Tape&, const std::vector<Var>& x) { return ad::log_softmax_rows(x[0]); });
  s("dropout", {m(5, 5)}, [](Tape&, const std::vector<Var>& x) { return ad::dropout(x[0], 0.4, 17, true); });
  s("kl_weibull_gamma", {pos(3, 3), pos(3, 3)},
    [](Tape&, const std::vector<Var>& x) { return ad::kl_weibull_gamma(x[0], x[1], 1.5, 0.7); });
  s("weibull_rsample", {pos(3, 3), pos(3, 3)}, [&](Tape&, const std::vector<Var>& x) {
    Matrix u(3, 3);
    Rng r(7);
    for (double& v : u.data()) v = r.uniform_open();
    return prob::weibull_rsample(x[0], x[1], u);
  });
  s("bernoulli_poisson_loglik", {pos(4, 3), pos(1, 3)}, [](Tape&, const std::vector<Var>& x) {
    prob::PairSet p;
    p.src = {0, 1, 0};
    p.dst = {1, 2, 3};
    return prob::bernoulli_poisson_loglik(x[0], x[1], p);
  });
  return out;
}

double elbo_gradient_error(std::uint64_t seed, std::size_t samples) {
  auto [graph, planted] = sample_epm_graph(30, 4, 1.0, 1.0, std::vector<double>(4, 1.0), seed);
  const model::GraphBatch batch = model::make_node_batch(graph);
  model::ModelConfig mc;
  mc.k_meta = 2;
  mc.block_width = 2;
  mc.hidden_dim = 8;
  mc.bank_layers = 1;
  mc.composer_layers = 1;
  model::VepmModel m(mc, graph.features.cols(), graph.num_classes(), false);
  ad::ParameterStore store;
  m.init_parameters(store, seed);
  const Matrix u = m.draw_uniforms(batch, derive_seed(seed, "verify-uniforms"));
  const auto targets = train::make_targets(graph.labels, train::mask_indices(graph.masks->train), m.num_classes());
  auto build = [&](Tape& t, const ad::ParameterStore& s) {
    return train::elbo(t, s, m, batch, &targets, u, {}, {}).objective;
  };
  ad::GradCheckOptions o;
  o.samples = samples;
  o.seed = seed;
  return ad::finite_difference_check(build, store, o).max_rel_error;
}

std::vector<CheckLine> run_verify_suite(std::string_view suite, std::uint64_t seed) {
  if (suite == "gradcheck") return gradcheck_suite(seed);
  if (suite == "kl") return kl_suite();
  if (suite == "sampler") return sampler_suite(seed);
  if (suite == "partition") return partition_suite(seed);
  if (suite == "all") {
    std::vector<CheckLine> out;
    for (const char* s : {"gradcheck", "kl", "sampler", "partition"}) {
      auto part = run_verify_suite(s, seed);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  throw ConfigError("unknown verify suite '" + std::string(suite) + "' (expected gradcheck, kl, sampler, partition, all)");
}

}  // namespace vepm::cli
