#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "vepm/ad/ops.hpp"
#include "vepm/core/rng.hpp"
#include "vepm/graph/graph.hpp"
#include "vepm/graph/synthetic.hpp"
#include "vepm/prob/distributions.hpp"

using namespace vepm;
using namespace vepm::prob;

namespace {

// KL by quadrature, substituting u = (x / lambda)^k so the Weibull density
// becomes e^{-u} on (0, inf).
double kl_quadrature(double k, double lambda, double alpha, double beta) {
  auto f = [&](double u) {
    if (u <= 0.0 || std::exp(-u) == 0.0) return 0.0;
    const double log_x = std::log(lambda) + std::log(u) / k;
    const double log_q = std::log(k) - std::log(lambda) + (k - 1.0) * (log_x - std::log(lambda)) - u;
    const double log_p = alpha * std::log(beta) - std::lgamma(alpha) + (alpha - 1.0) * log_x - beta * std::exp(log_x);
    return std::exp(-u) * (log_q - log_p);
  };
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate(f);
}

// O(N^2) log-likelihood over unordered pairs.
double brute_loglik(const Matrix& z, const Matrix& gamma, const SparseMatrix& a) {
  double ll = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = i + 1; j < z.rows(); ++j) {
      double r = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) r += gamma(0, c) * z(i, c) * z(j, c);
      ll += a.contains(i, j) ? std::log(1.0 - std::exp(-r) + kEdgeEps) : -r;
    }
  return ll;
}

PairSet pairs_of(const SparseMatrix& a) {
  PairSet p;
  for (const auto& [i, j] : undirected_edges(a)) {
    p.src.push_back(i);
    p.dst.push_back(j);
  }
  return p;
}

}  // namespace

TEST(Kl, IdenticalExponentialsIsZero) { EXPECT_NEAR(kl_weibull_gamma(1, 1, 1, 1), 0.0, 1e-12); }

TEST(Kl, ShapeTwoValue) {
  EXPECT_NEAR(kl_quadrature(2, 1, 1, 1), 0.29077, 1e-4);
  EXPECT_NEAR(kl_weibull_gamma(2, 1, 1, 1), kl_quadrature(2, 1, 1, 1), 1e-8);
}

TEST(Kl, MatchesQuadratureOnGrid) {
  const double g[] = {0.5, 1.0, 2.0};
  for (double k : g)
    for (double l : g)
      for (double a : g)
        for (double b : g) {
          const double kl = kl_weibull_gamma(k, l, a, b);
          EXPECT_GE(kl, -1e-12);
          EXPECT_NEAR(kl, kl_quadrature(k, l, a, b), 1e-4) << k << " " << l << " " << a << " " << b;
        }
}

TEST(Kl, GradientMatchesFiniteDifference) {
  const double h = 1e-6;
  for (double k : {0.7, 1.3, 3.0})
    for (double l : {0.4, 1.1}) {
      const auto g = kl_weibull_gamma_grad(k, l, 1.5, 0.8);
      const double fk = (kl_weibull_gamma(k + h, l, 1.5, 0.8) - kl_weibull_gamma(k - h, l, 1.5, 0.8)) / (2 * h);
      const double fl = (kl_weibull_gamma(k, l + h, 1.5, 0.8) - kl_weibull_gamma(k, l - h, 1.5, 0.8)) / (2 * h);
      EXPECT_NEAR(g.d_shape, fk, 1e-6);
      EXPECT_NEAR(g.d_scale, fl, 1e-6);
    }
}

TEST(Weibull, UniformOneMinusInverseEGivesScale) {
  const double u = 1.0 - std::exp(-1.0);
  for (double k : {0.3, 1.0, 7.0})
    for (double l : {0.2, 5.0}) EXPECT_NEAR(weibull_from_uniform(k, l, u), l, 1e-12 * l);
}

TEST(Weibull, ExponentialMeanOverAMillionDraws) {
  Rng rng(5);
  double s = 0.0;
  const std::size_t n = 1000000;
  for (std::size_t i = 0; i < n; ++i) s += weibull_from_uniform(1.0, 1.0, rng.uniform_open());
  EXPECT_NEAR(s / n, 1.0, 0.01);
}

TEST(Weibull, KolmogorovSmirnov) {
  for (double k : {0.5, 1.0, 2.0})
    for (double l : {0.5, 1.0, 2.0}) {
      Rng rng(derive_seed(1, "ks", static_cast<std::uint64_t>(k * 10), static_cast<std::uint64_t>(l * 10)));
      std::vector<double> x(100000);
      for (double& v : x) v = weibull_from_uniform(k, l, rng.uniform_open());
      std::sort(x.begin(), x.end());
      double d = 0.0;
      const double n = static_cast<double>(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = 1.0 - std::exp(-std::pow(x[i] / l, k));
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
      }
      EXPECT_LT(d, 0.01) << k << " " << l;
    }
}

TEST(Weibull, RsampleClampsShapeAndUniforms) {
  ad::Tape tape;
  Matrix u{{0.0, 1.0, 0.5}};
  const Matrix z = weibull_rsample(tape.constant(Matrix{{1e-6, 1e6, 1.0}}), tape.constant(Matrix{{1, 1, 1}}), u).value();
  for (double v : z.data()) EXPECT_TRUE(std::isfinite(v));
  const Matrix clamped = clamp_uniforms(u);
  for (double v : clamped.data()) {
    EXPECT_GE(v, kUniformMin);
    EXPECT_LE(v, 1.0 - kUniformMin);
  }
  EXPECT_NEAR(z(0, 2), std::log(2.0), 1e-12);
}

TEST(PairwiseRate, Examples) {
  EXPECT_NEAR(pairwise_rate(Matrix{{2.0}, {3.0}}, Matrix{{0.5}}, 0, 1, 1)[0], 3.0, 1e-15);
  Matrix z{{0, 0, 0, 0}, {1, 2, 3, 4}};
  for (double r : pairwise_rate(z, Matrix{{1, 1, 1, 1}}, 0, 1, 2)) EXPECT_EQ(r, 0.0);
  EXPECT_THROW(pairwise_rate(z, Matrix{{1, 1, 1, 1}}, 0, 1, 3), std::invalid_argument);
}

TEST(PairwiseRate, InvariantToPermutationWithinBlock) {
  Matrix z{{0.3, 1.2, 0.5, 2.0}, {0.7, 0.1, 1.5, 0.4}};
  Matrix g{{0.2, 0.9, 1.1, 0.6}};
  Matrix zp{{1.2, 0.3, 2.0, 0.5}, {0.1, 0.7, 0.4, 1.5}};
  Matrix gp{{0.9, 0.2, 0.6, 1.1}};
  const auto a = pairwise_rate(z, g, 0, 1, 2), b = pairwise_rate(zp, gp, 0, 1, 2);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
}

TEST(Loglik, EmptyGraphZeroAffiliations) {
  ad::Tape tape;
  const double ll = bernoulli_poisson_loglik(tape.constant(Matrix(5, 2)), tape.constant(Matrix{{1, 1}}), PairSet{})
                        .value()
                        .item();
  EXPECT_EQ(ll, 0.0);
}

TEST(Loglik, SinglePairLogHalf) {
  ad::Tape tape;
  Matrix z{{std::sqrt(std::log(2.0))}, {std::sqrt(std::log(2.0))}};
  PairSet p;
  p.src = {0};
  p.dst = {1};
  const double ll = bernoulli_poisson_loglik(tape.constant(z), tape.constant(Matrix{{1.0}}), p).value().item();
  EXPECT_NEAR(ll, std::log(0.5), 1e-9);
}

TEST(Loglik, ImpossibleEdgeIsFinite) {
  ad::Tape tape;
  PairSet p;
  p.src = {0};
  p.dst = {1};
  const double ll = bernoulli_poisson_loglik(tape.constant(Matrix(3, 2)), tape.constant(Matrix{{1, 1}}), p).value().item();
  EXPECT_NEAR(ll, std::log(kEdgeEps), 1e-9);
}

TEST(Loglik, ClosedFormMatchesBruteForce) {
  for (std::size_t n : {2u, 17u, 80u, 200u}) {
    auto [g, planted] = sample_epm_graph(n, 4, 1.0, 1.0, {0.05, 0.05, 0.05, 0.05}, n);
    Rng rng(n);
    Matrix z(n, 4);
    for (double& v : z.data()) v = rng.uniform(0.0, 1.5);
    Matrix gamma{{0.3, 0.05, 1.2, 0.7}};
    ad::Tape tape;
    const double ll = bernoulli_poisson_loglik(tape.constant(z), tape.constant(gamma), pairs_of(g.adjacency)).value().item();
    const double ref = brute_loglik(z, gamma, g.adjacency);
    EXPECT_LE(std::abs(ll - ref), 1e-8 * std::abs(ref)) << n;
  }
}

TEST(Loglik, SegmentsExcludeCrossGraphPairs) {
  // Two disjoint 3-node graphs vs. their separate sums.
  Rng rng(2);
  Matrix z(6, 2);
  for (double& v : z.data()) v = rng.uniform(0.1, 1.0);
  Matrix gamma{{0.5, 1.5}};
  PairSet p;
  p.src = {0, 3};
  p.dst = {1, 5};
  p.segments = std::make_shared<SparseMatrix>(SparseMatrix::from_triplets(
      2, 6, {{0, 0, 1}, {0, 1, 1}, {0, 2, 1}, {1, 3, 1}, {1, 4, 1}, {1, 5, 1}}));
  ad::Tape tape;
  const double ll = bernoulli_poisson_loglik(tape.constant(z), tape.constant(gamma), p).value().item();
  auto part = [&](std::size_t off, Edge e) {
    Matrix zz(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < 2; ++c) zz(i, c) = z(off + i, c);
    return brute_loglik(zz, gamma, adjacency_from_edges(3, {e}));
  };
  EXPECT_NEAR(ll, part(0, {0, 1}) + part(3, {0, 2}), 1e-10);
}

TEST(InverseSoftplus, RoundTrip) {
  for (double y : {1e-3, 0.5, 1.0, 20.0}) EXPECT_NEAR(std::log1p(std::exp(inverse_softplus(y))), y, 1e-12 * std::max(1.0, y));
}
