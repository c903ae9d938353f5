#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "vepm/ad/ops.hpp"
#include "vepm/core/matrix.hpp"

namespace vepm::prob {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr double kShapeMin = 1e-2;
inline constexpr double kShapeMax = 1e2;
inline constexpr double kUniformMin = 1e-12;
inline constexpr double kEdgeEps = 1e-10;

struct GammaPrior {
  double alpha = 1.0;
  double beta = 1.0;
  /// Throws std::invalid_argument unless both are positive and finite.
  void validate() const;
};

/// KL(Weibull(k, lambda) || Gamma(alpha, beta)), gamma with rate beta.
double kl_weibull_gamma(double k, double lambda, double alpha, double beta);

struct KlGradient {
  double d_shape;
  double d_scale;
};
KlGradient kl_weibull_gamma_grad(double k, double lambda, double alpha, double beta);

double weibull_cdf(double x, double k, double lambda);
double weibull_mean(double k, double lambda);
/// Inverse-CDF draw; u is clamped to [1e-12, 1 - 1e-12].
double weibull_from_uniform(double k, double lambda, double u);

Matrix clamp_uniforms(Matrix u);

/// Z = lambda * (-log(1 - U))^(1/k) with k clamped to [1e-2, 1e2] and U
/// clamped away from {0, 1}. Differentiable in shape and scale.
ad::Var weibull_rsample(ad::Var shape, ad::Var scale, const Matrix& uniforms);

/// Per-block rates r_k = sum_{c in block k} gamma_c Z_ic Z_jc for one pair.
/// `gamma` is a 1 x C row. Throws if C is not divisible by `blocks`.
std::vector<double> pairwise_rate(const Matrix& z, const Matrix& gamma, std::size_t i, std::size_t j,
                                  std::size_t blocks);

/// Block rates for many pairs at once: (E x blocks), row e for (src[e], dst[e]).
ad::Var edge_block_rates(ad::Var z, ad::Var gamma, const std::vector<std::size_t>& src,
                         const std::vector<std::size_t>& dst, std::size_t blocks);

/// Pair structure for the edge log-likelihood: each undirected edge once
/// (i < j) and an optional pooling matrix (G x N, 0/1) describing disjoint
/// graphs. Pairs across different graphs are never counted, and nodes without
/// a segment entry take no part in the non-edge sum.
struct PairSet {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::shared_ptr<const SparseMatrix> segments;  // null: one graph
  /// Multipliers applied to the edge and non-edge sums (subsampling estimator).
  double edge_scale = 1.0;
  double nonedge_scale = 1.0;
};

/// sum_{edges} log(1 - exp(-r_ij) + 1e-10) - sum_{non-edges} r_ij over
/// unordered pairs, with the non-edge sum in closed form.
ad::Var bernoulli_poisson_loglik(ad::Var z, ad::Var gamma, const PairSet& pairs);

/// softplus^{-1}(1), the initial unconstrained community activation.
double inverse_softplus(double y);

}  // namespace vepm::prob
