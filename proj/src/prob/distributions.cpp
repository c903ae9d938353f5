#include "vepm/prob/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

namespace vepm::prob {

void GammaPrior::validate() const {
  if (!(alpha > 0.0 && std::isfinite(alpha)) || !(beta > 0.0 && std::isfinite(beta)))
    throw std::invalid_argument("gamma prior requires alpha > 0 and beta > 0");
}

double kl_weibull_gamma(double k, double lambda, double alpha, double beta) {
  return -alpha * std::log(lambda) + kEulerGamma * alpha / k + std::log(k) +
         beta * lambda * std::tgamma(1.0 + 1.0 / k) - kEulerGamma - 1.0 - alpha * std::log(beta) +
         std::lgamma(alpha);
}

KlGradient kl_weibull_gamma_grad(double k, double lambda, double alpha, double beta) {
  const double x = 1.0 + 1.0 / k;
  const double g = std::tgamma(x);
  const double d_shape = -kEulerGamma * alpha / (k * k) + 1.0 / k -
                         beta * lambda * g * boost::math::digamma(x) / (k * k);
  const double d_scale = -alpha / lambda + beta * g;
  return {d_shape, d_scale};
}

double weibull_cdf(double x, double k, double lambda) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-std::pow(x / lambda, k));
}

double weibull_mean(double k, double lambda) { return lambda * std::tgamma(1.0 + 1.0 / k); }

double weibull_from_uniform(double k, double lambda, double u) {
  u = std::clamp(u, kUniformMin, 1.0 - kUniformMin);
  k = std::clamp(k, kShapeMin, kShapeMax);
  return lambda * std::pow(-std::log1p(-u), 1.0 / k);
}

Matrix clamp_uniforms(Matrix u) {
  for (double& v : u.data()) v = std::clamp(v, kUniformMin, 1.0 - kUniformMin);
  return u;
}

ad::Var weibull_rsample(ad::Var shape, ad::Var scale, const Matrix& uniforms) {
  if (!shape.value().same_shape(scale.value()) || !shape.value().same_shape(uniforms))
    throw ShapeError("weibull_rsample: shape " + shape.value().shape_string() + ", scale " +
                     scale.value().shape_string() + ", uniforms " + uniforms.shape_string());
  Matrix log_e(uniforms.rows(), uniforms.cols());
  for (std::size_t i = 0; i < uniforms.size(); ++i) {
    const double u = std::clamp(uniforms[i], kUniformMin, 1.0 - kUniformMin);
    log_e[i] = std::log(-std::log1p(-u));
  }
  ad::Tape& t = shape.tape();
  ad::Var inv_k = ad::reciprocal(ad::clamp(shape, kShapeMin, kShapeMax));
  return ad::mul(scale, ad::exp(ad::mul(t.constant(std::move(log_e)), inv_k)));
}

namespace {

std::size_t block_width(std::size_t c, std::size_t blocks) {
  if (blocks == 0 || c % blocks != 0)
    throw std::invalid_argument("community count " + std::to_string(c) + " is not divisible into " +
                                std::to_string(blocks) + " blocks");
  return c / blocks;
}

}  // namespace

std::vector<double> pairwise_rate(const Matrix& z, const Matrix& gamma, std::size_t i, std::size_t j,
                                  std::size_t blocks) {
  const std::size_t width = block_width(z.cols(), blocks);
  if (gamma.size() != z.cols()) throw ShapeError("pairwise_rate: gamma length differs from Z columns");
  std::vector<double> out(blocks, 0.0);
  for (std::size_t c = 0; c < z.cols(); ++c) out[c / width] += gamma[c] * z(i, c) * z(j, c);
  return out;
}

ad::Var edge_block_rates(ad::Var z, ad::Var gamma, const std::vector<std::size_t>& src,
                         const std::vector<std::size_t>& dst, std::size_t blocks) {
  block_width(z.cols(), blocks);
  if (src.size() != dst.size()) throw std::invalid_argument("edge_block_rates: endpoint lists differ in length");
  ad::Var zi = ad::gather_rows(z, src);
  ad::Var zj = ad::gather_rows(z, dst);
  return ad::block_sum_columns(ad::mul(ad::mul(zi, zj), gamma), blocks);
}

ad::Var bernoulli_poisson_loglik(ad::Var z, ad::Var gamma, const PairSet& pairs) {
  if (gamma.rows() != 1 || gamma.cols() != z.cols())
    throw ShapeError("bernoulli_poisson_loglik: gamma must be 1 x " + std::to_string(z.cols()));

  // Total rate over all unordered pairs inside each graph:
  // 1/2 [ s' G s - sum_i z_i' G z_i ] with s the per-graph column sums.
  // Nodes outside every segment (unsampled ones) drop out of both sums.
  auto segment_sum = [&](ad::Var x) {
    return pairs.segments ? ad::sparse_dense_matmul(pairs.segments, x) : ad::reduce_sum(x, ad::Axis::Rows);
  };
  ad::Var sums = segment_sum(z);
  ad::Var all_pairs = ad::reduce_sum(ad::mul(ad::mul(sums, sums), gamma));
  ad::Var self_pairs = ad::reduce_sum(ad::mul(segment_sum(ad::mul(z, z)), gamma));
  ad::Var total_rate = ad::scale(ad::sub(all_pairs, self_pairs), 0.5);

  if (pairs.src.empty()) return ad::scale(ad::negate(total_rate), pairs.nonedge_scale);

  ad::Var edge_rates = edge_block_rates(z, gamma, pairs.src, pairs.dst, 1);
  ad::Var edge_ll = ad::reduce_sum(ad::log_one_minus_exp_neg(edge_rates, kEdgeEps));
  ad::Var nonedge_rate = ad::sub(total_rate, ad::reduce_sum(edge_rates));
  return ad::sub(ad::scale(edge_ll, pairs.edge_scale), ad::scale(nonedge_rate, pairs.nonedge_scale));
}

double inverse_softplus(double y) { return y + std::log(-std::expm1(-y)); }

}  // namespace vepm::prob
