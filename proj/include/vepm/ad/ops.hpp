#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "vepm/ad/tape.hpp"
#include "vepm/graph/sparse_matrix.hpp"

namespace vepm::ad {

// Differentiable primitives. Every op records its own reverse rule on the
// tape of its inputs. Elementwise binary ops broadcast along any dimension of
// size 1 (bias rows, per-row scales, scalars).

Var matmul(Var a, Var b);
/// S * B with S constant; gradient flows to B only.
Var sparse_dense_matmul(std::shared_ptr<const SparseMatrix> s, Var b);

/// Directed edge list used by weighted aggregation: out[src[e]] += w[e] * B[dst[e]].
struct EdgeIndex {
  std::size_t n_out = 0;
  std::size_t n_in = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::size_t size() const noexcept { return src.size(); }
};

/// Aggregation with differentiable per-edge weights (E x 1); gradient flows
/// to both the weights and B. The edge structure itself is constant.
Var edge_weighted_matmul(std::shared_ptr<const EdgeIndex> edges, Var weights, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var negate(Var x);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);

Var relu(Var x);
Var softplus(Var x);
Var log(Var x);
Var exp(Var x);
Var reciprocal(Var x);
Var pow(Var x, double p);
/// Gradient is zero where the input was clamped.
Var clamp(Var x, double lo, double hi);
/// log(1 - exp(-r) + eps), accurate for small r.
Var log_one_minus_exp_neg(Var r, double eps);

enum class Axis { All, Rows, Cols };
/// Axis::Rows sums over rows (result 1 x cols), Axis::Cols over columns (rows x 1).
Var reduce_sum(Var x, Axis axis = Axis::All);

Var concat_columns(const std::vector<Var>& parts);
Var slice_columns(Var x, std::size_t begin, std::size_t end);
Var gather_rows(Var x, std::vector<std::size_t> indices);
/// Sums contiguous column blocks of equal width: (R x C) -> (R x blocks).
Var block_sum_columns(Var x, std::size_t blocks);

/// softmax(x / tau) per row, max-subtracted. Throws for tau <= 0.
Var row_softmax_with_temperature(Var x, double tau);
Var log_softmax_rows(Var x);

/// Inverted dropout. Identity when !training or rate == 0; otherwise keeps each
/// entry with probability 1 - rate and scales it by 1 / (1 - rate).
Var dropout(Var x, double rate, std::uint64_t seed, bool training);

/// Elementwise KL(Weibull(k, lambda) || Gamma(alpha, beta)), rate-parameterized
/// gamma; differentiable in k and lambda.
Var kl_weibull_gamma(Var k, Var lambda, double alpha, double beta);

}  // namespace vepm::ad
