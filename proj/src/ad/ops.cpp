#include "vepm/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vepm/core/rng.hpp"
#include "vepm/prob/distributions.hpp"

namespace vepm::ad {

namespace {

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("ops: operands live on different tapes");
}

std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* op, const Tensor& ta, const Tensor& tb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeError(std::string(op) + ": cannot broadcast " + ta.shape_string() + " with " + tb.shape_string());
}

// Adds g (in broadcast shape) into acc, summing over broadcast dimensions.
void accumulate_reduced(Tensor& acc, const Tensor& g) {
  if (acc.same_shape(g)) {
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    return;
  }
  const bool rb = acc.rows() == 1, cb = acc.cols() == 1;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) acc(rb ? 0 : i, cb ? 0 : j) += g(i, j);
}

template <typename F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, const char* op, F f) {
  const std::size_t r = broadcast_dim(a.rows(), b.rows(), op, a, b);
  const std::size_t c = broadcast_dim(a.cols(), b.cols(), op, a, b);
  Tensor out(r, c);
  if (a.same_shape(b)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out(i, j) = f(a(a.rows() == 1 ? 0 : i, a.cols() == 1 ? 0 : j), b(b.rows() == 1 ? 0 : i, b.cols() == 1 ? 0 : j));
  return out;
}

template <typename Fwd, typename Deriv>
Var unary(std::string_view op, Var x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xi = x.id();
  return x.tape().record(op, {x}, std::move(out), [xi, deriv](Tape& t, std::size_t self) {
    if (!t.needs_grad(xi)) return;
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(xi);
    const Tensor& yv = t.value(self);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) throw ShapeError("matmul: " + A.shape_string() + " * " + B.shape_string());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* c = &C.data()[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A.data()[i * k + p];
      if (av == 0.0) continue;
      const double* bp = &B.data()[p * n];
      for (std::size_t j = 0; j < n; ++j) c[j] += av * bp[j];
    }
  }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("matmul", {a, b}, std::move(C), [ai, bi, m, k, n](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    if (t.needs_grad(ai)) {
      Tensor& gA = t.grad(ai);
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = &G.data()[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double* bp = &B.data()[p * n];
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[j] * bp[j];
          gA.data()[i * k + p] += s;
        }
      }
    }
    if (t.needs_grad(bi)) {
      Tensor& gB = t.grad(bi);
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = &G.data()[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A.data()[i * k + p];
          if (av == 0.0) continue;
          double* gb = &gB.data()[p * n];
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * g[j];
        }
      }
    }
  });
}

Var sparse_dense_matmul(std::shared_ptr<const SparseMatrix> s, Var b) {
  if (!s) throw std::invalid_argument("sparse_dense_matmul: null matrix");
  Tensor out = s->multiply(b.value());
  const std::size_t bi = b.id();
  return b.tape().record("sparse_dense_matmul", {b}, std::move(out), [s, bi](Tape& t, std::size_t self) {
    if (!t.needs_grad(bi)) return;
    const Tensor& G = t.grad(self);
    Tensor& gB = t.grad(bi);
    const std::size_t w = G.cols();
    auto rp = s->row_ptr();
    auto ci = s->col_idx();
    auto vals = s->values();
    for (std::size_t r = 0; r < s->n_rows(); ++r) {
      const double* g = &G.data()[r * w];
      for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) {
        double* gb = &gB.data()[ci[k] * w];
        const double v = vals[k];
        for (std::size_t j = 0; j < w; ++j) gb[j] += v * g[j];
      }
    }
  });
}

Var edge_weighted_matmul(std::shared_ptr<const EdgeIndex> edges, Var weights, Var b) {
  require_same_tape(weights, b);
  if (!edges) throw std::invalid_argument("edge_weighted_matmul: null edge index");
  const Tensor& W = weights.value();
  const Tensor& B = b.value();
  if (W.rows() != edges->size() || W.cols() != 1)
    throw ShapeError("edge_weighted_matmul: weights " + W.shape_string() + " for " + std::to_string(edges->size()) +
                     " edges");
  if (B.rows() != edges->n_in) throw ShapeError("edge_weighted_matmul: dense operand " + B.shape_string());
  const std::size_t w = B.cols();
  Tensor out(edges->n_out, w);
  for (std::size_t e = 0; e < edges->size(); ++e) {
    const double we = W[e];
    double* o = &out.data()[edges->src[e] * w];
    const double* bp = &B.data()[edges->dst[e] * w];
    for (std::size_t j = 0; j < w; ++j) o[j] += we * bp[j];
  }
  const std::size_t wi = weights.id(), bi = b.id();
  return b.tape().record("edge_weighted_matmul", {weights, b}, std::move(out),
                         [edges, wi, bi, w](Tape& t, std::size_t self) {
                           const Tensor& G = t.grad(self);
                           const Tensor& W = t.value(wi);
                           const Tensor& B = t.value(bi);
                           const bool need_w = t.needs_grad(wi), need_b = t.needs_grad(bi);
                           Tensor* gW = need_w ? &t.grad(wi) : nullptr;
                           Tensor* gB = need_b ? &t.grad(bi) : nullptr;
                           for (std::size_t e = 0; e < edges->size(); ++e) {
                             const double* g = &G.data()[edges->src[e] * w];
                             if (need_w) {
                               const double* bp = &B.data()[edges->dst[e] * w];
                               double s = 0.0;
                               for (std::size_t j = 0; j < w; ++j) s += g[j] * bp[j];
                               (*gW)[e] += s;
                             }
                             if (need_b) {
                               double* gb = &gB->data()[edges->dst[e] * w];
                               const double we = W[e];
                               for (std::size_t j = 0; j < w; ++j) gb[j] += we * g[j];
                             }
                           }
                         });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  Tensor out = broadcast_apply(a.value(), b.value(), "add", [](double x, double y) { return x + y; });
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("add", {a, b}, std::move(out), [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) accumulate_reduced(t.grad(ai), g);
    if (t.needs_grad(bi)) accumulate_reduced(t.grad(bi), g);
  });
}

Var sub(Var a, Var b) { return add(a, negate(b)); }

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  Tensor out = broadcast_apply(a.value(), b.value(), "mul", [](double x, double y) { return x * y; });
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("mul", {a, b}, std::move(out), [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    if (t.needs_grad(ai)) {
      Tensor ga = broadcast_apply(g, B, "mul", [](double x, double y) { return x * y; });
      accumulate_reduced(t.grad(ai), ga);
    }
    if (t.needs_grad(bi)) {
      Tensor gb = broadcast_apply(g, A, "mul", [](double x, double y) { return x * y; });
      accumulate_reduced(t.grad(bi), gb);
    }
  });
}

Var negate(Var x) {
  return unary("negate", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var scale(Var x, double c) {
  return unary("scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var x, double c) {
  return unary("add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var relu(Var x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var x) {
  return unary(
      "softplus", x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var log(Var x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var reciprocal(Var x) {
  return unary("reciprocal", x, [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Var pow(Var x, double p) {
  return unary("pow", x, [p](double v) { return std::pow(v, p); },
               [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Var clamp(Var x, double lo, double hi) {
  return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var log_one_minus_exp_neg(Var r, double eps) {
  return unary(
      "log_one_minus_exp_neg", r, [eps](double v) { return std::log(-std::expm1(-v) + eps); },
      [eps](double v, double) { return std::exp(-v) / (-std::expm1(-v) + eps); });
}

Var reduce_sum(Var x, Axis axis) {
  const Tensor& X = x.value();
  Tensor out;
  switch (axis) {
    case Axis::All: {
      double s = 0.0;
      for (double v : X.data()) s += v;
      out = Tensor::scalar(s);
      break;
    }
    case Axis::Rows:
      out = Tensor(1, X.cols());
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) out[j] += X(i, j);
      break;
    case Axis::Cols:
      out = Tensor(X.rows(), 1);
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) out[i] += X(i, j);
      break;
  }
  const std::size_t xi = x.id();
  return x.tape().record("reduce_sum", {x}, std::move(out), [xi](Tape& t, std::size_t self) {
    if (!t.needs_grad(xi)) return;
    // Broadcasting the output gradient back is exactly the reverse rule.
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += g(g.rows() == 1 ? 0 : i, g.cols() == 1 ? 0 : j);
  });
}

Var concat_columns(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_columns: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.rows() != rows) throw ShapeError("concat_columns: row counts differ");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> offsets, ids;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + off);
    offsets.push_back(off);
    ids.push_back(p.id());
    off += v.cols();
  }
  return parts.front().tape().record("concat_columns", parts, std::move(out),
                                     [offsets, ids](Tape& t, std::size_t self) {
                                       const Tensor& g = t.grad(self);
                                       for (std::size_t k = 0; k < ids.size(); ++k) {
                                         if (!t.needs_grad(ids[k])) continue;
                                         Tensor& gp = t.grad(ids[k]);
                                         for (std::size_t i = 0; i < gp.rows(); ++i)
                                           for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, offsets[k] + j);
                                       }
                                     });
}

Var slice_columns(Var x, std::size_t begin, std::size_t end) {
  const Tensor& X = x.value();
  if (begin > end || end > X.cols())
    throw ShapeError("slice_columns: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     X.shape_string());
  Tensor out(X.rows(), end - begin);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = X(i, j);
  const std::size_t xi = x.id();
  return x.tape().record("slice_columns", {x}, std::move(out), [xi, begin](Tape& t, std::size_t self) {
    if (!t.needs_grad(xi)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, begin + j) += g(i, j);
  });
}

Var gather_rows(Var x, std::vector<std::size_t> indices) {
  const Tensor& X = x.value();
  const std::size_t w = X.cols();
  Tensor out(indices.size(), w);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= X.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(X.row(indices[k]).begin(), X.row(indices[k]).end(), out.row(k).begin());
  }
  const std::size_t xi = x.id();
  return x.tape().record("gather_rows", {x}, std::move(out),
                         [xi, w, idx = std::move(indices)](Tape& t, std::size_t self) {
                           if (!t.needs_grad(xi)) return;
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad(xi);
                           for (std::size_t k = 0; k < idx.size(); ++k)
                             for (std::size_t j = 0; j < w; ++j) gx(idx[k], j) += g(k, j);
                         });
}

Var block_sum_columns(Var x, std::size_t blocks) {
  const Tensor& X = x.value();
  if (blocks == 0 || X.cols() % blocks != 0)
    throw ShapeError("block_sum_columns: " + std::to_string(X.cols()) + " columns not divisible into " +
                     std::to_string(blocks) + " blocks");
  const std::size_t width = X.cols() / blocks;
  Tensor out(X.rows(), blocks);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t c = 0; c < X.cols(); ++c) out(i, c / width) += X(i, c);
  const std::size_t xi = x.id();
  return x.tape().record("block_sum_columns", {x}, std::move(out), [xi, width](Tape& t, std::size_t self) {
    if (!t.needs_grad(xi)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (std::size_t c = 0; c < gx.cols(); ++c) gx(i, c) += g(i, c / width);
  });
}

Var row_softmax_with_temperature(Var x, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("row_softmax_with_temperature: tau must be > 0");
  const Tensor& X = x.value();
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto r = X.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += out(i, j) = std::exp((r[j] - mx) / tau);
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) /= s;
  }
  const std::size_t xi = x.id();
  return x.tape().record("row_softmax", {x}, std::move(out), [xi, tau](Tape& t, std::size_t self) {
    if (!t.needs_grad(xi)) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += y(i, j) * (g(i, j) - dot) / tau;
    }
  });
}

Var log_softmax_rows(Var x) {
  const Tensor& X = x.value();
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto r = X.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) = r[j] - lse;
  }
  const std::size_t xi = x.id();
  return x.tape().record("log_softmax_rows", {x}, std::move(out), [xi](Tape& t, std::size_t self) {
    if (!t.needs_grad(xi)) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) gs += g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += g(i, j) - std::exp(y(i, j)) * gs;
    }
  });
}

Var dropout(Var x, double rate, std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const Tensor& X = x.value();
  Tensor mask(X.rows(), X.cols());
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * mask[i];
  const std::size_t xi = x.id();
  return x.tape().record("dropout", {x}, std::move(out), [xi, m = std::move(mask)](Tape& t, std::size_t self) {
    if (!t.needs_grad(xi)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * m[i];
  });
}

Var kl_weibull_gamma(Var k, Var lambda, double alpha, double beta) {
  require_same_tape(k, lambda);
  const Tensor& K = k.value();
  const Tensor& L = lambda.value();
  if (!K.same_shape(L)) throw ShapeError("kl_weibull_gamma: shape and scale differ in shape");
  Tensor out(K.rows(), K.cols());
  for (std::size_t i = 0; i < K.size(); ++i) out[i] = prob::kl_weibull_gamma(K[i], L[i], alpha, beta);
  const std::size_t ki = k.id(), li = lambda.id();
  return k.tape().record("kl_weibull_gamma", {k, lambda}, std::move(out),
                         [ki, li, alpha, beta](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const Tensor& K = t.value(ki);
                           const Tensor& L = t.value(li);
                           const bool nk = t.needs_grad(ki), nl = t.needs_grad(li);
                           Tensor* gk = nk ? &t.grad(ki) : nullptr;
                           Tensor* gl = nl ? &t.grad(li) : nullptr;
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             auto d = prob::kl_weibull_gamma_grad(K[i], L[i], alpha, beta);
                             if (nk) (*gk)[i] += g[i] * d.d_shape;
                             if (nl) (*gl)[i] += g[i] * d.d_scale;
                           }
                         });
}

}  // namespace vepm::ad
