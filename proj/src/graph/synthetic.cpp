#include "vepm/graph/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vepm {

double edge_probability(double rate) { return -std::expm1(-rate); }

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < r.size(); ++c)
      if (r[c] > r[best]) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

SparseMatrix sample_epm_edges(const Matrix& z, const std::vector<double>& gamma, Rng& rng) {
  if (gamma.size() != z.cols()) throw std::invalid_argument("sample_epm_edges: gamma length != community count");
  const std::size_t n = z.rows();
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double rate = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) rate += gamma[c] * z(i, c) * z(j, c);
      if (rng.uniform() < edge_probability(rate)) {
        t.push_back({i, j, 1.0});
        t.push_back({j, i, 1.0});
      }
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

std::pair<Graph, PlantedCommunities> sample_epm_graph(std::size_t n, std::size_t c, double alpha, double beta,
                                                      const std::vector<double>& gamma, std::uint64_t seed,
                                                      const SyntheticOptions& options) {
  if (n < 2) throw std::invalid_argument("sample_epm_graph: need n >= 2");
  if (c < 1) throw std::invalid_argument("sample_epm_graph: need c >= 1");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("sample_epm_graph: alpha and beta must be > 0");
  if (gamma.size() != c)
    throw std::invalid_argument("sample_epm_graph: gamma has " + std::to_string(gamma.size()) + " entries, expected " +
                                std::to_string(c));
  for (double g : gamma)
    if (!(g > 0.0)) throw std::invalid_argument("sample_epm_graph: gamma entries must be > 0");
  if (!(options.home_boost > 0.0)) throw std::invalid_argument("sample_epm_graph: home_boost must be > 0");

  PlantedCommunities planted;
  planted.gamma_true = gamma;
  planted.z_true = Matrix(n, c);
  Rng zrng(derive_seed(seed, "synthetic-z"));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t home = i * c / n;
    for (std::size_t k = 0; k < c; ++k) {
      double v = zrng.gamma(alpha, beta);
      if (k == home) v *= options.home_boost;
      planted.z_true(i, k) = v;
    }
  }
  planted.hard_labels = argmax_rows(planted.z_true);

  Graph g;
  Rng erng(derive_seed(seed, "synthetic-edges"));
  g.adjacency = sample_epm_edges(planted.z_true, gamma, erng);
  g.features = one_hot_features(n);
  g.labels = planted.hard_labels;

  SplitMasks masks{std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0)};
  Rng mrng(derive_seed(seed, "synthetic-masks"));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = mrng.uniform();
    if (u < options.train_fraction) masks.train[i] = 1;
    else if (u < options.train_fraction + options.val_fraction) masks.val[i] = 1;
    else masks.test[i] = 1;
  }
  g.masks = std::move(masks);
  return {std::move(g), std::move(planted)};
}

}  // namespace vepm
