#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vepm/core/matrix.hpp"
#include "vepm/core/rng.hpp"
#include "vepm/graph/graph.hpp"

namespace vepm {

struct PlantedCommunities {
  Matrix z_true;                   // N x C, nonnegative
  std::vector<double> gamma_true;  // length C, positive
  std::vector<int> hard_labels;    // argmax_c z_true(i, c)
};

struct SyntheticOptions {
  /// Node i gets home community floor(i * C / N) and its affiliation there is
  /// multiplied by this factor. 1 leaves the prior untouched.
  double home_boost = 1.0;
  /// Fractions of nodes placed in the train and validation masks; the rest is test.
  double train_fraction = 0.3;
  double val_fraction = 0.2;
};

/// Draws Z ~ Gamma(alpha, beta) (rate parameterization) and each pair i<j as an
/// edge with probability 1 - exp(-sum_c gamma_c Z_ic Z_jc). Labels are the
/// planted hard labels; features are one-hot. Throws std::invalid_argument
/// for n < 2, c < 1, non-positive alpha/beta/gamma or |gamma| != c.
std::pair<Graph, PlantedCommunities> sample_epm_graph(std::size_t n, std::size_t c, double alpha, double beta,
                                                      const std::vector<double>& gamma, std::uint64_t seed,
                                                      const SyntheticOptions& options = {});

/// Edge draw for a fixed affiliation matrix (the Bernoulli-Poisson link only).
SparseMatrix sample_epm_edges(const Matrix& z, const std::vector<double>& gamma, Rng& rng);

/// Edge probability 1 - exp(-rate).
double edge_probability(double rate);

std::vector<int> argmax_rows(const Matrix& m);

}  // namespace vepm
