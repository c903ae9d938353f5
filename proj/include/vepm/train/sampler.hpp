#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "vepm/core/rng.hpp"
#include "vepm/graph/sparse_matrix.hpp"
#include "vepm/prob/distributions.hpp"

namespace vepm::train {

enum class Importance { Degree, Uniform };
Importance parse_importance(std::string_view s);
std::string_view to_string(Importance v);

struct SamplerConfig {
  bool enabled = false;
  std::size_t n_sub = 200;
  double k_mix = 0.9;
  double alpha_sharp = 1.0;
  Importance importance = Importance::Degree;
  void validate() const;
};

/// p_i = k q_i + (1 - k)(1 - q_i)/(N - 1) with q_i = f_i^alpha / sum_j f_j^alpha.
/// An all-zero importance vector falls back to uniform q. Requires N >= 2.
std::vector<double> sampling_probabilities(const std::vector<double>& importance, double k_mix, double alpha_sharp);

struct SubgraphSample {
  std::vector<std::size_t> draws;  // with replacement, in draw order
  std::vector<std::size_t> nodes;  // unique, sorted
  /// Full over sampled unordered pair count, N(N-1) / (n(n-1)).
  double pair_ratio = 1.0;
};

/// Draws `n_sub` nodes with replacement from `probabilities`. When n_sub >= N
/// every node is taken once and the ratio is 1.
SubgraphSample sample_subgraph(const std::vector<double>& probabilities, std::size_t n_sub, Rng& rng);

/// Pair set for the edge likelihood restricted to the sampled nodes, with edge
/// and non-edge sums rescaled by the pair-count ratio. `full` supplies the
/// edges and any graph segments.
prob::PairSet restrict_pairs(const prob::PairSet& full, std::size_t num_nodes, const SubgraphSample& sample);

}  // namespace vepm::train
