#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "vepm/core/matrix.hpp"
#include "vepm/graph/sparse_matrix.hpp"

namespace vepm {

using Edge = std::pair<std::size_t, std::size_t>;

struct SplitMasks {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;
};

/// Node-attributed undirected graph. Labels are per node for node tasks and
/// empty for graphs living inside a GraphCollection.
struct Graph {
  SparseMatrix adjacency;
  Matrix features;
  std::vector<int> labels;
  std::optional<SplitMasks> masks;

  std::size_t num_nodes() const noexcept { return adjacency.n_rows(); }
  std::size_t num_classes() const;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

struct GraphCollection {
  std::vector<Graph> graphs;
  std::vector<int> graph_labels;

  std::size_t size() const noexcept { return graphs.size(); }
  std::size_t num_classes() const;
  void validate() const;
};

/// Symmetric binary adjacency from an edge list; directed pairs are
/// symmetrized by union, duplicates merged, self-loops dropped.
SparseMatrix adjacency_from_edges(std::size_t n, const std::vector<Edge>& edges);

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I. Works for
/// nonnegative weighted symmetric input; throws on asymmetric input.
SparseMatrix normalize_adjacency(const SparseMatrix& adjacency);

std::vector<std::size_t> degree_vector(const SparseMatrix& adjacency);

/// Upper-triangular (i < j) edge list in CSR order.
std::vector<Edge> undirected_edges(const SparseMatrix& adjacency);

/// One-hot identity features, the default for synthetic graphs.
Matrix one_hot_features(std::size_t n);

/// Graph restricted to `nodes` (sorted, unique), relabelled 0..|nodes|-1.
Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& nodes);

/// Block-diagonal union; labels concatenated when every part has them.
Graph disjoint_union(const std::vector<const Graph*>& parts);

}  // namespace vepm
