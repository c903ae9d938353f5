#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "vepm/ad/ops.hpp"
#include "vepm/graph/graph.hpp"
#include "vepm/prob/distributions.hpp"

namespace vepm::model {

/// Everything a forward pass needs about one graph or a disjoint union of
/// graphs, precomputed once.
struct GraphBatch {
  std::size_t num_nodes = 0;
  std::size_t num_graphs = 1;
  std::size_t feature_dim = 0;

  std::shared_ptr<const SparseMatrix> features;        // N x F
  std::shared_ptr<const SparseMatrix> noise_features;  // N x F, random input mode only
  std::shared_ptr<const SparseMatrix> adjacency;       // binary A
  std::shared_ptr<const SparseMatrix> norm_adjacency;  // D^-1/2 (A + I) D^-1/2
  std::shared_ptr<const ad::EdgeIndex> directed;       // both directions of each edge
  std::vector<std::size_t> directed_to_undirected;
  prob::PairSet pairs;  // undirected edges (i < j) and graph segments

  std::vector<std::uint64_t> edge_keys;  // stable identity per undirected edge
  std::vector<std::uint64_t> node_keys;  // stable identity per node
  std::vector<std::size_t> graph_ids;    // source index of each graph in the batch
  std::vector<std::size_t> node_graph;   // node -> position in graph_ids

  std::size_t num_edges() const noexcept { return pairs.src.size(); }
};

/// Batch over a single node-task graph. `row_normalize` scales each feature
/// row to sum 1 (rows of zeros are left alone).
GraphBatch make_node_batch(const Graph& graph, bool row_normalize = false);

/// Disjoint union of `indices` from a collection, in the given order.
GraphBatch make_graph_batch(const GraphCollection& collection, const std::vector<std::size_t>& indices);

/// Attaches seeded standard-normal noise of the feature width, keyed per node
/// so every batch containing a node sees the same noise row.
void attach_noise_features(GraphBatch& batch, std::uint64_t seed);

}  // namespace vepm::model
