#include "vepm/model/graph_batch.hpp"

#include <stdexcept>

#include "vepm/core/rng.hpp"

namespace vepm::model {

namespace {

std::shared_ptr<const SparseMatrix> sparse_features(const Matrix& x, bool row_normalize) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v;
    const double scale = (row_normalize && s != 0.0) ? 1.0 / s : 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (x(i, j) != 0.0) t.push_back({i, j, x(i, j) * scale});
  }
  return std::make_shared<SparseMatrix>(SparseMatrix::from_triplets(x.rows(), x.cols(), std::move(t)));
}

// Fills the structural fields from a (block-diagonal) adjacency.
void fill_structure(GraphBatch& b, const SparseMatrix& adjacency) {
  b.num_nodes = adjacency.n_rows();
  b.adjacency = std::make_shared<SparseMatrix>(adjacency);
  b.norm_adjacency = std::make_shared<SparseMatrix>(normalize_adjacency(adjacency));

  for (const auto& [i, j] : undirected_edges(adjacency)) {
    b.pairs.src.push_back(i);
    b.pairs.dst.push_back(j);
  }
  // Directed copies in CSR order, mapped back to their undirected edge.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> lookup(b.num_nodes);
  for (std::size_t e = 0; e < b.pairs.src.size(); ++e) lookup[b.pairs.src[e]].emplace_back(b.pairs.dst[e], e);
  auto edges = std::make_shared<ad::EdgeIndex>();
  edges->n_out = edges->n_in = b.num_nodes;
  for (std::size_t i = 0; i < b.num_nodes; ++i) {
    for (std::size_t j : adjacency.row_cols(i)) {
      const std::size_t lo = std::min(i, j), hi = std::max(i, j);
      std::size_t id = 0;
      bool found = false;
      for (const auto& [other, e] : lookup[lo])
        if (other == hi) {
          id = e;
          found = true;
          break;
        }
      if (!found) throw std::logic_error("GraphBatch: asymmetric adjacency");
      edges->src.push_back(i);
      edges->dst.push_back(j);
      b.directed_to_undirected.push_back(id);
    }
  }
  b.directed = std::move(edges);
}

}  // namespace

GraphBatch make_node_batch(const Graph& graph, bool row_normalize) {
  graph.validate();
  GraphBatch b;
  fill_structure(b, graph.adjacency);
  b.feature_dim = graph.features.cols();
  b.features = sparse_features(graph.features, row_normalize);
  b.graph_ids = {0};
  b.node_graph.assign(b.num_nodes, 0);
  for (std::size_t i = 0; i < b.num_nodes; ++i) b.node_keys.push_back(derive_seed(0, "node", 0, i));
  for (std::size_t e = 0; e < b.num_edges(); ++e)
    b.edge_keys.push_back(derive_seed(0, "edge", 0, (b.pairs.src[e] << 32) ^ b.pairs.dst[e]));
  return b;
}

GraphBatch make_graph_batch(const GraphCollection& collection, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_graph_batch: no graphs selected");
  std::vector<const Graph*> parts;
  for (std::size_t idx : indices) {
    if (idx >= collection.size()) throw std::out_of_range("make_graph_batch: graph index out of range");
    if (collection.graphs[idx].num_nodes() == 0) throw std::invalid_argument("make_graph_batch: empty graph");
    parts.push_back(&collection.graphs[idx]);
  }
  Graph u = disjoint_union(parts);
  GraphBatch b;
  fill_structure(b, u.adjacency);
  b.feature_dim = u.features.cols();
  b.features = sparse_features(u.features, false);
  b.num_graphs = indices.size();
  b.graph_ids = indices;

  std::vector<Triplet> pool;
  std::vector<std::size_t> offset;
  std::size_t base = 0;
  for (std::size_t g = 0; g < parts.size(); ++g) {
    offset.push_back(base);
    for (std::size_t i = 0; i < parts[g]->num_nodes(); ++i) {
      pool.push_back({g, base + i, 1.0});
      b.node_graph.push_back(g);
      b.node_keys.push_back(derive_seed(0, "node", indices[g], i));
    }
    base += parts[g]->num_nodes();
  }
  b.pairs.segments = std::make_shared<SparseMatrix>(SparseMatrix::from_triplets(parts.size(), base, std::move(pool)));
  for (std::size_t e = 0; e < b.num_edges(); ++e) {
    const std::size_t g = b.node_graph[b.pairs.src[e]];
    const std::size_t i = b.pairs.src[e] - offset[g], j = b.pairs.dst[e] - offset[g];
    b.edge_keys.push_back(derive_seed(0, "edge", indices[g], (i << 32) ^ j));
  }
  return b;
}

void attach_noise_features(GraphBatch& batch, std::uint64_t seed) {
  std::vector<Triplet> t;
  t.reserve(batch.num_nodes * batch.feature_dim);
  for (std::size_t i = 0; i < batch.num_nodes; ++i) {
    Rng rng(derive_seed(seed, "input-noise", batch.node_keys[i]));
    for (std::size_t j = 0; j < batch.feature_dim; ++j) t.push_back({i, j, rng.normal()});
  }
  batch.noise_features =
      std::make_shared<SparseMatrix>(SparseMatrix::from_triplets(batch.num_nodes, batch.feature_dim, std::move(t)));
}

}  // namespace vepm::model
