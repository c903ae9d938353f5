#include "vepm/graph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vepm {

namespace {

std::size_t class_count(const std::vector<int>& labels) {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return static_cast<std::size_t>(mx + 1);
}

}  // namespace

std::size_t Graph::num_classes() const { return class_count(labels); }

void Graph::validate() const {
  const std::size_t n = num_nodes();
  if (adjacency.n_cols() != n) throw std::invalid_argument("Graph: adjacency is not square");
  if (features.rows() != n)
    throw std::invalid_argument("Graph: features have " + std::to_string(features.rows()) + " rows, expected " +
                                std::to_string(n));
  if (!adjacency.is_symmetric()) throw std::invalid_argument("Graph: adjacency is not symmetric");
  if (!adjacency.has_zero_diagonal()) throw std::invalid_argument("Graph: adjacency has self-loops");
  if (!labels.empty()) {
    if (labels.size() != n) throw std::invalid_argument("Graph: label count does not match node count");
    for (int l : labels)
      if (l < 0) throw std::invalid_argument("Graph: negative label");
  }
  if (masks) {
    if (masks->train.size() != n || masks->val.size() != n || masks->test.size() != n)
      throw std::invalid_argument("Graph: mask length does not match node count");
    for (std::size_t i = 0; i < n; ++i)
      if (masks->train[i] + masks->val[i] + masks->test[i] > 1)
        throw std::invalid_argument("Graph: masks overlap at node " + std::to_string(i));
  }
}

std::size_t GraphCollection::num_classes() const { return class_count(graph_labels); }

void GraphCollection::validate() const {
  if (graphs.size() != graph_labels.size())
    throw std::invalid_argument("GraphCollection: " + std::to_string(graphs.size()) + " graphs but " +
                                std::to_string(graph_labels.size()) + " labels");
  std::size_t f = graphs.empty() ? 0 : graphs.front().features.cols();
  for (const auto& g : graphs) {
    g.validate();
    if (g.features.cols() != f) throw std::invalid_argument("GraphCollection: inconsistent feature width");
  }
  for (int l : graph_labels)
    if (l < 0) throw std::invalid_argument("GraphCollection: negative label");
}

SparseMatrix adjacency_from_edges(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<Edge> sym;
  sym.reserve(edges.size() * 2);
  for (auto [i, j] : edges) {
    if (i >= n || j >= n)
      throw std::invalid_argument("edge (" + std::to_string(i) + "," + std::to_string(j) + ") exceeds node count " +
                                  std::to_string(n));
    if (i == j) continue;
    sym.emplace_back(i, j);
    sym.emplace_back(j, i);
  }
  std::sort(sym.begin(), sym.end());
  sym.erase(std::unique(sym.begin(), sym.end()), sym.end());
  std::vector<Triplet> t;
  t.reserve(sym.size());
  for (auto [i, j] : sym) t.push_back({i, j, 1.0});
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency) {
  if (!adjacency.is_symmetric(1e-12)) throw std::invalid_argument("normalize_adjacency: input is not symmetric");
  const std::size_t n = adjacency.n_rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;
    for (double v : adjacency.row_values(i)) d += v;
    // Diagonal entries already present are replaced by the self-loop, not added.
    d -= adjacency.at(i, i);
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  std::vector<Triplet> t;
  t.reserve(adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    auto cols = adjacency.row_cols(i);
    auto vals = adjacency.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (cols[k] != i) t.push_back({i, cols[k], vals[k] * inv_sqrt[i] * inv_sqrt[cols[k]]});
    t.push_back({i, i, inv_sqrt[i] * inv_sqrt[i]});
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

std::vector<std::size_t> degree_vector(const SparseMatrix& adjacency) {
  std::vector<std::size_t> deg(adjacency.n_rows());
  for (std::size_t i = 0; i < deg.size(); ++i) deg[i] = adjacency.row_cols(i).size();
  return deg;
}

std::vector<Edge> undirected_edges(const SparseMatrix& adjacency) {
  std::vector<Edge> out;
  out.reserve(adjacency.nnz() / 2);
  for (std::size_t i = 0; i < adjacency.n_rows(); ++i)
    for (std::size_t j : adjacency.row_cols(i))
      if (i < j) out.emplace_back(i, j);
  return out;
}

Matrix one_hot_features(std::size_t n) { return Matrix::identity(n); }

Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& nodes) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> remap(n, n);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] >= n) throw std::invalid_argument("induced_subgraph: node out of range");
    remap[nodes[k]] = k;
  }
  std::vector<Triplet> t;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    auto cols = g.adjacency.row_cols(nodes[k]);
    auto vals = g.adjacency.row_values(nodes[k]);
    for (std::size_t e = 0; e < cols.size(); ++e)
      if (remap[cols[e]] != n) t.push_back({k, remap[cols[e]], vals[e]});
  }
  Graph sub;
  sub.adjacency = SparseMatrix::from_triplets(nodes.size(), nodes.size(), std::move(t));
  sub.features = Matrix(nodes.size(), g.features.cols());
  for (std::size_t k = 0; k < nodes.size(); ++k)
    std::copy(g.features.row(nodes[k]).begin(), g.features.row(nodes[k]).end(), sub.features.row(k).begin());
  if (!g.labels.empty())
    for (std::size_t v : nodes) sub.labels.push_back(g.labels[v]);
  return sub;
}

Graph disjoint_union(const std::vector<const Graph*>& parts) {
  std::size_t n = 0;
  std::size_t f = parts.empty() ? 0 : parts.front()->features.cols();
  bool all_labels = !parts.empty();
  for (const Graph* g : parts) {
    n += g->num_nodes();
    if (g->features.cols() != f) throw std::invalid_argument("disjoint_union: inconsistent feature width");
    all_labels = all_labels && !g->labels.empty();
  }
  std::vector<Triplet> t;
  Graph u;
  u.features = Matrix(n, f);
  std::size_t offset = 0;
  for (const Graph* g : parts) {
    for (auto e : g->adjacency.triplets()) t.push_back({e.row + offset, e.col + offset, e.value});
    std::copy(g->features.data().begin(), g->features.data().end(), u.features.data().begin() + offset * f);
    if (all_labels) u.labels.insert(u.labels.end(), g->labels.begin(), g->labels.end());
    offset += g->num_nodes();
  }
  u.adjacency = SparseMatrix::from_triplets(n, n, std::move(t));
  return u;
}

}  // namespace vepm
