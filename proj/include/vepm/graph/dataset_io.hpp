#pragma once

#include <filesystem>
#include <stdexcept>

#include "vepm/graph/graph.hpp"

namespace vepm {

/// Raised for missing files, malformed rows and dimension mismatches.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Directory layout (no headers, 0-indexed):
//   edges.csv            i,j per line
//   features.csv         N rows of F comma-separated reals
//   labels.csv           one integer per node (or per graph)
//   masks.csv            optional; train,val,test as 0/1
//   graph_indicator.csv  graph datasets only; graph id per node

Graph load_node_dataset(const std::filesystem::path& dir);
GraphCollection load_graph_dataset(const std::filesystem::path& dir);

void save_node_dataset(const Graph& graph, const std::filesystem::path& dir);
void save_graph_dataset(const GraphCollection& collection, const std::filesystem::path& dir);

/// Dense matrix as CSV with round-trip precision.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& file);
Matrix read_matrix_csv(const std::filesystem::path& file);

}  // namespace vepm
