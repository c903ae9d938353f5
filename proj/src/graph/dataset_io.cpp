#include "vepm/graph/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vepm {

namespace fs = std::filesystem;

namespace {

std::ifstream open_required(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DatasetError("cannot open " + file.string());
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view field, const fs::path& file, std::size_t line) {
  field = trim(field);
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw DatasetError(file.string() + ":" + std::to_string(line) + ": cannot parse '" + std::string(field) + "'");
  return value;
}

template <typename T>
std::vector<std::vector<T>> read_rows(const fs::path& file) {
  auto in = open_required(file);
  std::vector<std::vector<T>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    std::vector<T> row;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = sv.find(',', start);
      row.push_back(parse_field<T>(sv.substr(start, comma - start), file, lineno));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Edge> read_edges(const fs::path& file) {
  std::vector<Edge> edges;
  std::size_t line = 0;
  for (const auto& row : read_rows<long long>(file)) {
    ++line;
    if (row.size() != 2) throw DatasetError(file.string() + ": edge row " + std::to_string(line) + " needs 2 fields");
    if (row[0] < 0 || row[1] < 0) throw DatasetError(file.string() + ": negative node index");
    edges.emplace_back(static_cast<std::size_t>(row[0]), static_cast<std::size_t>(row[1]));
  }
  return edges;
}

std::vector<int> read_labels(const fs::path& file) {
  std::vector<int> labels;
  for (const auto& row : read_rows<int>(file)) {
    if (row.size() != 1) throw DatasetError(file.string() + ": expected one label per line");
    if (row[0] < 0) throw DatasetError(file.string() + ": label " + std::to_string(row[0]) + " out of class range");
    labels.push_back(row[0]);
  }
  return labels;
}

void check_edges_in_range(const std::vector<Edge>& edges, std::size_t n, const fs::path& dir) {
  std::size_t max_index = 0;
  for (auto [i, j] : edges) max_index = std::max({max_index, i, j});
  if (!edges.empty() && max_index >= n)
    throw DatasetError(dir.string() + ": dimension mismatch, edge index " + std::to_string(max_index) +
                       " but features.csv has " + std::to_string(n) + " rows");
}

std::string format_double(double v) {
  char buf[32];
  int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

std::ofstream open_output(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + file.string());
  return out;
}

void write_edges(std::ofstream& out, const SparseMatrix& adj, std::size_t offset) {
  for (auto [i, j] : undirected_edges(adj)) out << (i + offset) << ',' << (j + offset) << '\n';
}

}  // namespace

Matrix read_matrix_csv(const fs::path& file) {
  auto rows = read_rows<double>(file);
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols)
      throw DatasetError(file.string() + ": row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                         " fields, expected " + std::to_string(cols));
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

void write_matrix_csv(const Matrix& m, const fs::path& file) {
  auto out = open_output(file);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

Graph load_node_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  Graph g;
  g.features = read_matrix_csv(dir / "features.csv");
  const std::size_t n = g.features.rows();
  auto edges = read_edges(dir / "edges.csv");
  check_edges_in_range(edges, n, dir);
  g.adjacency = adjacency_from_edges(n, edges);
  if (fs::exists(dir / "labels.csv")) {
    g.labels = read_labels(dir / "labels.csv");
    if (g.labels.size() != n)
      throw DatasetError(dir.string() + ": labels.csv has " + std::to_string(g.labels.size()) + " rows, expected " +
                         std::to_string(n));
  }
  if (fs::exists(dir / "masks.csv")) {
    auto rows = read_rows<int>(dir / "masks.csv");
    if (rows.size() != n) throw DatasetError(dir.string() + ": masks.csv row count does not match node count");
    SplitMasks m;
    for (const auto& row : rows) {
      if (row.size() != 3) throw DatasetError(dir.string() + ": masks.csv needs train,val,test columns");
      for (int v : row)
        if (v != 0 && v != 1) throw DatasetError(dir.string() + ": masks.csv values must be 0 or 1");
      m.train.push_back(static_cast<std::uint8_t>(row[0]));
      m.val.push_back(static_cast<std::uint8_t>(row[1]));
      m.test.push_back(static_cast<std::uint8_t>(row[2]));
    }
    g.masks = std::move(m);
  }
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw DatasetError(dir.string() + ": " + e.what());
  }
  return g;
}

GraphCollection load_graph_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  Matrix features = read_matrix_csv(dir / "features.csv");
  const std::size_t n = features.rows();
  auto edges = read_edges(dir / "edges.csv");
  check_edges_in_range(edges, n, dir);
  std::vector<std::size_t> indicator;
  for (const auto& row : read_rows<long long>(dir / "graph_indicator.csv")) {
    if (row.size() != 1 || row[0] < 0) throw DatasetError(dir.string() + ": malformed graph_indicator.csv");
    indicator.push_back(static_cast<std::size_t>(row[0]));
  }
  if (indicator.size() != n)
    throw DatasetError(dir.string() + ": graph_indicator.csv has " + std::to_string(indicator.size()) +
                       " rows, expected " + std::to_string(n));
  GraphCollection c;
  c.graph_labels = read_labels(dir / "labels.csv");
  const std::size_t n_graphs = c.graph_labels.size();

  std::vector<std::vector<std::size_t>> members(n_graphs);
  std::vector<std::size_t> local(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (indicator[v] >= n_graphs)
      throw DatasetError(dir.string() + ": graph id " + std::to_string(indicator[v]) + " has no label");
    local[v] = members[indicator[v]].size();
    members[indicator[v]].push_back(v);
  }
  std::vector<std::vector<Edge>> per_graph(n_graphs);
  for (auto [i, j] : edges) {
    if (indicator[i] != indicator[j])
      throw DatasetError(dir.string() + ": edge (" + std::to_string(i) + "," + std::to_string(j) + ") crosses graphs");
    per_graph[indicator[i]].emplace_back(local[i], local[j]);
  }
  c.graphs.resize(n_graphs);
  for (std::size_t gi = 0; gi < n_graphs; ++gi) {
    Graph& g = c.graphs[gi];
    if (members[gi].empty()) throw DatasetError(dir.string() + ": graph " + std::to_string(gi) + " is empty");
    g.adjacency = adjacency_from_edges(members[gi].size(), per_graph[gi]);
    g.features = Matrix(members[gi].size(), features.cols());
    for (std::size_t k = 0; k < members[gi].size(); ++k) {
      auto src = features.row(members[gi][k]);
      std::copy(src.begin(), src.end(), g.features.row(k).begin());
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DatasetError(dir.string() + ": " + e.what());
  }
  return c;
}

void save_node_dataset(const Graph& graph, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_output(dir / "edges.csv");
    write_edges(out, graph.adjacency, 0);
  }
  write_matrix_csv(graph.features, dir / "features.csv");
  if (!graph.labels.empty()) {
    auto out = open_output(dir / "labels.csv");
    for (int l : graph.labels) out << l << '\n';
  }
  if (graph.masks) {
    auto out = open_output(dir / "masks.csv");
    for (std::size_t i = 0; i < graph.num_nodes(); ++i)
      out << int(graph.masks->train[i]) << ',' << int(graph.masks->val[i]) << ',' << int(graph.masks->test[i]) << '\n';
  }
}

void save_graph_dataset(const GraphCollection& collection, const fs::path& dir) {
  fs::create_directories(dir);
  auto edges = open_output(dir / "edges.csv");
  auto feats = open_output(dir / "features.csv");
  auto ind = open_output(dir / "graph_indicator.csv");
  auto labels = open_output(dir / "labels.csv");
  std::size_t offset = 0;
  for (std::size_t gi = 0; gi < collection.size(); ++gi) {
    const Graph& g = collection.graphs[gi];
    write_edges(edges, g.adjacency, offset);
    for (std::size_t r = 0; r < g.num_nodes(); ++r) {
      for (std::size_t c = 0; c < g.features.cols(); ++c) {
        if (c) feats << ',';
        feats << format_double(g.features(r, c));
      }
      feats << '\n';
      ind << gi << '\n';
    }
    labels << collection.graph_labels[gi] << '\n';
    offset += g.num_nodes();
  }
}

}  // namespace vepm
