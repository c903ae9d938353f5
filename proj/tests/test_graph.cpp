#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vepm/graph/dataset_io.hpp"
#include "vepm/graph/graph.hpp"
#include "vepm/graph/kfold.hpp"
#include "vepm/graph/synthetic.hpp"

using namespace vepm;

namespace {

SparseMatrix graph_of(std::size_t n, std::vector<Edge> edges) { return adjacency_from_edges(n, edges); }

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vepm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(SparseMatrix, RejectsDuplicatesAndOutOfRange) {
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {0, 1, 2.0}}), std::invalid_argument);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::invalid_argument);
}

TEST(SparseMatrix, MultiplyMatchesDense) {
  auto s = SparseMatrix::from_triplets(2, 3, {{0, 2, 2.0}, {1, 0, -1.0}, {1, 1, 0.5}});
  Matrix d{{1, 2}, {3, 4}, {5, 6}};
  Matrix out = s.multiply(d);
  EXPECT_EQ(out, (Matrix{{10, 12}, {0.5, 0}}));
  EXPECT_EQ(s.transpose().transpose(), s);
}

TEST(Adjacency, SymmetrizesDeduplicatesAndDropsSelfLoops) {
  auto a = graph_of(3, {{0, 1}, {1, 0}, {1, 2}, {2, 2}, {1, 2}});
  EXPECT_TRUE(a.is_symmetric());
  EXPECT_TRUE(a.has_zero_diagonal());
  EXPECT_EQ(a.nnz(), 4u);
}

TEST(NormalizeAdjacency, TwoNodeEdge) {
  Matrix d = normalize_adjacency(graph_of(2, {{0, 1}})).to_dense();
  for (double v : d.data()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(NormalizeAdjacency, EdgelessIsIdentity) {
  EXPECT_EQ(normalize_adjacency(SparseMatrix(5, 5)).to_dense(), Matrix::identity(5));
}

TEST(NormalizeAdjacency, TriangleIsOneThird) {
  Matrix d = normalize_adjacency(graph_of(3, {{0, 1}, {1, 2}, {0, 2}})).to_dense();
  for (double v : d.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(NormalizeAdjacency, RejectsAsymmetric) {
  EXPECT_THROW(normalize_adjacency(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}})), std::invalid_argument);
}

TEST(NormalizeAdjacency, SymmetricWithEntriesInUnitInterval) {
  auto [g, planted] = sample_epm_graph(60, 3, 1.0, 1.0, {0.3, 0.3, 0.3}, 5);
  const SparseMatrix n = normalize_adjacency(g.adjacency);
  EXPECT_TRUE(n.is_symmetric(1e-12));
  for (double v : n.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (std::size_t i = 0; i < n.n_rows(); ++i) EXPECT_GT(n.at(i, i), 0.0);
}

TEST(NormalizeAdjacency, RegularGraphRowsSumToOne) {
  // Cycle: every neighborhood has the same degree.
  std::vector<Edge> e;
  for (std::size_t i = 0; i < 6; ++i) e.push_back({i, (i + 1) % 6});
  const SparseMatrix n = normalize_adjacency(graph_of(6, e));
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (double v : n.row_values(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(DegreeVector, Examples) {
  EXPECT_EQ(degree_vector(graph_of(3, {{0, 1}, {1, 2}})), (std::vector<std::size_t>{1, 2, 1}));
  EXPECT_EQ(degree_vector(SparseMatrix(4, 4)), (std::vector<std::size_t>(4, 0)));
  EXPECT_EQ(degree_vector(graph_of(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}})),
            (std::vector<std::size_t>(4, 3)));
}

TEST(SampleEpmGraph, RejectsInvalidHyperparameters) {
  EXPECT_THROW(sample_epm_graph(10, 2, 1.0, 1.0, {0.0, 0.0}, 1), std::invalid_argument);
  EXPECT_THROW(sample_epm_graph(10, 2, 1.0, 1.0, {1.0}, 1), std::invalid_argument);
  EXPECT_THROW(sample_epm_graph(10, 2, -1.0, 1.0, {1.0, 1.0}, 1), std::invalid_argument);
  EXPECT_THROW(sample_epm_graph(1, 2, 1.0, 1.0, {1.0, 1.0}, 1), std::invalid_argument);
}

TEST(SampleEpmGraph, ZeroAffiliationsGiveNoEdges) {
  Rng rng(3);
  EXPECT_EQ(sample_epm_edges(Matrix(20, 3), {1.0, 1.0, 1.0}, rng).nnz(), 0u);
}

TEST(SampleEpmGraph, EdgeProbabilityOfLogTwoIsHalf) { EXPECT_NEAR(edge_probability(std::log(2.0)), 0.5, 1e-15); }

TEST(SampleEpmGraph, EdgeFrequencyMatchesLink) {
  // Fixed Z injected, 10,000 resampled graphs, each pair within 3 standard errors.
  Matrix z{{0.2, 1.0}, {0.8, 0.1}, {1.5, 0.0}, {0.0, 0.3}, {0.6, 0.6}};
  const std::vector<double> gamma{0.7, 1.3};
  const std::size_t n = z.rows(), reps = 10000;
  Matrix counts(n, n);
  Rng rng(11);
  for (std::size_t r = 0; r < reps; ++r) {
    const SparseMatrix a = sample_epm_edges(z, gamma, rng);
    for (const auto& [i, j] : undirected_edges(a)) counts(i, j) += 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double rate = 0.0;
      for (std::size_t c = 0; c < 2; ++c) rate += gamma[c] * z(i, c) * z(j, c);
      const double p = 1.0 - std::exp(-rate);
      const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / reps);
      EXPECT_LE(std::abs(counts(i, j) / reps - p), 3.0 * se + 1e-12) << i << "," << j;
    }
}

TEST(SampleEpmGraph, ReproducibleAndWellFormed) {
  auto a = sample_epm_graph(50, 3, 1.0, 1.0, {0.2, 0.2, 0.2}, 9);
  auto b = sample_epm_graph(50, 3, 1.0, 1.0, {0.2, 0.2, 0.2}, 9);
  EXPECT_EQ(a.first.adjacency, b.first.adjacency);
  EXPECT_EQ(a.second.z_true, b.second.z_true);
  EXPECT_TRUE(a.first.adjacency.has_zero_diagonal());
  EXPECT_EQ(a.first.features, one_hot_features(50));
  for (double v : a.second.z_true.data()) EXPECT_GE(v, 0.0);
  EXPECT_NO_THROW(a.first.validate());
}

TEST(DatasetIo, NodeRoundTrip) {
  auto [g, planted] = sample_epm_graph(40, 2, 1.0, 1.0, {0.4, 0.4}, 2);
  g.features(3, 1) = 0.123456789012345678;
  const auto dir = temp_dir("node_rt");
  save_node_dataset(g, dir);
  const Graph h = load_node_dataset(dir);
  EXPECT_EQ(h.adjacency, g.adjacency);
  EXPECT_EQ(h.labels, g.labels);
  ASSERT_TRUE(h.masks.has_value());
  EXPECT_EQ(h.masks->train, g.masks->train);
  ASSERT_TRUE(h.features.same_shape(g.features));
  for (std::size_t i = 0; i < g.features.size(); ++i) EXPECT_NEAR(h.features[i], g.features[i], 1e-12);
}

TEST(DatasetIo, GraphRoundTrip) {
  GraphCollection col;
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto [g, p] = sample_epm_graph(6 + s, 2, 1.0, 1.0, {0.5, 0.5}, s);
    g.labels.clear();
    g.masks.reset();
    g.features = Matrix(g.num_nodes(), 3);
    for (std::size_t r = 0; r < g.num_nodes(); ++r) g.features(r, r % 3) = 0.25 * static_cast<double>(s + 1);
    col.graphs.push_back(g);
    col.graph_labels.push_back(static_cast<int>(s % 2));
  }
  const auto dir = temp_dir("graph_rt");
  save_graph_dataset(col, dir);
  const GraphCollection back = load_graph_dataset(dir);
  ASSERT_EQ(back.size(), col.size());
  EXPECT_EQ(back.graph_labels, col.graph_labels);
  for (std::size_t i = 0; i < col.size(); ++i) {
    EXPECT_EQ(back.graphs[i].adjacency, col.graphs[i].adjacency);
    EXPECT_EQ(back.graphs[i].features, col.graphs[i].features);
  }
}

TEST(DatasetIo, DirectedEdgesAreSymmetrized) {
  const auto dir = temp_dir("directed");
  std::ofstream(dir / "edges.csv") << "0,1\n1,2\n2,1\n";
  std::ofstream(dir / "features.csv") << "1,0\n0,1\n1,1\n";
  std::ofstream(dir / "labels.csv") << "0\n1\n0\n";
  const Graph g = load_node_dataset(dir);
  EXPECT_TRUE(g.adjacency.is_symmetric());
  EXPECT_EQ(g.adjacency.nnz(), 4u);
  EXPECT_FALSE(g.masks.has_value());
}

TEST(DatasetIo, FeatureRowMismatchIsAnError) {
  const auto dir = temp_dir("mismatch");
  std::ofstream(dir / "edges.csv") << "0,1\n1,3\n";
  std::ofstream(dir / "features.csv") << "1\n0\n1\n";
  std::ofstream(dir / "labels.csv") << "0\n1\n0\n";
  EXPECT_THROW(load_node_dataset(dir), DatasetError);
}

TEST(DatasetIo, MissingDirectoryIsAnError) {
  EXPECT_THROW(load_node_dataset("/nonexistent/vepm/dataset"), DatasetError);
}

TEST(KFold, SizesAndCoverage) {
  auto f10 = kfold_split(10, 10, 1);
  for (const auto& f : f10) EXPECT_EQ(f.test.size(), 1u);
  auto f11 = kfold_split(11, 10, 1);
  std::size_t twos = 0, ones = 0;
  std::vector<int> seen(11, 0);
  for (const auto& f : f11) {
    (f.test.size() == 2 ? twos : ones) += 1;
    EXPECT_EQ(f.train.size() + f.test.size(), 11u);
    for (std::size_t i : f.test) ++seen[i];
  }
  EXPECT_EQ(twos, 1u);
  EXPECT_EQ(ones, 9u);
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(kfold_split(3, 4, 1), std::invalid_argument);
}

TEST(KFold, Deterministic) {
  auto a = kfold_split(50, 5, 7), b = kfold_split(50, 5, 7);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].test, b[i].test);
}

TEST(KFold, StratifiedKeepsProportions) {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i < 70 ? 0 : 1);
  for (const auto& f : stratified_kfold_split(labels, 10, 3)) {
    int ones = 0;
    for (std::size_t i : f.test) ones += labels[i];
    EXPECT_EQ(f.test.size(), 10u);
    EXPECT_EQ(ones, 3);
  }
}

TEST(Subgraph, InducedAndUnion) {
  auto [g, p] = sample_epm_graph(12, 2, 1.0, 1.0, {1.0, 1.0}, 4);
  Graph sub = induced_subgraph(g, {1, 3, 5});
  EXPECT_EQ(sub.num_nodes(), 3u);
  EXPECT_EQ(sub.adjacency.at(0, 1), g.adjacency.at(1, 3));
  Graph u = disjoint_union({&sub, &sub});
  EXPECT_EQ(u.num_nodes(), 6u);
  EXPECT_EQ(u.adjacency.nnz(), 2 * sub.adjacency.nnz());
  EXPECT_EQ(u.adjacency.at(0, 3), 0.0);
}
