#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vepm/core/matrix.hpp"

namespace vepm::eval {

/// Row argmax with ties going to the lowest column.
std::vector<int> argmax_rows(const Matrix& m);

/// Fraction of `rows` whose argmax matches the label. Throws on empty rows.
double accuracy(const Matrix& probabilities, const std::vector<int>& labels, const std::vector<std::size_t>& rows);

/// Mutual information normalized by the arithmetic mean of both entropies.
/// Returns 0 when either side has a single cluster.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

/// mu(u, k) = sum_{c in block k} gamma_c Z_uc sum_v Z_vc: the total
/// interaction node u engages in under metacommunity k.
Matrix community_interactions(const Matrix& z, const std::vector<double>& gamma, std::size_t blocks);

/// argmax_k mu(u, k), ties to the lowest k.
std::vector<int> hard_assign_communities(const Matrix& z, const std::vector<double>& gamma, std::size_t blocks);

/// Nodes grouped by their argmax block, groups ordered by size (descending,
/// ties by block index), nodes inside a group by descending mu (ties by id).
std::vector<std::size_t> node_ordering(const Matrix& mu);

struct MeanStderr {
  double mean = 0.0;
  std::optional<double> std_error;  // sample sd / sqrt(n); absent for n < 2
};
MeanStderr mean_stderr(const std::vector<double>& values);

}  // namespace vepm::eval
