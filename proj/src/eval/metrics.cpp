#include "vepm/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace vepm::eval {

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.cols(); ++j)
      if (m(i, j) > m(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Matrix& probabilities, const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw std::invalid_argument("accuracy: empty evaluation mask");
  if (labels.size() != probabilities.rows()) throw std::invalid_argument("accuracy: label count differs from rows");
  const std::vector<int> pred = argmax_rows(probabilities);
  std::size_t hit = 0;
  for (std::size_t r : rows) hit += pred.at(r) == labels[r];
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("nmi: length mismatch");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    joint[{a[i], b[i]}] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& c) {
    double h = 0.0;
    for (const auto& [k, v] : c) h -= v / n * std::log(v / n);
    return h;
  };
  const double ha = entropy(ca), hb = entropy(cb);
  if (ca.size() < 2 || cb.size() < 2) return 0.0;
  double mi = 0.0;
  for (const auto& [k, v] : joint) mi += v / n * std::log(v * n / (ca[k.first] * cb[k.second]));
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

Matrix community_interactions(const Matrix& z, const std::vector<double>& gamma, std::size_t blocks) {
  if (blocks == 0 || z.cols() % blocks != 0)
    throw std::invalid_argument("community_interactions: columns not divisible into blocks");
  if (gamma.size() != z.cols()) throw std::invalid_argument("community_interactions: gamma length mismatch");
  const std::size_t width = z.cols() / blocks;
  std::vector<double> colsum(z.cols(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t c = 0; c < z.cols(); ++c) colsum[c] += z(i, c);
  Matrix mu(z.rows(), blocks);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t c = 0; c < z.cols(); ++c) mu(i, c / width) += gamma[c] * z(i, c) * colsum[c];
  return mu;
}

std::vector<int> hard_assign_communities(const Matrix& z, const std::vector<double>& gamma, std::size_t blocks) {
  return argmax_rows(community_interactions(z, gamma, blocks));
}

std::vector<std::size_t> node_ordering(const Matrix& mu) {
  const std::vector<int> owner = argmax_rows(mu);
  std::vector<std::vector<std::size_t>> groups(mu.cols());
  for (std::size_t u = 0; u < owner.size(); ++u) groups[static_cast<std::size_t>(owner[u])].push_back(u);
  std::vector<std::size_t> order_groups(mu.cols());
  std::iota(order_groups.begin(), order_groups.end(), 0);
  std::stable_sort(order_groups.begin(), order_groups.end(),
                   [&](std::size_t x, std::size_t y) { return groups[x].size() > groups[y].size(); });
  std::vector<std::size_t> out;
  for (std::size_t k : order_groups) {
    auto& g = groups[k];
    std::stable_sort(g.begin(), g.end(), [&](std::size_t x, std::size_t y) { return mu(x, k) > mu(y, k); });
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return r;
}

}  // namespace vepm::eval
