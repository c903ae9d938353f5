#include "vepm/train/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vepm::train {

Importance parse_importance(std::string_view s) {
  if (s == "degree") return Importance::Degree;
  if (s == "uniform") return Importance::Uniform;
  throw std::invalid_argument("unknown sampler importance '" + std::string(s) + "'");
}

std::string_view to_string(Importance v) { return v == Importance::Degree ? "degree" : "uniform"; }

void SamplerConfig::validate() const {
  if (!(k_mix >= 0.0 && k_mix <= 1.0)) throw std::invalid_argument("sampler.k_mix must be in [0, 1]");
  if (!(alpha_sharp >= 0.0)) throw std::invalid_argument("sampler.alpha_sharp must be >= 0");
  if (enabled && n_sub < 2) throw std::invalid_argument("sampler.n_sub must be >= 2");
}

std::vector<double> sampling_probabilities(const std::vector<double>& importance, double k_mix, double alpha_sharp) {
  const std::size_t n = importance.size();
  if (n < 2) throw std::invalid_argument("sampling_probabilities: need at least two nodes");
  std::vector<double> q(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (importance[i] < 0.0) throw std::invalid_argument("sampling_probabilities: negative importance");
    // 0^0 is taken as 1 so alpha = 0 yields a uniform q even for isolated nodes.
    q[i] = alpha_sharp == 0.0 ? 1.0 : std::pow(importance[i], alpha_sharp);
    total += q[i];
  }
  if (total == 0.0) {
    std::fill(q.begin(), q.end(), 1.0);
    total = static_cast<double>(n);
  }
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] /= total;
    p[i] = k_mix * q[i] + (1.0 - k_mix) * (1.0 - q[i]) / static_cast<double>(n - 1);
  }
  return p;
}

SubgraphSample sample_subgraph(const std::vector<double>& probabilities, std::size_t n_sub, Rng& rng) {
  const std::size_t n = probabilities.size();
  SubgraphSample s;
  if (n_sub >= n) {
    s.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.nodes[i] = i;
    s.draws = s.nodes;
    return s;
  }
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) cdf[i] = acc += probabilities[i];
  for (std::size_t d = 0; d < n_sub; ++d) {
    const double u = rng.uniform() * acc;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    s.draws.push_back(std::min(i, n - 1));
  }
  s.nodes = s.draws;
  std::sort(s.nodes.begin(), s.nodes.end());
  s.nodes.erase(std::unique(s.nodes.begin(), s.nodes.end()), s.nodes.end());
  const double m = static_cast<double>(s.nodes.size());
  const double full = static_cast<double>(n);
  s.pair_ratio = m < 2 ? 0.0 : full * (full - 1.0) / (m * (m - 1.0));
  return s;
}

prob::PairSet restrict_pairs(const prob::PairSet& full, std::size_t num_nodes, const SubgraphSample& sample) {
  std::vector<std::uint8_t> in(num_nodes, 0);
  for (std::size_t v : sample.nodes) in.at(v) = 1;
  prob::PairSet out;
  for (std::size_t e = 0; e < full.src.size(); ++e)
    if (in[full.src[e]] && in[full.dst[e]]) {
      out.src.push_back(full.src[e]);
      out.dst.push_back(full.dst[e]);
    }
  // Non-edge closed form over sampled nodes only: keep each graph's segment
  // row but drop unsampled columns.
  std::vector<Triplet> seg;
  if (full.segments) {
    for (const auto& t : full.segments->triplets())
      if (in[t.col]) seg.push_back(t);
    out.segments = std::make_shared<SparseMatrix>(
        SparseMatrix::from_triplets(full.segments->n_rows(), num_nodes, std::move(seg)));
  } else {
    for (std::size_t v : sample.nodes) seg.push_back({0, v, 1.0});
    out.segments = std::make_shared<SparseMatrix>(SparseMatrix::from_triplets(1, num_nodes, std::move(seg)));
  }
  out.edge_scale = full.edge_scale * sample.pair_ratio;
  out.nonedge_scale = full.nonedge_scale * sample.pair_ratio;
  return out;
}

}  // namespace vepm::train
