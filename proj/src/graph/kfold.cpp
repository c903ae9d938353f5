#include "vepm/graph/kfold.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "vepm/core/rng.hpp"

namespace vepm {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

// Position p of `order` goes to fold p % folds.
std::vector<Fold> deal(const std::vector<std::size_t>& order, std::size_t n_items, std::size_t folds) {
  std::vector<std::size_t> fold_of(n_items);
  for (std::size_t p = 0; p < order.size(); ++p) fold_of[order[p]] = p % folds;
  std::vector<Fold> out(folds);
  for (std::size_t i = 0; i < n_items; ++i)
    for (std::size_t f = 0; f < folds; ++f) (fold_of[i] == f ? out[f].test : out[f].train).push_back(i);
  return out;
}

void check(std::size_t n_items, std::size_t folds) {
  if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
  if (folds > n_items)
    throw std::invalid_argument("kfold_split: folds (" + std::to_string(folds) + ") > items (" +
                                std::to_string(n_items) + ")");
}

}  // namespace

std::vector<Fold> kfold_split(std::size_t n_items, std::size_t folds, std::uint64_t seed) {
  check(n_items, folds);
  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "kfold"));
  shuffle(order, rng);
  return deal(order, n_items, folds);
}

std::vector<Fold> stratified_kfold_split(const std::vector<int>& labels, std::size_t folds, std::uint64_t seed) {
  check(labels.size(), folds);
  int n_classes = 0;
  for (int l : labels) n_classes = std::max(n_classes, l + 1);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  Rng rng(derive_seed(seed, "kfold-stratified"));
  std::vector<std::size_t> order;
  order.reserve(labels.size());
  for (auto& members : by_class) {
    shuffle(members, rng);
    order.insert(order.end(), members.begin(), members.end());
  }
  return deal(order, labels.size(), folds);
}

}  // namespace vepm
