#pragma once

#include <cstdint>
#include <vector>

namespace vepm {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Shuffled k-fold partition of 0..n_items-1. Fold sizes differ by at most
/// one; deterministic in `seed`. Throws std::invalid_argument unless
/// 2 <= folds <= n_items.
std::vector<Fold> kfold_split(std::size_t n_items, std::size_t folds, std::uint64_t seed);

/// Like kfold_split but keeps class proportions per fold where possible.
std::vector<Fold> stratified_kfold_split(const std::vector<int>& labels, std::size_t folds, std::uint64_t seed);

}  // namespace vepm
