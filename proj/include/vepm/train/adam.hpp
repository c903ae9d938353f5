#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "vepm/ad/parameter_store.hpp"

namespace vepm::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed subset of a store's parameters. Moments
/// are created lazily on the first step that touches a parameter.
class Adam {
 public:
  explicit Adam(std::string tag, AdamConfig config = {}) : tag_(std::move(tag)), config_(config) {}

  /// One update of `names` using their current gradients. `weight_decay`
  /// adds decay * value to the gradient of every name listed in `decayed`.
  void step(ad::ParameterStore& store, const std::vector<std::string>& names, double lr, double weight_decay = 0.0,
            const std::vector<std::string>& decayed = {});

  std::uint64_t steps() const noexcept { return step_; }
  const std::string& tag() const noexcept { return tag_; }

  /// Moments and step counter stored next to the parameters in a checkpoint,
  /// under group "adam:<tag>".
  void save(ad::Checkpoint& ckpt) const;
  void load(const ad::Checkpoint& ckpt);

 private:
  std::string tag_;
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::unordered_map<std::string, std::pair<ad::Tensor, ad::Tensor>> moments_;
  std::vector<std::string> order_;
};

}  // namespace vepm::train
