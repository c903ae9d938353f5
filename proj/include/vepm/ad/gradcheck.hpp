#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vepm/ad/parameter_store.hpp"
#include "vepm/ad/tape.hpp"

namespace vepm::ad {

/// Builds a scalar loss on a fresh tape from the current store values. Must be
/// deterministic: any sampling has to use fixed, injected noise.
using LossBuilder = std::function<Var(Tape&, const ParameterStore&)>;

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  /// Restrict coordinates to these parameters; empty means all.
  std::vector<std::string> params;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_fd = 0.0;
  double worst_ad = 0.0;
};

/// Compares central differences against reverse-mode gradients on randomly
/// chosen coordinates (all of them when `samples` covers the total). The
/// error per coordinate is |fd - ad| / max(1e-8, |fd| + |ad|). Throws
/// std::runtime_error if two baseline evaluations differ. Store values are
/// restored and gradients zeroed on return.
GradCheckResult finite_difference_check(const LossBuilder& build, ParameterStore& store,
                                        const GradCheckOptions& options = {});

}  // namespace vepm::ad
