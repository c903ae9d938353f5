#include "vepm/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "vepm/core/rng.hpp"

namespace vepm::ad {

namespace {

double evaluate(const LossBuilder& build, const ParameterStore& store) {
  Tape tape;
  return build(tape, store).value().item();
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& build, ParameterStore& store,
                                        const GradCheckOptions& options) {
  std::vector<std::string> names = options.params.empty() ? store.names() : options.params;
  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& n : names)
    for (std::size_t i = 0; i < store.value(n).size(); ++i) coords.emplace_back(n, i);
  if (coords.empty()) throw std::invalid_argument("finite_difference_check: no parameters to check");

  if (options.samples < coords.size()) {
    Rng rng(derive_seed(options.seed, "gradcheck"));
    for (std::size_t i = 0; i < options.samples; ++i) std::swap(coords[i], coords[i + rng.index(coords.size() - i)]);
    coords.resize(options.samples);
  }

  store.zero_grad();
  const double base = [&] {
    Tape tape;
    Var loss = build(tape, store);
    tape.backward(loss, store);
    return loss.value().item();
  }();
  if (evaluate(build, store) != base)
    throw std::runtime_error("finite_difference_check: loss builder is not deterministic");

  GradCheckResult result;
  result.coordinates = coords.size();
  for (const auto& [name, idx] : coords) {
    double& x = store.value(name)[idx];
    const double saved = x;
    x = saved + options.eps;
    const double fp = evaluate(build, store);
    x = saved - options.eps;
    const double fm = evaluate(build, store);
    x = saved;
    const double fd = (fp - fm) / (2.0 * options.eps);
    const double ad = store.grad(name)[idx];
    const double err = std::abs(fd - ad) / std::max(1e-8, std::abs(fd) + std::abs(ad));
    if (err > result.max_rel_error || result.worst_param.empty()) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_param = name;
      result.worst_index = idx;
      result.worst_fd = fd;
      result.worst_ad = ad;
    }
  }
  store.zero_grad();
  return result;
}

}  // namespace vepm::ad
