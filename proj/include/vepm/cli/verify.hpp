#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vepm::cli {

struct CheckLine {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string measured;
};

/// Runs one of gradcheck, kl, sampler, partition or all. Throws ConfigError
/// for an unknown suite name; failing checks are reported, not thrown.
std::vector<CheckLine> run_verify_suite(std::string_view suite, std::uint64_t seed);

/// Max relative finite-difference error of each differentiable primitive on
/// random inputs (64-bit, eps = 1e-5).
std::vector<std::pair<std::string, double>> primitive_gradient_errors(std::uint64_t seed);

/// Max relative error of the full ELBO gradient on a 30-node synthetic graph
/// over `samples` random coordinates of all parameters.
double elbo_gradient_error(std::uint64_t seed, std::size_t samples = 200);

}  // namespace vepm::cli
