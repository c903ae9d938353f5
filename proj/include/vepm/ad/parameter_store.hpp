#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "vepm/ad/tape.hpp"

namespace vepm::ad {

/// Inference-side (encoder, phi) or generative-side (theta) parameters.
enum class ParamGroup { Inference, Generative };

std::string_view group_name(ParamGroup g);
ParamGroup parse_group(std::string_view s);

/// Named trainable tensors with gradient buffers, kept in insertion order.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ParamGroup group;
    Tensor value;
    Tensor grad;
  };

  /// Throws std::invalid_argument if `name` already exists.
  void add(const std::string& name, ParamGroup group, Tensor init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }
  const Tensor& grad(const std::string& name) const { return entry(name).grad; }

  std::vector<std::string> names() const;
  std::vector<std::string> names(ParamGroup group) const;
  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  void zero_grad();
  std::size_t total_size() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// On-disk checkpoint: text header (one line per tensor: name rows cols
/// group) followed by raw little-endian float64 payload in header order.
struct Checkpoint {
  struct Tensor_ {
    std::string name;
    std::string group;  // "inference", "generative" or an optimizer tag
    Tensor value;
  };
  std::map<std::string, std::string> meta;
  std::vector<Tensor_> tensors;

  static Checkpoint from_store(const ParameterStore& store);
  /// Copies matching parameter tensors into `store`; throws on shape or
  /// group mismatch and on parameters missing from the checkpoint.
  void restore(ParameterStore& store) const;
  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace vepm::ad
