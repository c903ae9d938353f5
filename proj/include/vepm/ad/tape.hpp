#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vepm/core/matrix.hpp"

namespace vepm::ad {

using Tensor = Matrix;

class ParameterStore;
class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const noexcept { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording. Nodes are appended in evaluation order, so the
/// node list is acyclic by construction and backward walks it in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    std::string_view op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;  // empty until something flows into it
    BackwardFn backward;
    std::string param;  // bound parameter name, leaves only
    bool needs_grad = false;
  };

  struct Options {
    // Reject NaN/inf in every recorded value (test mode).
    bool check_finite = false;
  };

  Tape() = default;
  explicit Tape(Options options) : options_(options) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a store entry. Repeated calls with one name share a node.
  Var parameter(const ParameterStore& store, const std::string& name);

  /// Appends an op node. `fn` reads grad(self) and accumulates into its inputs.
  Var record(std::string_view op, std::initializer_list<Var> inputs, Tensor value, BackwardFn fn);
  Var record(std::string_view op, const std::vector<Var>& inputs, Tensor value, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient accumulator of node `id`, zero-initialized on first access.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.data().empty(); }

  /// Computes d loss / d node for every node and adds parameter gradients
  /// into `store`. Throws ShapeError for non-scalar loss. Calling it again
  /// adds the same gradients a second time.
  void backward(Var loss, ParameterStore& store);
  /// Same traversal without a store, for inspecting node gradients.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  const Options& options() const noexcept { return options_; }

 private:
  void check_finite(const Tensor& t, std::string_view op) const;
  void run_backward(Var loss);

  Options options_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace vepm::ad
