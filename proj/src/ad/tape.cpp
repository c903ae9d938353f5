#include "vepm/ad/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vepm/ad/parameter_store.hpp"

namespace vepm::ad {

void Tape::check_finite(const Tensor& t, std::string_view op) const {
  for (double v : t.data())
    if (!std::isfinite(v)) throw std::domain_error("non-finite value produced by '" + std::string(op) + "'");
}

Var Tape::constant(Tensor value) {
  if (options_.check_finite) check_finite(value, "constant");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(const ParameterStore& store, const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return {this, it->second};
  const auto& e = store.entry(name);
  if (options_.check_finite) check_finite(e.value, "parameter");
  Node n;
  n.op = "parameter";
  n.value = e.value;
  n.param = name;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(std::string_view op, std::initializer_list<Var> inputs, Tensor value, BackwardFn fn) {
  return record(op, std::vector<Var>(inputs), std::move(value), std::move(fn));
}

Var Tape::record(std::string_view op, const std::vector<Var>& inputs, Tensor value, BackwardFn fn) {
  if (options_.check_finite) check_finite(value, op);
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw std::invalid_argument("Tape::record: input from another tape");
    n.inputs.push_back(v.id());
    n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.data().empty() && !n.value.data().empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::run_backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("Tape::backward: loss from another tape");
  if (nodes_[loss.id()].value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + nodes_[loss.id()].value.shape_string());
  for (auto& n : nodes_) n.grad = Tensor();
  grad(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.backward || n.grad.data().empty()) continue;
    n.backward(*this, id);
  }
}

void Tape::backward(Var loss) { run_backward(loss); }

void Tape::backward(Var loss, ParameterStore& store) {
  run_backward(loss);
  for (const auto& [name, id] : param_nodes_) {
    (void)name;
    const Node& n = nodes_[id];
    if (n.grad.data().empty()) continue;
    Tensor& g = store.grad(n.param);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

}  // namespace vepm::ad
