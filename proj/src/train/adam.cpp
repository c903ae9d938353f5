#include "vepm/train/adam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vepm::train {

void Adam::step(ad::ParameterStore& store, const std::vector<std::string>& names, double lr, double weight_decay,
                const std::vector<std::string>& decayed) {
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (const auto& name : names) {
    auto& e = store.entry(name);
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      it = moments_.emplace(name, std::make_pair(ad::Tensor(e.value.rows(), e.value.cols()),
                                                 ad::Tensor(e.value.rows(), e.value.cols())))
               .first;
      order_.push_back(name);
    }
    auto& [m, v] = it->second;
    const bool decay = weight_decay != 0.0 && std::find(decayed.begin(), decayed.end(), name) != decayed.end();
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i] + (decay ? weight_decay * e.value[i] : 0.0);
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      e.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

void Adam::save(ad::Checkpoint& ckpt) const {
  const std::string group = "adam:" + tag_;
  ckpt.meta[group + ".steps"] = std::to_string(step_);
  for (const auto& name : order_) {
    const auto& [m, v] = moments_.at(name);
    ckpt.tensors.push_back({group + ".m." + name, group, m});
    ckpt.tensors.push_back({group + ".v." + name, group, v});
  }
}

void Adam::load(const ad::Checkpoint& ckpt) {
  const std::string group = "adam:" + tag_;
  moments_.clear();
  order_.clear();
  step_ = 0;
  if (auto it = ckpt.meta.find(group + ".steps"); it != ckpt.meta.end()) step_ = std::stoull(it->second);
  const std::string mprefix = group + ".m.";
  for (const auto& t : ckpt.tensors) {
    if (t.group != group || t.name.rfind(mprefix, 0) != 0) continue;
    const std::string name = t.name.substr(mprefix.size());
    const ad::Tensor* v = ckpt.find(group + ".v." + name);
    if (!v) throw std::runtime_error("checkpoint has first but not second moment for '" + name + "'");
    moments_.emplace(name, std::make_pair(t.value, *v));
    order_.push_back(name);
  }
}

}  // namespace vepm::train
