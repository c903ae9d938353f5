#include "vepm/ad/parameter_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vepm::ad {

std::string_view group_name(ParamGroup g) { return g == ParamGroup::Inference ? "inference" : "generative"; }

ParamGroup parse_group(std::string_view s) {
  if (s == "inference") return ParamGroup::Inference;
  if (s == "generative") return ParamGroup::Generative;
  throw std::invalid_argument("unknown parameter group '" + std::string(s) + "'");
}

void ParameterStore::add(const std::string& name, ParamGroup group, Tensor init) {
  if (contains(name)) throw std::invalid_argument("ParameterStore: duplicate parameter '" + name + "'");
  Tensor grad(init.rows(), init.cols());
  index_.emplace(name, entries_.size());
  entries_.push_back({name, group, std::move(init), std::move(grad)});
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParameterStore: no parameter '" + name + "'");
  return entries_[it->second];
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParameterStore: no parameter '" + name + "'");
  return entries_[it->second];
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<std::string> ParameterStore::names(ParamGroup group) const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.group == group) out.push_back(e.name);
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

Checkpoint Checkpoint::from_store(const ParameterStore& store) {
  Checkpoint c;
  for (const auto& e : store.entries()) c.tensors.push_back({e.name, std::string(group_name(e.group)), e.value});
  return c;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.value;
  return nullptr;
}

void Checkpoint::restore(ParameterStore& store) const {
  for (auto& e : store.entries()) {
    const Tensor_* found = nullptr;
    for (const auto& t : tensors)
      if (t.name == e.name) found = &t;
    if (!found) throw std::runtime_error("checkpoint is missing parameter '" + e.name + "'");
    if (!found->value.same_shape(e.value))
      throw std::runtime_error("checkpoint shape mismatch for '" + e.name + "': " + found->value.shape_string() +
                               " vs " + e.value.shape_string());
    if (found->group != group_name(e.group))
      throw std::runtime_error("checkpoint group mismatch for '" + e.name + "'");
    e.value = found->value;
  }
}

namespace {

constexpr std::string_view kMagic = "VEPM-CHECKPOINT 1";

void put_le(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("checkpoint payload truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + file.string());
  out << kMagic << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw std::invalid_argument("checkpoint meta key/value contains whitespace: " + k);
    out << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& t : ckpt.tensors)
    out << "tensor " << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << ' ' << t.group << '\n';
  out << "data\n";
  for (const auto& t : ckpt.tensors)
    for (double v : t.value.data()) put_le(out, v);
  if (!out) throw std::runtime_error("failed writing checkpoint " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw std::runtime_error(file.string() + " is not a VEPM checkpoint");
  Checkpoint c;
  while (std::getline(in, line)) {
    if (line == "data") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      c.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name, group;
      std::size_t rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols >> group)) throw std::runtime_error("malformed checkpoint header: " + line);
      c.tensors.push_back({name, group, Tensor(rows, cols)});
    } else {
      throw std::runtime_error("malformed checkpoint header: " + line);
    }
  }
  if (line != "data") throw std::runtime_error("checkpoint header not terminated");
  for (auto& t : c.tensors)
    for (double& v : t.value.data()) v = get_le(in);
  return c;
}

}  // namespace vepm::ad
