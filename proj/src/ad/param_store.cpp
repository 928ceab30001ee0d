#include "pattformer/ad/param_store.hpp"

#include <cmath>

#include "pattformer/ad/modules.hpp"
#include "pattformer/common/errors.hpp"

namespace pattformer::ad {

Var ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw InputError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, Var(std::move(value), true));
  return entries_.back().second;
}

void ParamStore::share(const std::string& name, const Var& v) {
  if (contains(name)) throw InputError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, v);
}

const Var& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Var& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += v.value().size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : entries_) v.zero_grad();
}

Tensor& BufferStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw InputError("duplicate buffer name '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.back();
}

Tensor& BufferStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown buffer '" + name + "'");
  return values_[it->second];
}

const Tensor& BufferStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown buffer '" + name + "'");
  return values_[it->second];
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

ParamStore init_params(const std::vector<ParamSpec>& specs, std::mt19937_64& rng) {
  ParamStore store;
  for (const ParamSpec& spec : specs) add_param(store, spec, rng);
  return store;
}

}  // namespace pattformer::ad
