#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "pattformer/ad/var.hpp"

namespace pattformer::ad {

/// Named learnable arrays, iterated in insertion order.
class ParamStore {
 public:
  /// Registers a new parameter; names must be unique.
  Var add(const std::string& name, Tensor value);
  /// Registers an existing variable under `name` (views over another store).
  void share(const std::string& name, const Var& v);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Var& at(const std::string& name) const;
  Var& at(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Var>>& entries() { return entries_; }

  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Named non-learnable state (batch-norm running statistics). References
/// returned by add()/at() stay valid for the store's lifetime.
class BufferStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::deque<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Init { kGlorotUniform, kZeros, kOnes };

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  Init init = Init::kGlorotUniform;
};

/// Glorot bound sqrt(6 / (fan_in + fan_out)) for a rank-2 weight shape.
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

/// Materializes specs in order. Weights ~ U(-s, s) with the Glorot bound,
/// biases zero. Same seed, same store, bit for bit.
ParamStore init_params(const std::vector<ParamSpec>& specs, std::mt19937_64& rng);

}  // namespace pattformer::ad
