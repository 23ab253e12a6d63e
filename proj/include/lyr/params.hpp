#pragma once

#include <functional>
#include <map>
#include <string>

#include "lyr/tensor.hpp"

namespace lyr {

/// Owns every learnable tensor, keyed by a stable parameter id.
/// Iteration order is lexicographic, which keeps optimizer updates,
/// checkpoints and metrics deterministic.
class ParamStore {
 public:
  /// Insert-if-absent; the initializer runs only on first use.
  Tensor& ensure(const std::string& name, const std::function<Tensor()>& init) {
    auto it = values_.find(name);
    if (it == values_.end()) it = values_.emplace(name, init()).first;
    return it->second;
  }

  bool has(const std::string& name) const { return values_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("params: unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("params: unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Tensor>& all() { return values_; }
  const std::map<std::string, Tensor>& all() const { return values_; }
  std::size_t count() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

 private:
  std::map<std::string, Tensor> values_;
};

}  // namespace lyr
