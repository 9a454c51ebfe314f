// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/core/rng.hpp"
#include "septfa/nn/tensor.hpp"

namespace septfa::nn {

/// Per-parameter gradient arrays, index-aligned with a ParamStore.
using GradBuffer = std::vector<std::vector<double>>;

class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };

  int add(const std::string& name, Shape shape, double fill = 0.0) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    const int id = static_cast<int>(entries_.size());
    entries_.push_back({name, shape, std::vector<double>(shape.size(), fill)});
    grads_.emplace_back(shape.size(), 0.0);
    index_[name] = id;
    return id;
  }

  // uniform(+-1/sqrt(fan_in))
  int add_uniform(const std::string& name, Shape shape, int fan_in, Rng& rng) {
    const int id = add(name, shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : entries_[id].values) v = rng.uniform(-bound, bound);
    return id;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t count() const { return entries_.size(); }
  Entry& entry(int i) { return entries_[i]; }
  const Entry& entry(int i) const { return entries_[i]; }
  std::vector<double>& values(int i) { return entries_[i].values; }
  const std::vector<double>& values(int i) const { return entries_[i].values; }
  std::vector<double>& grad(int i) { return grads_[i]; }
  const std::vector<double>& grad(int i) const { return grads_[i]; }
  GradBuffer& grads() { return grads_; }
  const GradBuffer& grads() const { return grads_; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Total number of learnable scalars.
  std::size_t census() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.values.size();
    return n;
  }

  GradBuffer zero_grads() const {
    GradBuffer g;
    g.reserve(entries_.size());
    for (const auto& e : entries_) g.emplace_back(e.values.size(), 0.0);
    return g;
  }
  void clear_grads() {
    for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
  }

 private:
  std::vector<Entry> entries_;
  GradBuffer grads_;
  std::map<std::string, int> index_;
};

inline void accumulate(GradBuffer& into, const GradBuffer& from, double scale = 1.0) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    for (std::size_t j = 0; j < into[i].size(); ++j) into[i][j] += scale * from[i][j];
  }
}

inline double global_norm(const GradBuffer& g) {
  double s = 0.0;
  for (const auto& v : g) {
    for (double x : v) s += x * x;
  }
  return std::sqrt(s);
}

}  // namespace septfa::nn
