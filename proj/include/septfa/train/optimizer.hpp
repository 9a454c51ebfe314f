// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/nn/param_store.hpp"

namespace septfa {

inline constexpr double kDefaultClipNorm = 5.0;

/// Global-norm clipping. Returns the norm before clipping.
inline double clip_gradients(nn::GradBuffer& grads, double max_norm = kDefaultClipNorm,
                             const nn::ParamStore* names = nullptr) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      if (!std::isfinite(grads[i][j])) {
        const std::string who = names ? names->entry(static_cast<int>(i)).name : "#" + std::to_string(i);
        throw NumericError("non-finite gradient in parameter " + who + " at element " + std::to_string(j));
      }
    }
  }
  const double norm = nn::global_norm(grads);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (double& x : g) x *= s;
    }
  }
  return norm;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = kDefaultClipNorm;
};

struct OptimizerState {
  long step = 0;
  nn::GradBuffer m;
  nn::GradBuffer v;
};

class Adam {
 public:
  explicit Adam(const nn::ParamStore& ps, AdamConfig cfg = {}) : cfg_(cfg) {
    state_.m = ps.zero_grads();
    state_.v = ps.zero_grads();
  }

  const AdamConfig& config() const { return cfg_; }
  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }

  void step(nn::ParamStore& ps, const nn::GradBuffer& grads) {
    ++state_.step;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto& w = ps.values(static_cast<int>(i));
      auto& m = state_.m[i];
      auto& v = state_.v[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double g = grads[i][j];
        m[j] = b1 * m[j] + (1.0 - b1) * g;
        v[j] = b2 * v[j] + (1.0 - b2) * g * g;
        w[j] -= cfg_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.epsilon);
      }
    }
  }

 private:
  AdamConfig cfg_;
  OptimizerState state_;
};

}  // namespace septfa
