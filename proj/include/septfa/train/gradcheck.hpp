// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "septfa/core/rng.hpp"
#include "septfa/train/trainer.hpp"

namespace septfa {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<param>[<index>]"
};

/// Central differences on the joint loss against the taped gradient.
/// Checks up to `per_tensor` coordinates of every parameter tensor (all of
/// them when the tensor is smaller).
inline GradCheckResult check_model_gradients(Separator& model, const TrainingExample& ex, double lambda_vad,
                                             std::size_t per_tensor, std::uint64_t seed, double h = 1e-5,
                                             double floor = 1e-3) {
  auto& ps = model.params();
  nn::GradBuffer g = ps.zero_grads();
  evaluate_example(model, ex, lambda_vad, &g);
  auto loss = [&] { return evaluate_example(model, ex, lambda_vad, nullptr).report.total; };
  Rng rng(seed);
  GradCheckResult out;
  for (std::size_t i = 0; i < ps.count(); ++i) {
    auto& v = ps.values(static_cast<int>(i));
    std::vector<std::size_t> idx(v.size());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
    if (idx.size() > per_tensor) {
      shuffle(idx, rng);
      idx.resize(per_tensor);
    }
    for (std::size_t j : idx) {
      const double keep = v[j];
      v[j] = keep + h;
      const double up = loss();
      v[j] = keep - h;
      const double dn = loss();
      v[j] = keep;
      const double fd = (up - dn) / (2 * h);
      const double err = std::abs(fd - g[i][j]) / std::max({std::abs(fd), std::abs(g[i][j]), floor});
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = ps.entry(static_cast<int>(i)).name + "[" + std::to_string(j) + "]";
      }
    }
  }
  return out;
}

}  // namespace septfa
