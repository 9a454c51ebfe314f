// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "septfa/nn/kernels.hpp"
#include "septfa/separator/spectral_ops.hpp"
#include "septfa/signal/stft.hpp"
#include "test_util.hpp"

namespace septfa::test {

using namespace septfa::nn;

// Builds a scalar loss sum(r .* f(inputs)) with a fixed random projection r,
// then compares analytic and central-difference gradients for every input.
using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double max_gradient_error(const std::vector<Tensor3>& inputs, const GraphFn& f, std::uint64_t seed,
                          double h = 1e-4) {
  ParamStore ps;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const int id = ps.add("in" + std::to_string(i), inputs[i].shape);
    ps.values(id) = inputs[i].data;
  }
  Tensor3 proj;
  auto eval = [&](GradBuffer* sink) {
    Tape t;
    std::vector<Var> vs;
    for (std::size_t i = 0; i < inputs.size(); ++i) vs.push_back(t.parameter(ps, static_cast<int>(i)));
    Var y = f(t, vs);
    if (proj.size() != y.value().size()) {
      Rng r(seed);
      proj = random_tensor(y.value().shape, r);
    }
    Var loss = sum(mul(y, t.constant(proj)));
    if (sink) t.backward(loss, *sink);
    return loss.value().data[0];
  };
  GradBuffer g = ps.zero_grads();
  eval(&g);
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.count(); ++i) {
    auto& v = ps.values(static_cast<int>(i));
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double keep = v[j];
      v[j] = keep + h;
      const double up = eval(nullptr);
      v[j] = keep - h;
      const double dn = eval(nullptr);
      v[j] = keep;
      const double fd = (up - dn) / (2 * h);
      const double an = g[i][j];
      const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Worst central-difference error for every differentiable kernel.
inline std::vector<std::pair<std::string, double>> kernel_gradient_errors(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<std::string, double>> out;
  auto check = [&](const std::string& name, std::vector<Tensor3> in, GraphFn f) {
    out.emplace_back(name, max_gradient_error(in, f, seed + out.size() + 1));
  };
  check("conv1x1", {offset_tensor({2, 3, 6}, rng), offset_tensor({4, 3, 1}, rng), offset_tensor({1, 4, 1}, rng)},
        [](Tape&, const std::vector<Var>& v) { return conv1x1(v[0], v[1], v[2]); });
  check("conv1d", {offset_tensor({2, 3, 6}, rng), offset_tensor({2, 3, 3}, rng), offset_tensor({1, 2, 1}, rng)},
        [](Tape&, const std::vector<Var>& v) { return conv1d(v[0], v[1], v[2], 2); });
  for (int d = 1; d <= 4; ++d) {
    check("dconv d=" + std::to_string(d),
          {offset_tensor({2, 2, 9}, rng), offset_tensor({4, 1, 3}, rng), offset_tensor({1, 4, 1}, rng)},
          [d](Tape&, const std::vector<Var>& v) { return dconv_dilated(v[0], v[1], v[2], d); });
  }
  check("prelu", {offset_tensor({2, 3, 5}, rng), offset_tensor({1, 3, 1}, rng)},
        [](Tape&, const std::vector<Var>& v) { return prelu(v[0], v[1]); });
  check("layer_norm", {offset_tensor({2, 5, 4}, rng), offset_tensor({1, 5, 1}, rng), offset_tensor({1, 5, 1}, rng)},
        [](Tape&, const std::vector<Var>& v) { return layer_norm_channels(v[0], v[1], v[2]); });
  check("avg_pool_time", {offset_tensor({2, 3, 5}, rng)},
        [](Tape&, const std::vector<Var>& v) { return avg_pool_time(v[0]); });
  check("avg_pool_freq", {offset_tensor({2, 3, 5}, rng)},
        [](Tape&, const std::vector<Var>& v) { return avg_pool_freq(v[0]); });
  check("sigmoid", {offset_tensor({2, 3, 5}, rng)}, [](Tape&, const std::vector<Var>& v) { return sigmoid(v[0]); });
  check("mul", {offset_tensor({1, 3, 5}, rng), offset_tensor({1, 3, 1}, rng)},
        [](Tape&, const std::vector<Var>& v) { return mul(v[0], v[1]); });
  check("add", {offset_tensor({2, 3, 5}, rng), offset_tensor({1, 1, 5}, rng)},
        [](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); });
  check("scale", {offset_tensor({2, 3, 5}, rng)}, [](Tape&, const std::vector<Var>& v) { return scale(v[0], -1.7); });
  check("reshape", {offset_tensor({2, 3, 4}, rng)},
        [](Tape&, const std::vector<Var>& v) { return reshape(v[0], Shape{1, 6, 4}); });
  check("slice_batch", {offset_tensor({3, 2, 4}, rng)},
        [](Tape&, const std::vector<Var>& v) { return slice_batch(v[0], 1); });
  {
    const StftConfig cfg{16, 4, 16};
    Waveform w(40, 8000);
    for (auto& x : w.samples) x = rng.uniform(-1.0, 1.0);
    auto spec = std::make_shared<const Spectrogram>(stft(w, cfg));
    check("masked_istft", {offset_tensor({2, spec->bins, spec->frames}, rng)},
          [spec](Tape&, const std::vector<Var>& v) { return masked_istft(v[0], 1, spec); });
  }
  return out;
}

}  // namespace septfa::test
