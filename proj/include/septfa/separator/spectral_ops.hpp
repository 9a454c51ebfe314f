// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <memory>

#include "septfa/nn/kernels.hpp"
#include "septfa/signal/features.hpp"

namespace septfa::nn {

/// Waveform [1, 1, T] of istft(masks[index] * mix), differentiable in the masks.
inline Var masked_istft(Var masks, int index, std::shared_ptr<const Spectrogram> mix) {
  const Tensor3& mv = masks.value();
  detail::require(mv.channels() == mix->bins && mv.frames() == mix->frames,
                  "masked_istft: mask shape " + mv.shape.str() + " does not match spectrogram");
  detail::require(index >= 0 && index < mv.batch(), "masked_istft: speaker index out of range");
  Spectrogram masked = *mix;
  const double* m = mv.plane(index);
  const int K = mix->bins, L = mix->frames;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) masked.at(k, l) *= m[static_cast<std::size_t>(k) * L + l];
  }
  Waveform w = istft(masked);
  const Shape shape{1, 1, static_cast<int>(w.size())};
  Tensor3 y(shape, std::move(w.samples));
  return masks.tape->record(std::move(y), detail::any_grad(masks), [masks, index, mix](Tape& t, const Tensor3& gy) {
    const auto g = istft_adjoint_frames(gy.data, *mix);
    Tensor3& gm = t.grad_slot(masks.id);
    double* dst = gm.plane(index);
    const int K = mix->bins, L = mix->frames;
    const double inv_n = 1.0 / mix->config.fft_size;
    const bool has_nyquist = mix->config.fft_size % 2 == 0;
    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < K; ++k) {
        const double ck = (k == 0 || (has_nyquist && k == K - 1)) ? 1.0 : 2.0;
        const std::size_t fi = static_cast<std::size_t>(l) * K + k;
        dst[static_cast<std::size_t>(k) * L + l] += ck * inv_n * (mix->values[fi] * std::conj(g[fi])).real();
      }
    }
  });
}

}  // namespace septfa::nn
