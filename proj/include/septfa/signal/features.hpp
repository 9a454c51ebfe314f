// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/signal/stft.hpp"

namespace septfa {

enum class ChannelMeaning { kLogMagnitude, kLatent, kMaskLogit, kMask };

/// Real grid of C channels by L frames, channel-major.
struct FeatureGrid {
  std::vector<double> values;
  int channels = 0;
  int frames = 0;
  ChannelMeaning meaning = ChannelMeaning::kLatent;

  FeatureGrid() = default;
  FeatureGrid(int c, int l, ChannelMeaning m, double fill = 0.0)
      : values(static_cast<std::size_t>(c) * l, fill), channels(c), frames(l), meaning(m) {}

  double& at(int c, int l) { return values[static_cast<std::size_t>(c) * frames + l]; }
  double at(int c, int l) const { return values[static_cast<std::size_t>(c) * frames + l]; }
};

inline constexpr double kDefaultLogFloor = 1e-8;

/// ln(max(|X|, floor)) per bin.
inline FeatureGrid log_spectrum(const Spectrogram& spec, double floor = kDefaultLogFloor) {
  if (!(floor > 0.0)) throw DomainError("log_spectrum: floor must be positive");
  FeatureGrid g(spec.bins, spec.frames, ChannelMeaning::kLogMagnitude);
  for (int k = 0; k < spec.bins; ++k) {
    for (int l = 0; l < spec.frames; ++l) {
      g.at(k, l) = std::log(std::max(std::abs(spec.at(k, l)), floor));
    }
  }
  return g;
}

/// Real mask on the mixture magnitude, mixture phase kept, then istft.
inline Waveform apply_mask_and_synthesize(const Spectrogram& mix, const FeatureGrid& mask) {
  if (mask.channels != mix.bins || mask.frames != mix.frames) {
    throw DimensionError("mask shape [" + std::to_string(mask.channels) + ", " +
                         std::to_string(mask.frames) + "] does not match spectrogram [" +
                         std::to_string(mix.bins) + ", " + std::to_string(mix.frames) + "]");
  }
  Spectrogram masked = mix;
  for (int l = 0; l < mix.frames; ++l) {
    for (int k = 0; k < mix.bins; ++k) {
      // m*|X|*exp(j*arg X) == m*X
      masked.at(k, l) = mask.at(k, l) * mix.at(k, l);
    }
  }
  return istft(masked);
}

}  // namespace septfa
