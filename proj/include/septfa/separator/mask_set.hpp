// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "septfa/nn/tensor.hpp"
#include "septfa/signal/features.hpp"

namespace septfa {

/// One [K, L] mask per speaker, entries in [0, 1].
struct MaskSet {
  std::vector<FeatureGrid> masks;

  int speakers() const { return static_cast<int>(masks.size()); }
  int bins() const { return masks.empty() ? 0 : masks[0].channels; }
  int frames() const { return masks.empty() ? 0 : masks[0].frames; }

  static MaskSet from_tensor(const nn::Tensor3& t, ChannelMeaning meaning = ChannelMeaning::kMask) {
    MaskSet s;
    for (int i = 0; i < t.batch(); ++i) {
      FeatureGrid g(t.channels(), t.frames(), meaning);
      std::copy(t.plane(i), t.plane(i) + g.values.size(), g.values.begin());
      s.masks.push_back(std::move(g));
    }
    return s;
  }

  nn::Tensor3 to_tensor() const {
    nn::Tensor3 t(nn::Shape{speakers(), bins(), frames()});
    for (int i = 0; i < speakers(); ++i) std::copy(masks[i].values.begin(), masks[i].values.end(), t.plane(i));
    return t;
  }
};

}  // namespace septfa
