// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "septfa/core/error.hpp"

namespace septfa {

enum class BlockVariant { kPlain, kVadResidual };
enum class AttentionFusion { kProduct, kSum };

inline std::string to_string(BlockVariant v) { return v == BlockVariant::kPlain ? "plain" : "vad"; }
inline BlockVariant parse_variant(const std::string& s) {
  if (s == "plain") return BlockVariant::kPlain;
  if (s == "vad" || s == "vad_residual") return BlockVariant::kVadResidual;
  throw ConfigError("unknown variant '" + s + "' (expected plain|vad)");
}

/// Architecture constants of the separation network.
struct SeparatorConfig {
  int speakers = 2;        // I
  int bottleneck = 256;    // F
  int hidden = 512;        // H
  int repeats = 3;         // R
  int blocks = 8;          // blocks per repeat
  int kernel = 3;          // depthwise taps
  int bins = 257;          // K
  int attention_reduction = 4;
  AttentionFusion fusion = AttentionFusion::kProduct;
  BlockVariant variant = BlockVariant::kPlain;
  bool vad_from_logits = false;  // feed mask logits instead of masks to the VAD head
  int vad_filters = 4;
  int vad_kernel = 3;
  double norm_eps = 1e-5;

  // Dilation of block i within a repeat.
  static int dilation(int i) { return (i % 4) + 1; }

  int attention_width() const { return std::max(1, bottleneck / attention_reduction); }

  void validate() const {
    if (speakers != 2) throw ConfigError("separator: only two speakers are supported");
    if (bottleneck < 1 || hidden <= bottleneck) throw ConfigError("separator: need hidden > bottleneck >= 1");
    if (hidden % bottleneck != 0) throw ConfigError("separator: hidden must be a multiple of bottleneck");
    if (repeats < 1 || blocks < 1) throw ConfigError("separator: need at least one block");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("separator: kernel must be odd");
    if (bins < 2) throw ConfigError("separator: need at least two bins");
    if (vad_kernel < 1 || vad_kernel % 2 == 0) throw ConfigError("separator: vad kernel must be odd");
  }

  // Frames seen by one output frame of the block stack.
  int receptive_field() const {
    int span = 1;
    for (int r = 0; r < repeats; ++r) {
      for (int b = 0; b < blocks; ++b) span += (kernel - 1) * dilation(b);
    }
    return span;
  }

  static SeparatorConfig full() { return {}; }
};

/// Closed-form count of learnable scalars, including the VAD head.
inline std::size_t param_census(const SeparatorConfig& c) {
  const std::size_t K = c.bins, F = c.bottleneck, H = c.hidden, P = c.kernel,
                    I = c.speakers, R = c.attention_width(), V = c.vad_filters, Pv = c.vad_kernel;
  std::size_t n = 0;
  n += 2 * K;          // front-end norm
  n += K * F + F;      // input projection
  std::size_t block = 0;
  block += F * F + F;  // 1x1 in
  block += F + 2 * F;  // prelu + norm
  block += H * P + H;  // depthwise expand
  block += H + 2 * H;  // prelu + norm
  block += H * F + F;  // 1x1 out
  block += (F * R + R) + R + (R * F + F);  // attention, frequency branch
  block += (R + R) + R + (R + 1);          // attention, time branch
  block += c.variant == BlockVariant::kPlain ? 2 * F : 4 * F;
  n += block * static_cast<std::size_t>(c.repeats * c.blocks);
  n += F + 2 * F + F * I * K + I * K;      // mask head
  n += K * V * Pv + V + V + 2 * V + V * Pv + 1;  // VAD head
  return n;
}

}  // namespace septfa
