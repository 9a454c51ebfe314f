// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Mask-estimation network: log-spectrum -> norm -> 1x1 projection -> stack of
// residual dilated conv blocks with time-frequency attention -> mask head.

#include <memory>
#include <string>
#include <vector>

#include "septfa/core/rng.hpp"
#include "septfa/nn/kernels.hpp"
#include "septfa/separator/config.hpp"
#include "septfa/separator/mask_set.hpp"
#include "septfa/separator/spectral_ops.hpp"
#include "septfa/signal/features.hpp"
#include "septfa/vad/vad.hpp"

namespace septfa {

struct SeparationResult {
  std::vector<Waveform> estimates;
  MaskSet masks;
  MaskSet mask_logits;  // latent grid handed downstream, [I][K, L]
  VadProbs vad;
};

/// Taped outputs of one forward pass.
struct SeparatorGraph {
  nn::Var masks;        // [I, K, L]
  nn::Var mask_logits;  // [I, K, L]
  nn::Var vad_probs;    // [I, 1, L], only when requested
};

class Separator {
 public:
  explicit Separator(SeparatorConfig cfg, std::uint64_t seed = 0, StftConfig stft = {})
      : cfg_(cfg), stft_(stft) {
    cfg_.validate();
    stft_.validate();
    if (stft_.bins() != cfg_.bins) throw ConfigError("separator: bins do not match the STFT size");
    Rng rng(seed);
    build(rng);
  }

  const SeparatorConfig& config() const { return cfg_; }
  const StftConfig& stft_config() const { return stft_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  static std::string block_prefix(int repeat, int block) {
    return "tcn.r" + std::to_string(repeat) + ".b" + std::to_string(block) + ".";
  }

  /// Residual block; `x` has F channels.
  nn::Var attconv_block(nn::Tape& t, nn::Var x, int repeat, int block) const {
    using namespace nn;
    nn::detail::require(x.value().channels() == cfg_.bottleneck,
                    "attconv_block: input has " + std::to_string(x.value().channels()) + " channels, expected " +
                        std::to_string(cfg_.bottleneck));
    const std::string pre = block_prefix(repeat, block);
    auto p = [&](const std::string& n) { return t.parameter(params_, pre + n); };
    const double eps = cfg_.norm_eps;
    Var h = conv1x1(x, p("in.w"), p("in.b"));
    h = prelu(h, p("prelu1"));
    h = layer_norm_channels(h, p("norm1.gain"), p("norm1.bias"), eps);
    h = dconv_dilated(h, p("dconv.w"), p("dconv.b"), SeparatorConfig::dilation(block));
    h = prelu(h, p("prelu2"));
    h = layer_norm_channels(h, p("norm2.gain"), p("norm2.bias"), eps);
    h = conv1x1(h, p("out.w"), p("out.b"));
    Var y_att = tf_attention(t, h, pre + "att.");
    if (cfg_.variant == BlockVariant::kPlain) {
      return add(x, layer_norm_channels(y_att, p("post.gain"), p("post.bias"), eps));
    }
    Var inner = layer_norm_channels(add(x, y_att), p("inner.gain"), p("inner.bias"), eps);
    return layer_norm_channels(add(x, inner), p("outer.gain"), p("outer.bias"), eps);
  }

  /// Gate from time- and frequency-pooled statistics, multiplied onto `y`.
  nn::Var tf_attention(nn::Tape& t, nn::Var y, const std::string& pre) const {
    using namespace nn;
    auto p = [&](const std::string& n) { return t.parameter(params_, pre + n); };
    // frequency branch: pool over time -> [1, F, 1]
    Var f = conv1x1(avg_pool_time(y), p("freq.w1"), p("freq.b1"));
    f = conv1x1(prelu(f, p("freq.alpha")), p("freq.w2"), p("freq.b2"));
    // time branch: pool over channels -> [1, 1, L]
    Var s = conv1x1(avg_pool_freq(y), p("time.w1"), p("time.b1"));
    s = conv1x1(prelu(s, p("time.alpha")), p("time.w2"), p("time.b2"));
    Var gate = cfg_.fusion == AttentionFusion::kProduct ? mul(sigmoid(f), sigmoid(s)) : sigmoid(add(f, s));
    return mul(y, gate);
  }

  /// The repeated block stack on an F-channel latent.
  nn::Var tcn(nn::Tape& t, nn::Var x) const {
    for (int r = 0; r < cfg_.repeats; ++r) {
      for (int b = 0; b < cfg_.blocks; ++b) x = attconv_block(t, x, r, b);
    }
    return x;
  }

  /// log-spectrum [1, K, L] -> masks.
  SeparatorGraph forward(nn::Tape& t, const FeatureGrid& log_spec, bool with_vad) const {
    using namespace nn;
    if (log_spec.channels != cfg_.bins) throw DimensionError("separator: feature grid has wrong bin count");
    auto p = [&](const std::string& n) { return t.parameter(params_, n); };
    const double eps = cfg_.norm_eps;
    const int K = cfg_.bins, L = log_spec.frames, I = cfg_.speakers;
    Var x = t.constant(Tensor3(Shape{1, K, L}, log_spec.values));
    x = layer_norm_channels(x, p("front.norm.gain"), p("front.norm.bias"), eps);
    x = conv1x1(x, p("input.w"), p("input.b"));
    x = tcn(t, x);
    x = prelu(x, p("head.prelu"));
    x = layer_norm_channels(x, p("head.norm.gain"), p("head.norm.bias"), eps);
    x = conv1x1(x, p("head.w"), p("head.b"));
    SeparatorGraph g;
    g.mask_logits = reshape(x, Shape{I, K, L});
    g.masks = sigmoid(g.mask_logits);
    if (with_vad) g.vad_probs = vad_forward(t, params_, cfg_.vad_from_logits ? g.mask_logits : g.masks, eps);
    return g;
  }

  SeparationResult separate(const Waveform& mix) const {
    mix.validate("mixture");
    auto spec = std::make_shared<const Spectrogram>(stft(mix, stft_));
    return separate(spec);
  }

  SeparationResult separate(std::shared_ptr<const Spectrogram> spec) const {
    nn::Tape t;
    SeparatorGraph g = forward(t, log_spectrum(*spec), true);
    SeparationResult r;
    r.masks = MaskSet::from_tensor(g.masks.value());
    r.mask_logits = MaskSet::from_tensor(g.mask_logits.value(), ChannelMeaning::kMaskLogit);
    r.vad = vad_probs_from_tensor(g.vad_probs.value());
    for (int i = 0; i < cfg_.speakers; ++i) {
      r.estimates.push_back(apply_mask_and_synthesize(*spec, r.masks.masks[i]));
    }
    return r;
  }

 private:
  void build(Rng& rng) {
    using nn::Shape;
    const int K = cfg_.bins, F = cfg_.bottleneck, H = cfg_.hidden, P = cfg_.kernel, I = cfg_.speakers;
    const int A = cfg_.attention_width();
    auto& ps = params_;
    auto norm = [&](const std::string& n, int c) {
      ps.add(n + ".gain", Shape{1, c, 1}, 1.0);
      ps.add(n + ".bias", Shape{1, c, 1}, 0.0);
    };
    auto conv = [&](const std::string& n, int out, int in, int taps, const std::string& w = "w",
                    const std::string& b = "b") {
      ps.add_uniform(n + w, Shape{out, in, taps}, in * taps, rng);
      ps.add_uniform(n + b, Shape{1, out, 1}, in * taps, rng);
    };
    auto alpha = [&](const std::string& n, int c) { ps.add(n, Shape{1, c, 1}, 0.25); };

    norm("front.norm", K);
    conv("input.", F, K, 1);
    for (int r = 0; r < cfg_.repeats; ++r) {
      for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string pre = block_prefix(r, b);
        conv(pre + "in.", F, F, 1);
        alpha(pre + "prelu1", F);
        norm(pre + "norm1", F);
        // depthwise with multiplier H/F: weight [H, 1, P], fan-in P
        ps.add_uniform(pre + "dconv.w", Shape{H, 1, P}, P, rng);
        ps.add_uniform(pre + "dconv.b", Shape{1, H, 1}, P, rng);
        alpha(pre + "prelu2", H);
        norm(pre + "norm2", H);
        conv(pre + "out.", F, H, 1);
        conv(pre + "att.freq.", A, F, 1, "w1", "b1");
        alpha(pre + "att.freq.alpha", A);
        conv(pre + "att.freq.", F, A, 1, "w2", "b2");
        conv(pre + "att.time.", A, 1, 1, "w1", "b1");
        alpha(pre + "att.time.alpha", A);
        conv(pre + "att.time.", 1, A, 1, "w2", "b2");
        if (cfg_.variant == BlockVariant::kPlain) {
          norm(pre + "post", F);
        } else {
          norm(pre + "inner", F);
          norm(pre + "outer", F);
        }
      }
    }
    alpha("head.prelu", F);
    norm("head.norm", F);
    conv("head.", I * K, F, 1);
    add_vad_head(ps, cfg_, rng);
  }

  SeparatorConfig cfg_;
  StftConfig stft_;
  nn::ParamStore params_;
};

}  // namespace septfa
