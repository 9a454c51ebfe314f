// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Centered STFT (reflect padding by window_length/2) and weighted
// overlap-add synthesis normalized by the summed-square window envelope.

#include <cmath>
#include <span>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/signal/fft.hpp"
#include "septfa/signal/waveform.hpp"

namespace septfa {

enum class WindowKind { kHamming };

struct StftConfig {
  int fft_size = 512;
  int hop = 256;
  int window_length = 512;
  WindowKind window_kind = WindowKind::kHamming;

  int bins() const { return fft_size / 2 + 1; }

  void validate() const {
    if (hop <= 0 || window_length <= 0 || fft_size <= 0) {
      throw ConfigError("stft: sizes must be positive");
    }
    if (!(hop <= window_length && window_length <= fft_size)) {
      throw ConfigError("stft: need hop <= window_length <= fft_size");
    }
  }

  // Frames for a signal of `length` samples under centered framing.
  int frames_for(std::size_t length) const {
    return 1 + static_cast<int>((length + hop - 1) / hop);
  }
};

inline bool operator==(const StftConfig& a, const StftConfig& b) {
  return a.fft_size == b.fft_size && a.hop == b.hop && a.window_length == b.window_length &&
         a.window_kind == b.window_kind;
}

// Periodic Hamming.
inline std::vector<double> make_window(const StftConfig& cfg) {
  std::vector<double> w(static_cast<std::size_t>(cfg.window_length));
  const double n = cfg.window_length;
  for (int i = 0; i < cfg.window_length; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / n);
  }
  return w;
}

/// Complex grid, K bins by L frames. Stored frame-major.
struct Spectrogram {
  std::vector<Complex> values;
  int bins = 0;
  int frames = 0;
  StftConfig config;
  std::size_t original_length = 0;
  int sample_rate = 16000;

  Complex& at(int k, int l) { return values[static_cast<std::size_t>(l) * bins + k]; }
  const Complex& at(int k, int l) const {
    return values[static_cast<std::size_t>(l) * bins + k];
  }
  std::span<const Complex> frame(int l) const {
    return {values.data() + static_cast<std::size_t>(l) * bins, static_cast<std::size_t>(bins)};
  }
  std::span<Complex> frame(int l) {
    return {values.data() + static_cast<std::size_t>(l) * bins, static_cast<std::size_t>(bins)};
  }
};

namespace detail {

// Index into the centered, reflect-padded signal; zero beyond the padding.
inline double padded_sample(std::span<const Real> x, long t, long pad) {
  const long n = static_cast<long>(x.size());
  const long i = t - pad;
  if (i >= 0 && i < n) return x[static_cast<std::size_t>(i)];
  if (i < 0) return -i < n ? x[static_cast<std::size_t>(-i)] : 0.0;
  if (i < n + pad && 2 * (n - 1) - i >= 0) return x[static_cast<std::size_t>(2 * (n - 1) - i)];
  return 0.0;
}

inline std::vector<double> window_envelope(const StftConfig& cfg, int frames,
                                           const std::vector<double>& window) {
  const std::size_t span =
      static_cast<std::size_t>(frames - 1) * cfg.hop + static_cast<std::size_t>(cfg.window_length);
  std::vector<double> env(span, 0.0);
  for (int l = 0; l < frames; ++l) {
    const std::size_t off = static_cast<std::size_t>(l) * cfg.hop;
    for (int n = 0; n < cfg.window_length; ++n) env[off + n] += window[n] * window[n];
  }
  return env;
}

inline constexpr double kEnvelopeFloor = 1e-8;

}  // namespace detail

inline Spectrogram stft(std::span<const Real> x, int sample_rate, const StftConfig& cfg) {
  cfg.validate();
  if (x.size() < static_cast<std::size_t>(cfg.window_length)) {
    throw LengthError("stft: input of " + std::to_string(x.size()) +
                      " samples is shorter than one window (" +
                      std::to_string(cfg.window_length) + ")");
  }
  Spectrogram s;
  s.config = cfg;
  s.bins = cfg.bins();
  s.frames = cfg.frames_for(x.size());
  s.original_length = x.size();
  s.sample_rate = sample_rate;
  s.values.assign(static_cast<std::size_t>(s.bins) * s.frames, Complex{});
  const auto window = make_window(cfg);
  const long pad = cfg.window_length / 2;
  auto& fft = RealFft::cached(cfg.fft_size);
  std::vector<double> buf(static_cast<std::size_t>(cfg.fft_size), 0.0);
  for (int l = 0; l < s.frames; ++l) {
    const long off = static_cast<long>(l) * cfg.hop;
    for (int n = 0; n < cfg.window_length; ++n) {
      buf[n] = window[n] * detail::padded_sample(x, off + n, pad);
    }
    fft.forward(buf, s.frame(l));
  }
  return s;
}

inline Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
  return stft(w.view(), w.sample_rate, cfg);
}

/// Weighted overlap-add inverse; output has `original_length` samples.
inline Waveform istft(const Spectrogram& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.bins != cfg.bins() || spec.values.size() != static_cast<std::size_t>(spec.bins) * spec.frames) {
    throw DimensionError("istft: spectrogram shape inconsistent with its config");
  }
  const auto window = make_window(cfg);
  const auto env = detail::window_envelope(cfg, spec.frames, window);
  std::vector<double> acc(env.size(), 0.0);
  auto& fft = RealFft::cached(cfg.fft_size);
  std::vector<double> buf(static_cast<std::size_t>(cfg.fft_size));
  for (int l = 0; l < spec.frames; ++l) {
    fft.inverse(spec.frame(l), buf);
    const std::size_t off = static_cast<std::size_t>(l) * cfg.hop;
    for (int n = 0; n < cfg.window_length; ++n) acc[off + n] += window[n] * buf[n];
  }
  const std::size_t pad = static_cast<std::size_t>(cfg.window_length / 2);
  Waveform out(spec.original_length, spec.sample_rate);
  for (std::size_t t = 0; t < spec.original_length; ++t) {
    const std::size_t p = t + pad;
    const double e = p < env.size() ? env[p] : 0.0;
    if (e < detail::kEnvelopeFloor) {
      throw NumericError("istft: zero window envelope at sample " + std::to_string(t));
    }
    out.samples[t] = acc[p] / e;
  }
  return out;
}

/// Adjoint of the real-linear map spectrum -> istft waveform, restricted to
/// real per-bin scalings: returns G with d<g, istft(M.X)>/dM[k,l] =
/// c_k/N * Re(X[k,l] * conj(G[k,l])), c_k = 1 at DC/Nyquist else 2.
inline std::vector<Complex> istft_adjoint_frames(std::span<const Real> grad_wave,
                                                 const Spectrogram& spec) {
  const StftConfig& cfg = spec.config;
  const auto window = make_window(cfg);
  const auto env = detail::window_envelope(cfg, spec.frames, window);
  const std::size_t pad = static_cast<std::size_t>(cfg.window_length / 2);
  std::vector<double> scaled(env.size(), 0.0);
  for (std::size_t t = 0; t < spec.original_length; ++t) {
    scaled[t + pad] = grad_wave[t] / env[t + pad];
  }
  std::vector<Complex> g(static_cast<std::size_t>(spec.bins) * spec.frames);
  auto& fft = RealFft::cached(cfg.fft_size);
  std::vector<double> buf(static_cast<std::size_t>(cfg.fft_size), 0.0);
  for (int l = 0; l < spec.frames; ++l) {
    const std::size_t off = static_cast<std::size_t>(l) * cfg.hop;
    for (int n = 0; n < cfg.window_length; ++n) buf[n] = window[n] * scaled[off + n];
    fft.forward(buf, std::span<Complex>(g.data() + static_cast<std::size_t>(l) * spec.bins,
                                        static_cast<std::size_t>(spec.bins)));
  }
  return g;
}

}  // namespace septfa
