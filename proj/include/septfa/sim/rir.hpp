// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/signal/fft.hpp"
#include "septfa/signal/waveform.hpp"

namespace septfa::sim {

inline constexpr double kSpeedOfSound = 343.0;

using Point = std::array<double, 3>;

inline double distance(const Point& a, const Point& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct Room {
  Point dims{5.0, 5.0, 2.7};

  double volume() const { return dims[0] * dims[1] * dims[2]; }
  double surface() const { return 2.0 * (dims[0] * dims[1] + dims[1] * dims[2] + dims[0] * dims[2]); }
  bool contains(const Point& p, double margin = 0.0) const {
    for (int a = 0; a < 3; ++a) {
      if (!(p[a] > margin && p[a] < dims[a] - margin)) return false;
    }
    return true;
  }
};

/// Uniform pressure reflection coefficient for all six walls. Eyring:
/// T60 = 24 ln10 V / (-c S ln(1 - a)), with beta = sqrt(1 - a).
inline double eyring_reflection(const Room& room, double t60) {
  if (!(t60 > 0.0)) throw DomainError("reverberation time must be positive");
  const double k = 24.0 * std::log(10.0) / kSpeedOfSound;
  return std::exp(-k * room.volume() / (2.0 * room.surface() * t60));
}

struct RirOptions {
  std::optional<double> reflection;  // fixed coefficient (0: free field); skips matching
  std::optional<std::size_t> length;  // default ceil(1.2 T60 fs)
  bool match_t60 = true;              // refine the Eyring coefficient against the measured decay
};

inline constexpr int kSincHalfTaps = 40;  // 81 taps

namespace detail {

/// Image-source impulse response for a given wall reflection coefficient.
inline Waveform image_sources(const Room& room, const Point& src, const Point& mic, double beta, int fs,
                              std::size_t n) {
  Waveform h(n, fs);
  const double per_meter = fs / kSpeedOfSound;
  const double max_dist = (static_cast<double>(n) + kSincHalfTaps) / per_meter;

  constexpr int W = kSincHalfTaps + 1;
  std::array<double, 2 * kSincHalfTaps + 1> cos_k{}, sin_k{}, sign_k{};
  for (int k = -kSincHalfTaps; k <= kSincHalfTaps; ++k) {
    cos_k[k + kSincHalfTaps] = std::cos(std::numbers::pi * k / W);
    sin_k[k + kSincHalfTaps] = std::sin(std::numbers::pi * k / W);
    sign_k[k + kSincHalfTaps] = (k % 2 == 0) ? 1.0 : -1.0;
  }
  auto add_pulse = [&](double delay, double amp) {
    const double base = std::floor(delay);
    const double fr = delay - base;
    const long n0 = static_cast<long>(base);
    const double s = std::sin(std::numbers::pi * fr);
    const double cf = std::cos(std::numbers::pi * fr / W), sf = std::sin(std::numbers::pi * fr / W);
    for (int k = -kSincHalfTaps; k <= kSincHalfTaps; ++k) {
      const long t = n0 + k;
      if (t < 0 || t >= static_cast<long>(n)) continue;
      const int i = k + kSincHalfTaps;
      const double x = k - fr;
      // sin(pi (k - fr)) = -(-1)^k sin(pi fr); window cos via angle difference
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : -sign_k[i] * s / (std::numbers::pi * x);
      const double win = 0.5 * (1.0 + cos_k[i] * cf + sin_k[i] * sf);
      h.samples[static_cast<std::size_t>(t)] += amp * sinc * win;
    }
  };

  std::array<int, 3> reach{};
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<int>(std::ceil(max_dist / (2.0 * room.dims[a]))) + 1;
  const int max_refl = 2 * (reach[0] + reach[1] + reach[2]) + 6;
  std::vector<double> beta_pow(static_cast<std::size_t>(max_refl) + 1, 1.0);
  for (std::size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;
  if (beta == 0.0) beta_pow[0] = 1.0;

  auto axis = [&](int a, int nn, int p, double& d, int& refl) {
    d = (1 - 2 * p) * src[a] + 2.0 * nn * room.dims[a] - mic[a];
    refl = std::abs(nn - p) + std::abs(nn);
  };
  for (int nx = -reach[0]; nx <= reach[0]; ++nx) {
    for (int px = 0; px < 2; ++px) {
      double dx;
      int rx;
      axis(0, nx, px, dx, rx);
      if (std::abs(dx) > max_dist) continue;
      for (int ny = -reach[1]; ny <= reach[1]; ++ny) {
        for (int py = 0; py < 2; ++py) {
          double dy;
          int ry;
          axis(1, ny, py, dy, ry);
          const double dxy = dx * dx + dy * dy;
          if (dxy > max_dist * max_dist) continue;
          for (int nz = -reach[2]; nz <= reach[2]; ++nz) {
            for (int pz = 0; pz < 2; ++pz) {
              double dz;
              int rz;
              axis(2, nz, pz, dz, rz);
              const double d = std::sqrt(dxy + dz * dz);
              if (d > max_dist) continue;
              const double amp = beta_pow[static_cast<std::size_t>(rx + ry + rz)] / (4.0 * std::numbers::pi * d);
              if (amp == 0.0) continue;
              add_pulse(d * per_meter, amp);
            }
          }
        }
      }
    }
  }
  return h;
}

}  // namespace detail

/// Reverberation time from Schroeder backward integration: straight-line
/// fit of the energy decay curve between -5 and -25 dB, extrapolated to 60 dB.
inline double schroeder_t60(const Waveform& h, double upper_db = -5.0, double lower_db = -25.0) {
  const std::size_t n = h.size();
  std::vector<double> edc(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += h.samples[i] * h.samples[i];
    edc[i] = acc;
  }
  if (!(acc > 0.0)) throw DomainError("schroeder_t60: silent impulse response");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double db = 10.0 * std::log10(edc[i] / acc);
    if (db > upper_db) continue;
    if (db < lower_db) break;
    const double t = static_cast<double>(i) / h.sample_rate;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++m;
  }
  if (m < 2) throw DomainError("schroeder_t60: decay range not covered");
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return -60.0 / slope;
}

/// Image-source room impulse response (rectangular room, uniform walls).
/// Each image is a Hann-windowed sinc pulse at its fractional delay with
/// amplitude beta^reflections / (4 pi d).
///
/// The Eyring coefficient alone gives a decay well over the target in a
/// shoebox (the field is not diffuse: near-axial paths lose energy slowly),
/// so by default ln(beta) is rescaled by measured/target T60 until the
/// Schroeder estimate lands within 2% of the target.
inline Waveform image_method_rir(const Room& room, const Point& src, const Point& mic, double t60, int fs,
                                 const RirOptions& opt = {}) {
  if (!room.contains(src) || !room.contains(mic)) throw DomainError("source or microphone outside the room");
  if (distance(src, mic) <= 0.0) throw DomainError("source and microphone coincide");
  if (!(t60 > 0.0)) throw DomainError("reverberation time must be positive");
  const std::size_t n = opt.length.value_or(static_cast<std::size_t>(std::ceil(1.2 * t60 * fs)));
  if (opt.reflection) return detail::image_sources(room, src, mic, *opt.reflection, fs, n);
  double beta = eyring_reflection(room, t60);
  Waveform h = detail::image_sources(room, src, mic, beta, fs, n);
  if (!opt.match_t60) return h;
  for (int iter = 0; iter < 6; ++iter) {
    const double measured = schroeder_t60(h, -5.0, -25.0);
    if (std::abs(measured / t60 - 1.0) < 0.02) break;
    beta = std::exp(std::log(beta) * measured / t60);
    h = detail::image_sources(room, src, mic, beta, fs, n);
  }
  return h;
}

/// Onset of the first arrival: the first local peak of |h| reaching a
/// quarter of the global peak (above the sinc side lobes, ~0.22).
inline std::size_t first_arrival(const Waveform& h) {
  double peak = 0.0;
  for (double v : h.samples) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw DomainError("first_arrival: silent impulse response");
  std::size_t i = 0;
  while (std::abs(h.samples[i]) < 0.25 * peak) ++i;
  while (i + 1 < h.size() && std::abs(h.samples[i + 1]) > std::abs(h.samples[i])) ++i;
  return i;
}

/// Direct-path delay in samples.
inline double direct_delay(const Point& src, const Point& mic, int fs) {
  return distance(src, mic) * fs / kSpeedOfSound;
}

/// Full linear convolution via FFT.
inline std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  std::size_t nfft = 1;
  while (nfft < out_len) nfft <<= 1;
  RealFft& fft = RealFft::cached(static_cast<int>(nfft));
  std::vector<double> xa(nfft, 0.0), xb(nfft, 0.0), y(nfft);
  std::copy(a.begin(), a.end(), xa.begin());
  std::copy(b.begin(), b.end(), xb.begin());
  std::vector<Complex> fa(nfft / 2 + 1), fb(nfft / 2 + 1);
  fft.forward(xa, fa);
  fft.forward(xb, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.inverse(fa, y);
  y.resize(out_len);
  return y;
}

}  // namespace septfa::sim
