// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "septfa/core/rng.hpp"
#include "septfa/signal/wav.hpp"
#include "septfa/signal/waveform.hpp"

// Synthetic talkers: a stand-in for a read-speech corpus. Voiced syllables
// (harmonic source through three formant resonators) with consonant bursts
// and pauses; each talker has its own pitch, vocal-tract scale and rate.

namespace septfa::sim {

struct TalkerProfile {
  std::string gender = "M";  // "M" | "F"
  double f0 = 120.0;         // Hz
  double tract_scale = 1.0;  // formant multiplier
  double rate = 1.0;         // syllables faster (>1) or slower
  double jitter = 0.03;      // relative pitch wander
};

inline TalkerProfile make_talker(const std::string& gender, Rng& rng) {
  TalkerProfile t;
  t.gender = gender;
  if (gender == "F") {
    t.f0 = rng.uniform(170.0, 250.0);
    t.tract_scale = rng.uniform(1.08, 1.22);
  } else {
    t.f0 = rng.uniform(90.0, 150.0);
    t.tract_scale = rng.uniform(0.92, 1.04);
  }
  t.rate = rng.uniform(0.8, 1.25);
  t.jitter = rng.uniform(0.02, 0.06);
  return t;
}

namespace detail {

// Two-pole resonator at centre f (Hz) and bandwidth bw (Hz).
struct Resonator {
  double a1 = 0, a2 = 0, g = 1, y1 = 0, y2 = 0;
  void set(double f, double bw, int fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    a1 = 2 * r * std::cos(2 * std::numbers::pi * f / fs);
    a2 = -r * r;
    g = 1 - r;
  }
  double step(double x) {
    const double y = g * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

inline constexpr std::array<std::array<double, 3>, 7> kVowels{{
    {730, 1090, 2440}, {270, 2290, 3010}, {300, 870, 2240}, {530, 1840, 2480},
    {570, 840, 2410},  {660, 1720, 2410}, {440, 1020, 2240},
}};

}  // namespace detail

/// One utterance of roughly `seconds` (ends on a syllable boundary).
inline Waveform synth_utterance(const TalkerProfile& talker, double seconds, int fs, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(seconds * fs);
  Waveform w(n, fs);
  const double nyq = 0.5 * fs;
  std::size_t t = static_cast<std::size_t>(rng.uniform(0.02, 0.12) * fs);
  double phase = 0.0;
  double prev_noise = 0.0;
  while (t < n) {
    const double dur = rng.uniform(0.12, 0.30) / talker.rate;
    const std::size_t len = std::min(n - t, static_cast<std::size_t>(dur * fs));
    const auto& v = detail::kVowels[rng.index(detail::kVowels.size())];
    std::array<detail::Resonator, 3> res;
    const std::array<double, 3> bw{80, 110, 150};
    for (int k = 0; k < 3; ++k) res[k].set(std::min(v[k] * talker.tract_scale, nyq * 0.9), bw[k], fs);
    const double accent = rng.uniform(-0.12, 0.18);
    const double drift = rng.uniform(-0.1, 0.05);
    const bool burst = rng.uniform() < 0.5;
    const std::size_t burst_len = static_cast<std::size_t>(rng.uniform(0.02, 0.05) * fs);
    const double amp = rng.uniform(0.6, 1.0);
    for (std::size_t i = 0; i < len; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(len);
      const double f0 = talker.f0 * (1.0 + accent * std::sin(std::numbers::pi * u) + drift * u +
                                     talker.jitter * (rng.uniform() - 0.5));
      phase += f0 / fs;
      phase -= std::floor(phase);
      double src = 0.0;
      const int harmonics = std::max(1, static_cast<int>(std::min(4000.0, nyq - 100.0) / f0));
      for (int h = 1; h <= harmonics; ++h) src += std::sin(2 * std::numbers::pi * h * phase) / h;
      double y = 0.0;
      for (auto& r : res) y += r.step(src);
      // raised-cosine attack/release
      const double edge = std::min(1.0, std::min(u, 1.0 - u) * dur / 0.03);
      double s = amp * y * 0.5 * (1.0 - std::cos(std::numbers::pi * edge));
      if (burst && i < burst_len) {
        const double noise = rng.uniform(-1.0, 1.0);
        s += 0.3 * amp * (noise - prev_noise);  // first difference: hiss
        prev_noise = noise;
      }
      w.samples[t + i] = s;
    }
    t += len;
    const double gap = rng.uniform() < 0.25 ? rng.uniform(0.15, 0.4) : rng.uniform(0.02, 0.08);
    t += static_cast<std::size_t>(gap * fs);
  }
  double peak = 0.0, e = 0.0;
  for (double x : w.samples) {
    peak = std::max(peak, std::abs(x));
    e += x * x;
  }
  if (e > 0.0) {
    const double g = std::min(0.1 / std::sqrt(e / n), 0.9 / peak);
    for (double& x : w.samples) x *= g;
  }
  return w;
}

struct SyntheticPoolSpec {
  int speakers_per_gender = 4;
  int utterances = 3;
  double min_seconds = 3.0;
  double max_seconds = 6.0;
  int sample_rate = 8000;
  std::uint64_t seed = 0;
};

/// Writes <dir>/<speaker>/<utt>.wav and <dir>/speakers.csv (speaker_id,gender).
inline void write_synthetic_pool(const std::string& dir, const SyntheticPoolSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream csv(fs::path(dir) / "speakers.csv");
  if (!csv) throw IoError("cannot write speaker table in " + dir);
  csv << "speaker_id,gender\n";
  int index = 0;
  for (const char* gender : {"F", "M"}) {
    for (int s = 0; s < spec.speakers_per_gender; ++s, ++index) {
      Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
      const TalkerProfile talker = make_talker(gender, rng);
      char id[32];
      std::snprintf(id, sizeof(id), "spk%03d%s", index, gender);
      csv << id << ',' << gender << '\n';
      fs::create_directories(fs::path(dir) / id);
      for (int u = 0; u < spec.utterances; ++u) {
        const double sec = rng.uniform(spec.min_seconds, spec.max_seconds);
        char name[32];
        std::snprintf(name, sizeof(name), "utt%02d.wav", u);
        wav::write((fs::path(dir) / id / name).string(), synth_utterance(talker, sec, spec.sample_rate, rng),
                   wav::SampleFormat::kFloat32);
      }
    }
  }
}

}  // namespace septfa::sim
