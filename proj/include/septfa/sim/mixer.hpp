// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "septfa/sim/rir.hpp"
#include "septfa/sim/scene.hpp"
#include "septfa/vad/vad.hpp"

namespace septfa::sim {

/// Where each dry source sits in the output and how much of it is used.
struct Placement {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> lengths;

  std::size_t overlap() const {
    const std::size_t a0 = offsets[0], a1 = a0 + lengths[0], b0 = offsets[1], b1 = b0 + lengths[1];
    const std::size_t lo = std::max(a0, b0), hi = std::min(a1, b1);
    return hi > lo ? hi - lo : 0;
  }
  std::size_t joint() const {
    return std::max(offsets[0] + lengths[0], offsets[1] + lengths[1]) - std::min(offsets[0], offsets[1]);
  }
};

/// Two active regions whose overlap is `overlap` of their union. The longer
/// source is trimmed if the shorter one cannot supply that overlap; both are
/// shortened proportionally when the union exceeds `total`. The shorter
/// region sits inside the longer one (full overlap) at a uniform offset, or
/// else leads or trails it with equal probability. The union is placed
/// uniformly in [0, total); the rest is silence.
inline Placement place_sources(std::size_t len_a, std::size_t len_b, double overlap, std::size_t total, Rng& rng) {
  if (len_a == 0 || len_b == 0) throw RenderError("place_sources: empty source");
  if (!(overlap > 0.0 && overlap <= 1.0)) throw DomainError("place_sources: overlap must lie in (0, 1]");
  const int s = len_a <= len_b ? 0 : 1;  // shorter
  double d1 = static_cast<double>(s == 0 ? len_a : len_b);
  double d2 = static_cast<double>(s == 0 ? len_b : len_a);
  d2 = std::min(d2, d1 / overlap);
  double uni = (d1 + d2) / (1.0 + overlap);
  if (uni > static_cast<double>(total)) {
    const double f = static_cast<double>(total) / uni;
    d1 *= f;
    d2 *= f;
  }
  const auto n1 = static_cast<std::size_t>(std::floor(d1));
  const auto n2 = std::max(n1, static_cast<std::size_t>(std::floor(d2)));
  const auto ov = std::min<std::size_t>(n1, static_cast<std::size_t>(std::llround(overlap * (n1 + n2) / (1.0 + overlap))));
  const std::size_t joint = n1 + n2 - ov;
  std::size_t off1 = 0, off2 = 0;  // relative to the union start
  if (ov >= n1) {
    off1 = rng.index(n2 - n1 + 1);
  } else if (rng.uniform() < 0.5) {
    off2 = n1 - ov;  // shorter leads
  } else {
    off1 = n2 - ov;  // shorter trails
  }
  const std::size_t base = rng.index(total - joint + 1);
  Placement p;
  p.offsets.resize(2);
  p.lengths.resize(2);
  p.offsets[s] = base + off1;
  p.lengths[s] = n1;
  p.offsets[1 - s] = base + off2;
  p.lengths[1 - s] = n2;
  return p;
}

/// One noise ingredient: `scale * source[(t + shift) mod len]`.
struct NoiseComponent {
  std::string path;
  std::size_t shift = 0;
  double scale = 1.0;
};

/// Everything needed to redo a mix without randomness.
struct MixRecipe {
  Placement placement;
  std::vector<double> source_gains;
  double noise_gain = 0.0;
  std::vector<NoiseComponent> noise;
};

struct MixtureSample {
  Waveform mixture;
  std::vector<Waveform> refs;  // reverberant, scaled
  Waveform noise;              // scaled, as added
  VadLabels labels;
  SceneSpec scene;
  MixRecipe recipe;
  std::vector<std::string> speaker_ids;
  std::vector<std::string> genders;
  std::vector<double> distances;
};

inline constexpr double kReferenceLevel = 0.05;  // RMS of the first reverberant source

namespace detail {

inline Waveform tile(const Waveform& src, std::size_t shift, std::size_t n, double scale) {
  Waveform out(n, src.sample_rate);
  for (std::size_t t = 0; t < n; ++t) out.samples[t] = scale * src.samples[(t + shift) % src.size()];
  return out;
}

}  // namespace detail

/// Builds a noise bed from its components.
inline Waveform assemble_noise(const std::vector<Waveform>& sources, const std::vector<NoiseComponent>& parts,
                               std::size_t n, int fs) {
  Waveform out(n, fs);
  for (std::size_t j = 0; j < parts.size(); ++j) {
    if (sources[j].size() == 0) throw RenderError("noise source is empty: " + parts[j].path);
    Waveform piece = detail::tile(sources[j], parts[j].shift, n, parts[j].scale);
    for (std::size_t t = 0; t < n; ++t) out.samples[t] += piece.samples[t];
  }
  return out;
}

/// Deterministic part of rendering: reverberate, level, add noise, label.
inline MixtureSample mix_with_recipe(const SceneSpec& scene, const std::vector<Waveform>& dry, const Waveform& noise_bed,
                                     MixRecipe recipe, int fs, const StftConfig& label_cfg = {}) {
  const std::size_t n = static_cast<std::size_t>(std::llround(scene.sample_length * fs));
  if (dry.size() != scene.sources.size()) throw DimensionError("render: one dry signal per source required");
  MixtureSample out;
  out.scene = scene;
  out.distances = scene.distances();
  std::vector<Waveform> rev;
  for (std::size_t i = 0; i < dry.size(); ++i) {
    if (dry[i].sample_rate != fs) throw IoError("render: source sample rate differs from the target rate");
    const std::size_t off = recipe.placement.offsets[i], len = recipe.placement.lengths[i];
    if (len > dry[i].size() || off + len > n) throw RenderError("render: placement exceeds the source or sample");
    double e = 0.0;
    for (std::size_t t = 0; t < len; ++t) e += dry[i].samples[t] * dry[i].samples[t];
    if (!(e > 0.0)) throw RenderError("render: source " + std::to_string(i) + " is silent");
    const Waveform h = image_method_rir(scene.room, scene.sources[i], scene.mic, scene.t60, fs);
    std::vector<double> y = fft_convolve(std::span<const double>(dry[i].samples.data(), len), h.samples);
    Waveform r(n, fs);
    for (std::size_t t = 0; t < y.size() && off + t < n; ++t) r.samples[off + t] = y[t];
    rev.push_back(std::move(r));
  }
  // level: first source at the reference RMS, the rest at the requested SIR below it
  const double p0 = power(rev[0].view());
  if (!(p0 > 0.0)) throw RenderError("render: reverberant source 0 is silent");
  recipe.source_gains.assign(rev.size(), 0.0);
  recipe.source_gains[0] = kReferenceLevel / std::sqrt(p0);
  for (std::size_t i = 1; i < rev.size(); ++i) {
    const double pi = power(rev[i].view());
    if (!(pi > 0.0)) throw RenderError("render: reverberant source " + std::to_string(i) + " is silent");
    recipe.source_gains[i] = kReferenceLevel / std::sqrt(pi) * std::pow(10.0, -scene.sir / 20.0);
  }
  Waveform speech(n, fs);
  for (std::size_t i = 0; i < rev.size(); ++i) {
    for (double& v : rev[i].samples) v *= recipe.source_gains[i];
    for (std::size_t t = 0; t < n; ++t) speech.samples[t] += rev[i].samples[t];
  }
  out.noise = Waveform(n, fs);
  if (std::isinf(scene.snr) && scene.snr > 0) {
    recipe.noise_gain = 0.0;
  } else {
    if (noise_bed.size() != n) throw RenderError("render: noise bed has the wrong length");
    const double pn = power(noise_bed.view());
    if (!(pn > 0.0)) throw RenderError("render: noise is silent");
    recipe.noise_gain = std::sqrt(power(speech.view()) / (pn * std::pow(10.0, scene.snr / 10.0)));
    for (std::size_t t = 0; t < n; ++t) out.noise.samples[t] = recipe.noise_gain * noise_bed.samples[t];
  }
  out.mixture = Waveform(n, fs);
  for (std::size_t t = 0; t < n; ++t) out.mixture.samples[t] = speech.samples[t] + out.noise.samples[t];
  std::vector<VadLabels> rows;
  for (const auto& r : rev) rows.push_back(label_frames(r, label_cfg));
  out.labels = VadLabels::stack(rows);
  out.refs = std::move(rev);
  out.recipe = std::move(recipe);
  return out;
}

/// Places the sources at random and mixes. `noise_bed` must already span
/// the sample (see assemble_noise); ignored when scene.snr is +inf.
inline MixtureSample render_mixture(const SceneSpec& scene, const std::vector<Waveform>& dry, const Waveform& noise_bed,
                                    Rng& rng, int fs, const StftConfig& label_cfg = {}) {
  if (dry.size() != 2) throw DimensionError("render: two sources required");
  const std::size_t n = static_cast<std::size_t>(std::llround(scene.sample_length * fs));
  MixRecipe recipe;
  recipe.placement = place_sources(dry[0].size(), dry[1].size(), scene.overlap, n, rng);
  return mix_with_recipe(scene, dry, noise_bed, std::move(recipe), fs, label_cfg);
}

/// 10 log10(P(sum refs) / P(noise)).
inline double measured_snr(const MixtureSample& m) {
  Waveform speech(m.mixture.size(), m.mixture.sample_rate);
  for (const auto& r : m.refs) {
    for (std::size_t t = 0; t < r.size(); ++t) speech.samples[t] += r.samples[t];
  }
  return 10.0 * std::log10(power(speech.view()) / power(m.noise.view()));
}

inline nlohmann::json to_json(const MixRecipe& r) {
  nlohmann::json noise = nlohmann::json::array();
  for (const auto& c : r.noise) noise.push_back({{"path", c.path}, {"shift", c.shift}, {"scale", c.scale}});
  return {{"offsets", r.placement.offsets}, {"lengths", r.placement.lengths}, {"source_gains", r.source_gains},
          {"noise_gain", r.noise_gain},     {"noise", noise}};
}

inline MixRecipe recipe_from_json(const nlohmann::json& j) {
  MixRecipe r;
  try {
    r.placement.offsets = j.at("offsets").get<std::vector<std::size_t>>();
    r.placement.lengths = j.at("lengths").get<std::vector<std::size_t>>();
    r.source_gains = j.at("source_gains").get<std::vector<double>>();
    r.noise_gain = j.at("noise_gain");
    for (const auto& c : j.at("noise")) r.noise.push_back({c.at("path"), c.at("shift"), c.at("scale")});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad mix recipe: ") + e.what());
  }
  return r;
}

}  // namespace septfa::sim
