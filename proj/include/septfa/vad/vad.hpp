// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Mask-driven VAD head, the energy-threshold baseline, reference labelling
// and detection metrics.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/core/rng.hpp"
#include "septfa/nn/kernels.hpp"
#include "septfa/separator/config.hpp"
#include "septfa/separator/mask_set.hpp"
#include "septfa/signal/stft.hpp"

namespace septfa {

/// Activity probabilities, speakers x frames.
struct VadProbs {
  int speakers = 0;
  int frames = 0;
  std::vector<double> p;

  double at(int i, int l) const { return p[static_cast<std::size_t>(i) * frames + l]; }
  double& at(int i, int l) { return p[static_cast<std::size_t>(i) * frames + l]; }
};

/// Binary activity, speakers x frames.
struct VadLabels {
  int speakers = 0;
  int frames = 0;
  std::vector<unsigned char> v;

  VadLabels() = default;
  VadLabels(int i, int l, unsigned char fill = 0)
      : speakers(i), frames(l), v(static_cast<std::size_t>(i) * l, fill) {}

  unsigned char at(int i, int l) const { return v[static_cast<std::size_t>(i) * frames + l]; }
  unsigned char& at(int i, int l) { return v[static_cast<std::size_t>(i) * frames + l]; }

  // Row i as its own single-speaker label set.
  VadLabels row(int i) const {
    VadLabels r(1, frames);
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(i) * frames,
              v.begin() + static_cast<std::ptrdiff_t>(i + 1) * frames, r.v.begin());
    return r;
  }

  static VadLabels stack(const std::vector<VadLabels>& rows) {
    if (rows.empty()) return {};
    VadLabels out(static_cast<int>(rows.size()), rows[0].frames);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].frames != out.frames) throw DimensionError("label rows differ in length");
      std::copy(rows[i].v.begin(), rows[i].v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(i) * out.frames);
    }
    return out;
  }

  friend bool operator==(const VadLabels&, const VadLabels&) = default;
};

struct EnergyVadConfig {
  double activation_threshold = 0.3;  // T_a
  double fraction_threshold = 0.25;   // T_s

  void validate() const {
    auto inside = [](double x) { return x > 0.0 && x < 1.0; };
    if (!inside(activation_threshold) || !inside(fraction_threshold)) {
      throw ConfigError("energy VAD thresholds must lie in (0, 1)");
    }
  }
};

// ---------------------------------------------------------------------------
// VAD head: conv(K->V) -> PReLU -> norm -> conv(V->1) -> sigmoid, shared across
// speakers (speakers ride the batch axis).

inline void add_vad_head(nn::ParamStore& ps, const SeparatorConfig& c, Rng& rng) {
  using nn::Shape;
  const int K = c.bins, V = c.vad_filters, P = c.vad_kernel;
  ps.add_uniform("vad.conv1.w", Shape{V, K, P}, K * P, rng);
  ps.add_uniform("vad.conv1.b", Shape{1, V, 1}, K * P, rng);
  ps.add("vad.prelu", Shape{1, V, 1}, 0.25);
  ps.add("vad.norm.gain", Shape{1, V, 1}, 1.0);
  ps.add("vad.norm.bias", Shape{1, V, 1}, 0.0);
  ps.add_uniform("vad.conv2.w", Shape{1, V, P}, V * P, rng);
  ps.add_uniform("vad.conv2.b", Shape{1, 1, 1}, V * P, rng);
}

/// masks [I, K, L] -> probabilities [I, 1, L].
inline nn::Var vad_forward(nn::Tape& t, const nn::ParamStore& ps, nn::Var masks, double eps = nn::kNormEps) {
  using namespace nn;
  auto p = [&](const char* n) { return t.parameter(ps, n); };
  Var h = conv1d(masks, p("vad.conv1.w"), p("vad.conv1.b"));
  h = prelu(h, p("vad.prelu"));
  h = layer_norm_channels(h, p("vad.norm.gain"), p("vad.norm.bias"), eps);
  h = conv1d(h, p("vad.conv2.w"), p("vad.conv2.b"));
  return sigmoid(h);
}

inline VadProbs vad_probs_from_tensor(const nn::Tensor3& t) {
  VadProbs out;
  out.speakers = t.batch();
  out.frames = t.frames();
  out.p.assign(t.data.begin(), t.data.end());
  return out;
}

/// Untaped evaluation over a MaskSet.
inline VadProbs vad_forward(const MaskSet& masks, const nn::ParamStore& ps) {
  if (masks.speakers() < 1) throw DimensionError("vad_forward: no masks");
  if (masks.bins() != ps.entry(ps.find("vad.conv1.w")).shape.channels) {
    throw DimensionError("vad_forward: mask bins do not match the VAD head");
  }
  nn::Tape t;
  nn::Var out = vad_forward(t, ps, t.constant(masks.to_tensor()));
  return vad_probs_from_tensor(out.value());
}

/// v = 1 where p >= threshold.
inline VadLabels hard_decision(const VadProbs& p, double threshold = 0.5) {
  VadLabels v(p.speakers, p.frames);
  for (std::size_t i = 0; i < p.p.size(); ++i) v.v[i] = p.p[i] >= threshold ? 1 : 0;
  return v;
}

/// Frame active iff the fraction of bins with mask > T_a reaches T_s.
inline VadLabels energy_vad(const MaskSet& masks, const EnergyVadConfig& cfg = {}) {
  cfg.validate();
  VadLabels v(masks.speakers(), masks.frames());
  const int K = masks.bins();
  for (int i = 0; i < masks.speakers(); ++i) {
    for (int l = 0; l < masks.frames(); ++l) {
      int active = 0;
      for (int k = 0; k < K; ++k) active += masks.masks[i].at(k, l) > cfg.activation_threshold ? 1 : 0;
      v.at(i, l) = static_cast<double>(active) / K >= cfg.fraction_threshold ? 1 : 0;
    }
  }
  return v;
}

inline constexpr double kLabelFloorDb = -40.0;

/// Reference activity: frame active iff its windowed energy is within
/// `floor_db` of the loudest frame. Frames follow the centered STFT grid.
inline VadLabels label_frames(const Waveform& ref, const StftConfig& cfg, double floor_db = kLabelFloorDb) {
  cfg.validate();
  const int frames = cfg.frames_for(ref.size());
  const auto window = make_window(cfg);
  const long pad = cfg.window_length / 2;
  std::vector<double> e(static_cast<std::size_t>(frames), 0.0);
  for (int l = 0; l < frames; ++l) {
    double s = 0.0;
    for (int n = 0; n < cfg.window_length; ++n) {
      const double v = window[n] * detail::padded_sample(ref.view(), static_cast<long>(l) * cfg.hop + n, pad);
      s += v * v;
    }
    e[l] = s;
  }
  VadLabels out(1, frames);
  const double peak = *std::max_element(e.begin(), e.end());
  if (!(peak > 0.0)) return out;
  const double floor = peak * std::pow(10.0, floor_db / 10.0);
  for (int l = 0; l < frames; ++l) out.v[l] = e[l] > floor ? 1 : 0;
  return out;
}

struct VadMetrics {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Confusion-matrix metrics pooled over speakers and frames. Recall/precision
/// with an empty denominator are reported as 1.
inline VadMetrics vad_metrics(const VadLabels& pred, const VadLabels& truth) {
  if (pred.v.empty() || truth.v.empty()) throw DomainError("vad_metrics: empty input");
  if (pred.speakers != truth.speakers || pred.frames != truth.frames) {
    throw DimensionError("vad_metrics: shape mismatch");
  }
  VadMetrics m;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const bool p = pred.v[i] != 0, t = truth.v[i] != 0;
    if (p && t) ++m.tp;
    else if (p && !t) ++m.fp;
    else if (!p && t) ++m.fn;
    else ++m.tn;
  }
  const double total = static_cast<double>(pred.v.size());
  m.accuracy = (m.tp + m.tn) / total;
  m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 1.0;
  m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 1.0;
  return m;
}

/// Rows reordered so that output row i is input row perm[i].
inline VadLabels permute_rows(const VadLabels& v, const std::vector<int>& perm) {
  std::vector<VadLabels> rows;
  for (int i : perm) rows.push_back(v.row(i));
  return VadLabels::stack(rows);
}

// ---------------------------------------------------------------------------
// Export.

/// frame_index,speaker_0,speaker_1,...
inline std::string labels_to_csv(const VadLabels& v) {
  std::ostringstream os;
  os << "frame_index";
  for (int i = 0; i < v.speakers; ++i) os << ",speaker_" << i;
  os << "\n";
  for (int l = 0; l < v.frames; ++l) {
    os << l;
    for (int i = 0; i < v.speakers; ++i) os << "," << int(v.at(i, l));
    os << "\n";
  }
  return os.str();
}

inline VadLabels labels_from_csv(const std::string& text, const std::string& name = "labels") {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw IoError(name + ": empty label file");
  const int speakers = static_cast<int>(std::count(line.begin(), line.end(), ','));
  std::vector<std::vector<unsigned char>> cols(static_cast<std::size_t>(speakers));
  int expected = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    if (cell != std::to_string(expected++)) throw IoError(name + ": frame indices not contiguous");
    for (int i = 0; i < speakers; ++i) {
      if (!std::getline(ls, cell, ',')) throw IoError(name + ": short row");
      if (cell != "0" && cell != "1") throw IoError(name + ": label values must be 0 or 1");
      cols[i].push_back(cell == "1" ? 1 : 0);
    }
  }
  VadLabels v(speakers, expected);
  for (int i = 0; i < speakers; ++i) std::copy(cols[i].begin(), cols[i].end(), v.v.begin() + static_cast<std::ptrdiff_t>(i) * expected);
  return v;
}

inline VadLabels read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return labels_from_csv(ss.str(), path);
}

inline void write_labels(const std::string& path, const VadLabels& v) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write label file: " + path);
  out << labels_to_csv(v);
}

struct ActivitySegment {
  double start_sec = 0.0;
  double end_sec = 0.0;
  int speaker = 0;
};

/// Run-length segments of active frames; frame l spans [l*hop, (l+1)*hop).
inline std::vector<ActivitySegment> activity_segments(const VadLabels& v, int hop, int sample_rate) {
  std::vector<ActivitySegment> segs;
  const double dt = static_cast<double>(hop) / sample_rate;
  for (int i = 0; i < v.speakers; ++i) {
    int l = 0;
    while (l < v.frames) {
      if (!v.at(i, l)) {
        ++l;
        continue;
      }
      const int start = l;
      while (l < v.frames && v.at(i, l)) ++l;
      segs.push_back({start * dt, l * dt, i});
    }
  }
  return segs;
}

}  // namespace septfa
