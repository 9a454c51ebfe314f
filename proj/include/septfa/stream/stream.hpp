// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/separator/model.hpp"

namespace septfa {

/// Sliding-window layout. The step equals the look-ahead, rounded down to
/// whole STFT hops so every window sits on the same frame grid; the window
/// keeps its ratio to the step.
struct SegmentPlan {
  double segment_sec = 3.0;
  double lookahead_sec = 1.0;
  int sample_rate = 8000;
  int hop = 256;
  int window_length = 512;
  double crossfade_sec = 0.010;

  void validate() const {
    if (!(lookahead_sec > 0.0) || !(lookahead_sec <= segment_sec)) {
      throw ConfigError("stream plan: need 0 < lookahead <= segment length");
    }
    if (sample_rate <= 0 || hop <= 0) throw ConfigError("stream plan: bad sample rate or hop");
    if (step() < static_cast<std::size_t>(hop)) throw ConfigError("stream plan: look-ahead shorter than one hop");
    if (segment() < static_cast<std::size_t>(window_length)) throw ConfigError("stream plan: segment shorter than one window");
    if (crossfade_sec < 0.0) throw ConfigError("stream plan: negative crossfade");
  }
  std::size_t step() const {
    return static_cast<std::size_t>(std::floor(lookahead_sec * sample_rate / hop)) * static_cast<std::size_t>(hop);
  }
  std::size_t segment() const {
    const double hops = segment_sec / lookahead_sec * static_cast<double>(step()) / hop;
    return static_cast<std::size_t>(std::llround(hops)) * static_cast<std::size_t>(hop);
  }
  std::size_t crossfade() const { return static_cast<std::size_t>(std::llround(crossfade_sec * sample_rate)); }
};

struct SegmentWindow {
  std::size_t start = 0, end = 0;            // model input span
  std::size_t emit_start = 0, emit_end = 0;  // committed output span
};

/// Windows advance by one step; a final window is aligned to the end when
/// the steps do not land on it. Window 0 commits everything but its
/// look-ahead, later windows the slice just before their look-ahead, the
/// last window everything that remains. Inputs shorter than one segment
/// form a single window.
inline std::vector<SegmentWindow> plan_segments(std::size_t total, const SegmentPlan& plan) {
  plan.validate();
  const std::size_t seg = plan.segment(), step = plan.step();
  std::vector<SegmentWindow> w;
  if (total == 0) return w;
  if (total <= seg) return {{0, total, 0, total}};
  for (std::size_t s = 0; s + seg <= total; s += step) w.push_back({s, s + seg, 0, 0});
  if (w.back().end < total) w.push_back({total - seg, total, 0, 0});
  std::size_t emitted = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto& x = w[i];
    x.emit_start = emitted;
    std::size_t e = x.end - step > x.start ? x.end - step : x.end;  // step == segment: no look-ahead
    if (i + 1 == w.size()) e = total;
    x.emit_end = std::max(e, emitted);
    emitted = x.emit_end;
  }
  return w;
}

/// Channel assignment of `fresh` (perm[i]: fresh channel feeding output i)
/// minimising the summed L1 distance to `prev` over [0, n). Ties keep the
/// identity.
inline std::vector<int> align_segment(const std::vector<std::span<const double>>& prev,
                                      const std::vector<std::span<const double>>& fresh) {
  if (prev.size() != 2 || fresh.size() != 2) throw DimensionError("align_segment: two channels required");
  const std::size_t n = prev[0].size();
  for (int i = 0; i < 2; ++i) {
    if (prev[i].size() != n || fresh[i].size() != n) throw DimensionError("align_segment: overlap lengths differ");
  }
  auto l1 = [&](int a, int b) {
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) s += std::abs(prev[a][t] - fresh[b][t]);
    return s;
  };
  const double keep = l1(0, 0) + l1(1, 1), swap = l1(0, 1) + l1(1, 0);
  return swap < keep ? std::vector<int>{1, 0} : std::vector<int>{0, 1};
}

struct Emission {
  std::size_t start = 0;  // sample index in the input timeline
  std::vector<std::vector<double>> channels;
  std::size_t size() const { return channels.empty() ? 0 : channels[0].size(); }
};

struct PermutationEvent {
  std::size_t window = 0;
  std::size_t sample = 0;  // window start
  std::vector<int> perm;
  bool switched = false;
};

/// Push/poll state machine around a batch separator. Output for a sample is
/// released once the look-ahead after it has arrived (window 0: once a full
/// segment has arrived). Results do not depend on how the input is chunked.
class StreamSeparator {
 public:
  StreamSeparator(const Separator& model, SegmentPlan plan) : model_(model), plan_(plan) {
    plan_.hop = model.stft_config().hop;
    plan_.window_length = model.stft_config().window_length;
    plan_.validate();
    seg_ = plan_.segment();
    step_ = plan_.step();
  }

  const SegmentPlan& plan() const { return plan_; }

  void push(std::span<const double> chunk) {
    if (flushed_) throw StateError("stream: push after flush");
    buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
    received_ += chunk.size();
    while (next_start_ + seg_ <= received_) {
      process(next_start_, next_start_ + seg_, false);
      next_start_ += step_;
    }
    // keep what the next regular window and an end-aligned final window need
    if (received_ >= seg_) {
      const std::size_t keep = std::min(next_start_, received_ - seg_);
      if (keep > origin_) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(keep - origin_));
        origin_ = keep;
      }
    }
  }

  /// End of input: commits everything still held back.
  void flush() {
    if (flushed_) return;
    flushed_ = true;
    const std::size_t total = received_;
    if (total == 0) return;
    if (windows_ == 0) {
      process(0, total, true);  // shorter than one segment: one batch call
    } else if (last_end_ == total) {
      commit(emitted_, total, false);
    } else {
      process(total - seg_, total, true);
    }
  }

  /// Next ready piece (at most one step long), or nothing while waiting for input.
  std::optional<Emission> poll() {
    if (ready_.empty()) return std::nullopt;
    Emission e = std::move(ready_.front());
    ready_.pop_front();
    return e;
  }

  bool finished() const { return flushed_ && ready_.empty(); }
  std::size_t emitted() const { return emitted_; }
  const std::vector<PermutationEvent>& permutation_log() const { return log_; }

 private:
  void process(std::size_t start, std::size_t end, bool last) {
    Waveform w(std::vector<Real>(buffer_.begin() + static_cast<std::ptrdiff_t>(start - origin_),
                                 buffer_.begin() + static_cast<std::ptrdiff_t>(end - origin_)),
               plan_.sample_rate);
    SeparationResult r = model_.separate(w);
    std::vector<int> perm = perm_;
    // align on the last committed step that falls inside this window
    const std::size_t lo = std::max(start, emitted_ >= step_ ? emitted_ - step_ : 0);
    if (windows_ > 0 && emitted_ > lo) {
      const std::size_t n = emitted_ - lo;
      std::vector<std::span<const double>> prev, fresh;
      for (int i = 0; i < 2; ++i) {
        prev.emplace_back(out_tail_[i].data() + (out_tail_[i].size() - (emitted_ - lo)), n);
        fresh.emplace_back(r.estimates[i].samples.data() + (lo - start), n);
      }
      perm = align_segment(prev, fresh);
    }
    log_.push_back({windows_, start, perm, windows_ > 0 && perm != perm_});
    perm_ = perm;
    prev_ = std::move(cur_);
    prev_start_ = cur_start_;
    cur_start_ = start;
    cur_.assign(2, {});
    for (int i = 0; i < 2; ++i) cur_[i] = std::move(r.estimates[perm[i]].samples);
    ++windows_;
    last_end_ = end;
    std::size_t emit_end = last ? end : end - step_;
    if (emit_end <= start && !last) emit_end = end;  // window and step coincide
    commit(emitted_, std::max(emit_end, emitted_), true);
  }

  // Copies [a, b) of the current window out. With `fade`, the first few
  // samples blend in from the previous window with a raised-cosine ramp.
  void commit(std::size_t a, std::size_t b, bool fade) {
    if (b <= a) return;
    const std::size_t nf = fade && !prev_.empty() ? plan_.crossfade() : 0;
    std::vector<std::vector<double>> piece(2, std::vector<double>(b - a));
    for (int i = 0; i < 2; ++i) {
      for (std::size_t t = a; t < b; ++t) {
        double v = cur_[i][t - cur_start_];
        const std::size_t k = t - a;
        if (k < nf && t >= prev_start_ && t - prev_start_ < prev_[i].size()) {
          const double g = 0.5 * (1.0 - std::cos(std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(nf)));
          v = g * v + (1.0 - g) * prev_[i][t - prev_start_];
        }
        piece[i][k] = v;
      }
      auto& tail = out_tail_[i];
      tail.insert(tail.end(), piece[i].begin(), piece[i].end());
      if (tail.size() > step_) tail.erase(tail.begin(), tail.end() - static_cast<std::ptrdiff_t>(step_));
    }
    for (std::size_t s = a; s < b; s += step_) {
      const std::size_t e = std::min(b, s + step_);
      Emission em;
      em.start = s;
      for (int i = 0; i < 2; ++i) {
        em.channels.emplace_back(piece[i].begin() + static_cast<std::ptrdiff_t>(s - a),
                                 piece[i].begin() + static_cast<std::ptrdiff_t>(e - a));
      }
      ready_.push_back(std::move(em));
    }
    emitted_ = b;
  }

  const Separator& model_;
  SegmentPlan plan_;
  std::size_t seg_ = 0, step_ = 0;
  std::vector<double> buffer_;
  std::size_t origin_ = 0;     // input index of buffer_[0]
  std::size_t received_ = 0;
  std::size_t next_start_ = 0;
  std::size_t windows_ = 0;
  std::size_t last_end_ = 0;
  std::size_t emitted_ = 0;
  bool flushed_ = false;
  std::vector<int> perm_{0, 1};
  std::vector<std::vector<double>> cur_, prev_;
  std::size_t cur_start_ = 0, prev_start_ = 0;
  std::vector<double> out_tail_[2];
  std::deque<Emission> ready_;
  std::vector<PermutationEvent> log_;
};

/// Whole-signal convenience wrapper: feeds `chunk` samples at a time.
inline std::vector<Waveform> stream_separate(const Separator& model, const Waveform& mix, const SegmentPlan& plan,
                                             std::size_t chunk = 1600,
                                             std::vector<PermutationEvent>* log = nullptr) {
  SegmentPlan p = plan;
  p.sample_rate = mix.sample_rate;
  StreamSeparator s(model, p);
  std::vector<Waveform> out(2, Waveform(mix.size(), mix.sample_rate));
  auto drain = [&] {
    while (auto e = s.poll()) {
      for (int i = 0; i < 2; ++i) std::copy(e->channels[i].begin(), e->channels[i].end(), out[i].samples.begin() + static_cast<std::ptrdiff_t>(e->start));
    }
  };
  for (std::size_t t = 0; t < mix.size(); t += chunk) {
    const std::size_t n = std::min(chunk, mix.size() - t);
    s.push(std::span<const double>(mix.samples.data() + t, n));
    drain();
  }
  s.flush();
  drain();
  if (log) *log = s.permutation_log();
  return out;
}

}  // namespace septfa
