// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include "septfa/stream/stream.hpp"
#include "toy_data.hpp"

namespace septfa {
namespace {

Waveform noise_signal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w(n, 8000);
  for (auto& v : w.samples) v = 0.1 * rng.normal();
  return w;
}

TEST(SegmentPlanTest, StepIsWholeHops) {
  SegmentPlan p;
  EXPECT_EQ(p.step(), 31u * 256u);
  EXPECT_EQ(p.segment(), 3u * p.step());
  EXPECT_EQ(p.crossfade(), 80u);
  p.lookahead_sec = 0.01;
  EXPECT_THROW(p.validate(), ConfigError);
  p.lookahead_sec = 4.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(SegmentPlanTest, EmissionsTileTheInput) {
  SegmentPlan p;
  for (std::size_t total : {1000u, 23808u, 23809u, 31744u, 40000u, 80000u, 123457u}) {
    auto w = plan_segments(total, p);
    ASSERT_FALSE(w.empty());
    std::size_t at = 0;
    for (const auto& x : w) {
      EXPECT_EQ(x.emit_start, at);
      EXPECT_GE(x.emit_start, x.start);
      EXPECT_LE(x.emit_end, x.end);
      EXPECT_LE(x.end, total);
      at = x.emit_end;
    }
    EXPECT_EQ(at, total) << total;
    EXPECT_EQ(w.back().end, total);
  }
}

TEST(SegmentPlanTest, FiveSecondsThreeSecondWindowOneSecondStep) {
  SegmentPlan p;
  p.sample_rate = 8192;  // one second is exactly 32 hops
  const std::size_t sec = 8192;
  auto w = plan_segments(5 * sec, p);
  ASSERT_EQ(w.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(w[k].start, k * sec);
    EXPECT_EQ(w[k].end, (k + 3) * sec);
  }
  EXPECT_EQ(w[0].emit_end, 2 * sec);
  EXPECT_EQ(w[1].emit_start, 2 * sec);
  EXPECT_EQ(w[1].emit_end, 3 * sec);
  EXPECT_EQ(w[2].emit_end, 5 * sec);
}

TEST(SegmentPlanTest, DegeneratePlanHasDisjointWindows) {
  SegmentPlan p;
  p.lookahead_sec = p.segment_sec;
  auto w = plan_segments(4 * p.segment(), p);
  ASSERT_EQ(w.size(), 4u);
  for (const auto& x : w) {
    EXPECT_EQ(x.emit_start, x.start);
    EXPECT_EQ(x.emit_end, x.end);
  }
}

TEST(AlignSegmentTest, PicksLowerL1Assignment) {
  std::vector<double> a{1, 2, 3, 4}, b{-1, 0, 5, 1};
  using S = std::span<const double>;
  EXPECT_EQ(align_segment({S(a), S(b)}, {S(a), S(b)}), (std::vector<int>{0, 1}));
  EXPECT_EQ(align_segment({S(a), S(b)}, {S(b), S(a)}), (std::vector<int>{1, 0}));
  EXPECT_EQ(align_segment({S(a), S(a)}, {S(b), S(b)}), (std::vector<int>{0, 1}));
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> x(4, std::vector<double>(50));
    for (auto& v : x) for (auto& e : v) e = rng.normal();
    double best = 1e300;
    std::vector<int> oracle;
    for (std::vector<int> p : {std::vector<int>{0, 1}, std::vector<int>{1, 0}}) {
      double d = 0.0;
      for (int i = 0; i < 2; ++i) for (int t = 0; t < 50; ++t) d += std::abs(x[i][t] - x[2 + p[i]][t]);
      if (d < best) best = d, oracle = p;
    }
    EXPECT_EQ(align_segment({S(x[0]), S(x[1])}, {S(x[2]), S(x[3])}), oracle);
  }
  std::vector<double> c{1, 2};
  EXPECT_THROW(align_segment({S(a), S(c)}, {S(a), S(b)}), DimensionError);
}

class StreamTest : public ::testing::Test {
 protected:
  Separator model{test::tiny_config(), 5};
};

TEST_F(StreamTest, ChunkingDoesNotChangeOutput) {
  const Waveform mix = noise_signal(45000, 1);
  SegmentPlan p;
  auto ref = stream_separate(model, mix, p, 1600);
  for (std::size_t chunk : {160u, 7u, 45000u}) {
    auto out = stream_separate(model, mix, p, chunk);
    for (int i = 0; i < 2; ++i) EXPECT_EQ(out[i].samples, ref[i].samples) << chunk;
  }
}

TEST_F(StreamTest, LatencyAndPieceSizes) {
  const Waveform mix = noise_signal(40000, 2);
  SegmentPlan p;
  StreamSeparator s(model, p);
  const std::size_t seg = p.segment(), step = p.step();
  s.push(std::span<const double>(mix.samples.data(), seg - 1));
  EXPECT_FALSE(s.poll().has_value());
  s.push(std::span<const double>(mix.samples.data() + seg - 1, 1));
  std::size_t got = 0;
  while (auto e = s.poll()) {
    EXPECT_EQ(e->start, got);
    EXPECT_EQ(e->size(), step);
    got += e->size();
  }
  EXPECT_EQ(got, seg - step);
  s.push(std::span<const double>(mix.samples.data() + seg, step));
  auto e = s.poll();
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(e->start, got);
  EXPECT_EQ(e->size(), step);
  EXPECT_FALSE(s.poll().has_value());
  s.push(std::span<const double>(mix.samples.data() + seg + step, mix.size() - seg - step));
  s.flush();
  std::size_t end = got + step;
  while (auto x = s.poll()) {
    EXPECT_EQ(x->start, end);
    EXPECT_LE(x->size(), step);
    end += x->size();
  }
  EXPECT_EQ(end, mix.size());
  EXPECT_TRUE(s.finished());
  EXPECT_THROW(s.push(std::span<const double>(mix.samples.data(), 1)), StateError);
}

TEST_F(StreamTest, SilenceStaysSilent) {
  const Waveform mix(40000, 8000);
  auto out = stream_separate(model, mix, SegmentPlan{});
  for (const auto& ch : out) {
    for (double v : ch.samples) ASSERT_EQ(v, 0.0);
  }
}

TEST_F(StreamTest, ShortInputIsOneBatchCall) {
  const Waveform mix = noise_signal(12000, 3);
  auto out = stream_separate(model, mix, SegmentPlan{}, 500);
  const auto batch = model.separate(mix);
  for (int i = 0; i < 2; ++i) EXPECT_EQ(out[i].samples, batch.estimates[i].samples);
}

TEST_F(StreamTest, EmittedSamplesComeFromTheirWindow) {
  const Waveform mix = noise_signal(40000, 4);
  SegmentPlan p;
  std::vector<PermutationEvent> log;
  auto out = stream_separate(model, mix, p, 1600, &log);
  auto windows = plan_segments(mix.size(), p);
  ASSERT_EQ(log.size(), windows.size());
  EXPECT_FALSE(log[0].switched);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    EXPECT_EQ(log[k].sample, w.start);
    Waveform seg(std::vector<Real>(mix.samples.begin() + w.start, mix.samples.begin() + w.end), 8000);
    const auto r = model.separate(seg);
    const std::size_t from = w.emit_start + (k == 0 ? 0 : p.crossfade());
    for (int i = 0; i < 2; ++i) {
      const auto& est = r.estimates[log[k].perm[i]].samples;
      for (std::size_t t = from; t < w.emit_end; ++t) ASSERT_EQ(out[i].samples[t], est[t - w.start]) << k;
    }
  }
}

}  // namespace
}  // namespace septfa
