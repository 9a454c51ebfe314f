// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "septfa/train/objectives.hpp"
#include "septfa/train/optimizer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace septfa {
namespace {

using test::exhaustive;
using test::oracle_si_sdr;

TEST(SiSdr, HandCase) {
  const std::vector<double> s{1.0, 0.0}, sh{1.0, 1.0};
  EXPECT_EQ(si_sdr(s, sh), 0.0);
}

TEST(SiSdr, MatchesOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = test::random_wave(500, rng).samples;
    auto sh = test::random_wave(500, rng).samples;
    for (std::size_t i = 0; i < s.size(); ++i) sh[i] += 0.7 * s[i];
    EXPECT_NEAR(si_sdr(s, sh), static_cast<double>(oracle_si_sdr(s, sh)), 1e-9);
  }
}

TEST(SiSdr, ScaleInvariance) {
  Rng rng(2);
  auto s = test::random_wave(1000, rng).samples;
  auto sh = test::random_wave(1000, rng).samples;
  for (std::size_t i = 0; i < s.size(); ++i) sh[i] += s[i];
  const double base = si_sdr(s, sh);
  for (double c : {1e-3, 0.25, 3.0, 1e3, -2.0}) {
    auto scaled = sh;
    for (double& v : scaled) v *= c;
    EXPECT_NEAR(si_sdr(s, scaled), base, 1e-9) << c;
  }
  for (double c : {1e-3, 7.0}) {
    auto scaled = s;
    for (double& v : scaled) v *= c;
    EXPECT_NEAR(si_sdr(scaled, sh), base, 1e-9) << c;
  }
}

TEST(SiSdr, EdgeCases) {
  const std::vector<double> s{1.0, -2.0, 0.5};
  EXPECT_EQ(si_sdr(s, s), kSiSdrCap);
  EXPECT_EQ(si_sdr(s, std::vector<double>{0.0, 0.0, 0.0}), -kSiSdrCap);
  EXPECT_THROW(si_sdr(s, std::vector<double>{1.0}), DimensionError);
  EXPECT_THROW(si_sdr(std::vector<double>{0.0, 0.0, 0.0}, s), DomainError);
}

TEST(SiSdr, TapedGradientMatchesDifferences) {
  Rng rng(3);
  auto ref = std::make_shared<const std::vector<double>>(test::random_wave(64, rng).samples);
  auto est = test::random_wave(64, rng).samples;
  for (std::size_t i = 0; i < est.size(); ++i) est[i] += (*ref)[i];
  nn::ParamStore ps;
  const int id = ps.add("est", nn::Shape{1, 1, 64});
  ps.values(id) = est;
  nn::Tape t;
  nn::Var v = si_sdr(t.parameter(ps, id), ref);
  EXPECT_NEAR(v.value().data[0], si_sdr(*ref, est), 1e-12);
  nn::GradBuffer g = ps.zero_grads();
  t.backward(v, g);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double h = 1e-6;
    auto up = est, dn = est;
    up[i] += h;
    dn[i] -= h;
    const double fd = (si_sdr(*ref, up) - si_sdr(*ref, dn)) / (2 * h);
    EXPECT_NEAR(g[0][i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(SiSdr, CappedValueHasNoGradient) {
  auto ref = std::make_shared<const std::vector<double>>(std::vector<double>{1.0, 2.0, 3.0});
  nn::ParamStore ps;
  const int id = ps.add("est", nn::Shape{1, 1, 3});
  ps.values(id) = *ref;
  nn::Tape t;
  nn::Var v = si_sdr(t.parameter(ps, id), ref);
  EXPECT_EQ(v.value().data[0], kSiSdrCap);
  EXPECT_FALSE(t.needs_grad(v));
}

TEST(Upit, MatchesExhaustiveSearch) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Waveform> refs{test::random_wave(256, rng), test::random_wave(256, rng)};
    std::vector<Waveform> ests{test::random_wave(256, rng), test::random_wave(256, rng)};
    const double mix = rng.uniform(0.0, 2.0);
    for (int i = 0; i < 2; ++i) {
      for (std::size_t t = 0; t < 256; ++t) ests[i].samples[t] += mix * refs[1 - i].samples[t] * rng.uniform();
    }
    double best = 0.0;
    const auto want = exhaustive(refs, ests, &best);
    const LossReport r = upit_loss(refs, ests);
    ASSERT_EQ(r.chosen_permutation, want) << trial;
    ASSERT_EQ(r.separation, -best) << trial;
  }
}

TEST(Upit, SwappedEstimatesChooseSwap) {
  Rng rng(5);
  std::vector<Waveform> refs{test::random_wave(300, rng), test::random_wave(300, rng)};
  const LossReport r = upit_loss(refs, {refs[1], refs[0]});
  EXPECT_EQ(r.chosen_permutation, (std::vector<int>{1, 0}));
  EXPECT_EQ(r.separation, -kSiSdrCap);
}

TEST(Upit, TiesResolveToIdentity) {
  EXPECT_EQ(best_permutation({{1.0, 1.0}, {1.0, 1.0}}), (std::vector<int>{0, 1}));
  EXPECT_EQ(best_permutation({{0.0, 2.0}, {2.0, 0.0}}), (std::vector<int>{1, 0}));
  Rng rng(6);
  std::vector<Waveform> refs{test::random_wave(100, rng), test::random_wave(100, rng)};
  EXPECT_THROW(upit_loss({refs[0]}, refs), DimensionError);
}

TEST(Bce, HandValues) {
  VadProbs p{1, 2, {0.8, 0.25}};
  VadLabels v(1, 2);
  v.at(0, 0) = 1;
  EXPECT_NEAR(bce_loss(p, v), -std::log(0.8) - std::log(0.75), 1e-15);
  EXPECT_NEAR(bce_loss_mean(p, v), (-std::log(0.8) - std::log(0.75)) / 2, 1e-15);
  VadProbs hard{1, 2, {0.0, 1.0}};
  EXPECT_NEAR(bce_loss(hard, v), -2 * std::log(1e-7), 1e-9);
  EXPECT_THROW(bce_loss(VadProbs{2, 1, {0.5, 0.5}}, v), DimensionError);
}

TEST(Bce, TapedGradient) {
  VadLabels v(2, 3);
  v.at(0, 1) = v.at(1, 0) = v.at(1, 2) = 1;
  std::vector<double> p{0.3, 0.6, 0.9, 0.2, 0.5, 0.7};
  nn::ParamStore ps;
  const int id = ps.add("p", nn::Shape{2, 1, 3});
  ps.values(id) = p;
  nn::Tape t;
  nn::Var b = bce_loss(t.parameter(ps, id), v);
  nn::GradBuffer g = ps.zero_grads();
  t.backward(b, g);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double want = v.v[i] ? -1.0 / p[i] : 1.0 / (1.0 - p[i]);
    EXPECT_NEAR(g[0][i], want, 1e-12);
  }
}

TEST(JointLoss, LabelsFollowThePermutation) {
  Rng rng(7);
  auto r0 = std::make_shared<const std::vector<double>>(test::random_wave(200, rng).samples);
  auto r1 = std::make_shared<const std::vector<double>>(test::random_wave(200, rng).samples);
  nn::Tape t;
  // estimate 0 resembles reference 1 and vice versa
  std::vector<double> e0 = *r1, e1 = *r0;
  for (auto& x : e0) x += 0.1 * rng.uniform(-1, 1);
  for (auto& x : e1) x += 0.1 * rng.uniform(-1, 1);
  std::vector<nn::Var> ests{t.constant(nn::Tensor3({1, 1, 200}, e0)), t.constant(nn::Tensor3({1, 1, 200}, e1))};
  VadLabels lab(2, 2);
  lab.at(0, 0) = 1;  // speaker 0 active in frame 0 only
  lab.at(1, 1) = 1;
  // probs for estimate rows: row 0 active in frame 1 (speaker 1), row 1 in frame 0
  nn::Var probs = t.constant(nn::Tensor3({2, 1, 2}, std::vector<double>{0.1, 0.9, 0.9, 0.1}));
  JointLoss jl = joint_loss(ests, {r0, r1}, probs, &lab, 0.1);
  EXPECT_EQ(jl.report.chosen_permutation, (std::vector<int>{1, 0}));
  EXPECT_NEAR(jl.report.bce, -4 * std::log(0.9), 1e-12);
  EXPECT_NEAR(jl.report.total, jl.report.separation + 0.1 * jl.report.bce, 1e-12);
  JointLoss no_vad = joint_loss(ests, {r0, r1}, probs, &lab, 0.0);
  EXPECT_EQ(no_vad.report.total, no_vad.report.separation);
  EXPECT_EQ(no_vad.report.bce, 0.0);
}

TEST(Optimizer, ClipScalesToMaxNorm) {
  nn::GradBuffer g{{3.0, 4.0}, {0.0}};
  EXPECT_DOUBLE_EQ(clip_gradients(g, 1.0), 5.0);
  EXPECT_NEAR(nn::global_norm(g), 1.0, 1e-15);
  nn::GradBuffer small{{0.3, 0.4}};
  EXPECT_DOUBLE_EQ(clip_gradients(small, 5.0), 0.5);
  EXPECT_EQ(small[0][0], 0.3);
}

TEST(Optimizer, NanGradientNamesParameter) {
  nn::ParamStore ps;
  ps.add("alpha", nn::Shape{1, 1, 1});
  ps.add("beta", nn::Shape{1, 1, 2});
  nn::GradBuffer g{{0.0}, {1.0, std::nan("")}};
  try {
    clip_gradients(g, 5.0, &ps);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
  }
}

TEST(Optimizer, AdamFirstStepsMatchHandComputation) {
  nn::ParamStore ps;
  const int id = ps.add("w", nn::Shape{1, 1, 2});
  ps.values(id) = {1.0, -1.0};
  AdamConfig cfg;
  Adam adam(ps, cfg);
  adam.step(ps, {{0.5, -2.0}});
  // bias-corrected first step moves each coordinate by lr * g / (|g| + eps')
  EXPECT_NEAR(ps.values(id)[0], 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(ps.values(id)[1], -1.0 + 1e-3 * 2.0 / (2.0 + 1e-8), 1e-15);
  const double w1 = ps.values(id)[0];
  adam.step(ps, {{0.25, -2.0}});
  const double m = 0.9 * 0.1 * 0.5 + 0.1 * 0.25, v = 0.999 * 0.001 * 0.25 + 0.001 * 0.0625;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(ps.values(id)[0], w1 - 1e-3 * mh / (std::sqrt(vh) + 1e-8), 1e-12);
  EXPECT_EQ(adam.state().step, 2);
}

}  // namespace
}  // namespace septfa
