// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Scale-invariant SDR, utterance-level permutation-invariant assignment and
// the frame-level binary cross-entropy used for the VAD head.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/nn/kernels.hpp"
#include "septfa/signal/waveform.hpp"
#include "septfa/vad/vad.hpp"

namespace septfa {

/// Values are clamped to +-kSiSdrCap dB so that a zero residual (or a zero
/// projection) still compares totally.
inline constexpr double kSiSdrCap = 200.0;

namespace detail {

struct SiSdrTerms {
  double alpha;     // <s_hat, s> / <s, s>
  double target;    // ||alpha s||^2
  double residual;  // ||alpha s - s_hat||^2
};

inline SiSdrTerms si_sdr_terms(std::span<const Real> s, std::span<const Real> s_hat) {
  if (s.size() != s_hat.size()) {
    throw DimensionError("si_sdr: length mismatch (" + std::to_string(s.size()) + " vs " +
                         std::to_string(s_hat.size()) + ")");
  }
  const double ss = energy(s);
  if (!(ss > 0.0)) throw DomainError("si_sdr: reference has zero energy");
  SiSdrTerms r{dot(s_hat, s) / ss, 0.0, 0.0};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = r.alpha * s[i];
    const double e = t - s_hat[i];
    r.target += t * t;
    r.residual += e * e;
  }
  return r;
}

inline double si_sdr_from_terms(const SiSdrTerms& r) {
  if (r.target <= 0.0) return -kSiSdrCap;  // silent or orthogonal estimate
  if (r.residual <= 0.0) return kSiSdrCap;
  return std::clamp(10.0 * std::log10(r.target / r.residual), -kSiSdrCap, kSiSdrCap);
}

}  // namespace detail

/// 10 log10(||a s||^2 / ||a s - s_hat||^2), a = <s_hat, s>/<s, s>, in dB.
inline double si_sdr(std::span<const Real> s, std::span<const Real> s_hat) {
  return detail::si_sdr_from_terms(detail::si_sdr_terms(s, s_hat));
}

inline double si_sdr(const Waveform& s, const Waveform& s_hat) { return si_sdr(s.view(), s_hat.view()); }

/// Taped SI-SDR of estimate `est` ([1, 1, T]) against a fixed reference.
inline nn::Var si_sdr(nn::Var est, std::shared_ptr<const std::vector<Real>> ref) {
  const auto& ev = est.value();
  const auto terms = detail::si_sdr_terms(*ref, ev.data);
  const double value = detail::si_sdr_from_terms(terms);
  const bool capped = terms.residual <= 0.0 || terms.target <= 0.0 || std::abs(value) >= kSiSdrCap;
  return est.tape->record(nn::Tensor3(nn::Shape{1, 1, 1}, value), est.tape->needs_grad(est) && !capped,
                          [est, ref, terms](nn::Tape& t, const nn::Tensor3& gy) {
    // d/ds_hat = 10/ln10 * (2 a s / ||a s||^2 + 2 e / ||e||^2), e = a s - s_hat
    const auto& sh = t.value(est.id).data;
    const auto& s = *ref;
    nn::Tensor3& g = t.grad_slot(est.id);
    const double k = 10.0 / std::log(10.0) * gy.data[0];
    const double ct = 2.0 * terms.alpha / terms.target;
    const double cr = 2.0 / terms.residual;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double e = terms.alpha * s[i] - sh[i];
      g.data[i] += k * (ct * s[i] + cr * e);
    }
  });
}

/// Separation part of a loss evaluation. perm[i] is the reference matched to
/// estimate i.
struct LossReport {
  double total = 0.0;
  std::vector<double> si_sdr_per_speaker;  // per estimate, under perm
  std::vector<int> chosen_permutation;
  double separation = 0.0;
  double bce = 0.0;
  double lambda_vad = 0.0;
};

inline const std::vector<std::vector<int>>& two_speaker_permutations() {
  static const std::vector<std::vector<int>> perms{{0, 1}, {1, 0}};
  return perms;
}

/// Picks the assignment with the largest mean SI-SDR given the SI-SDR of
/// every (estimate, reference) pair. Ties resolve to the identity.
inline std::vector<int> best_permutation(const std::vector<std::vector<double>>& pair_sdr) {
  const auto& perms = two_speaker_permutations();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> chosen = perms[0];
  for (const auto& p : perms) {
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) m += pair_sdr[i][p[i]];
    m /= static_cast<double>(p.size());
    if (m > best) {
      best = m;
      chosen = p;
    }
  }
  return chosen;
}

/// -mean SI-SDR under the best of the two assignments.
inline LossReport upit_loss(const std::vector<Waveform>& refs, const std::vector<Waveform>& ests) {
  if (refs.size() != 2 || ests.size() != 2) throw DimensionError("upit_loss: exactly two speakers required");
  std::vector<std::vector<double>> pair(2, std::vector<double>(2));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) pair[i][j] = si_sdr(refs[j], ests[i]);
  }
  LossReport r;
  r.chosen_permutation = best_permutation(pair);
  double m = 0.0;
  for (int i = 0; i < 2; ++i) {
    r.si_sdr_per_speaker.push_back(pair[i][r.chosen_permutation[i]]);
    m += r.si_sdr_per_speaker.back();
  }
  r.separation = -m / 2.0;
  r.total = r.separation;
  return r;
}

inline constexpr double kBceClamp = 1e-7;

/// -sum_i sum_l [v ln p + (1 - v) ln(1 - p)], p clamped to [1e-7, 1 - 1e-7].
inline double bce_loss(const VadProbs& p, const VadLabels& v) {
  if (p.speakers != v.speakers || p.frames != v.frames) throw DimensionError("bce_loss: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.p.size(); ++i) {
    const double q = std::clamp(p.p[i], kBceClamp, 1.0 - kBceClamp);
    s -= v.v[i] ? std::log(q) : std::log(1.0 - q);
  }
  return s;
}

inline double bce_loss_mean(const VadProbs& p, const VadLabels& v) {
  return bce_loss(p, v) / static_cast<double>(std::max<std::size_t>(1, p.p.size()));
}

/// Taped BCE, sum reduction. `probs` holds I*L entries in [speaker][frame] order.
inline nn::Var bce_loss(nn::Var probs, const VadLabels& v) {
  const auto& pv = probs.value();
  if (pv.size() != v.v.size()) throw DimensionError("bce_loss: probability/label size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double q = std::clamp(pv.data[i], kBceClamp, 1.0 - kBceClamp);
    s -= v.v[i] ? std::log(q) : std::log(1.0 - q);
  }
  return probs.tape->record(nn::Tensor3(nn::Shape{1, 1, 1}, s), probs.tape->needs_grad(probs),
                            [probs, labels = v.v](nn::Tape& t, const nn::Tensor3& gy) {
    const auto& pv = t.value(probs.id);
    nn::Tensor3& g = t.grad_slot(probs.id);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double q = pv.data[i];
      if (q < kBceClamp || q > 1.0 - kBceClamp) continue;  // clamped: flat
      g.data[i] += gy.data[0] * (labels[i] ? -1.0 / q : 1.0 / (1.0 - q));
    }
  });
}

/// Taped joint objective for one utterance.
struct JointLoss {
  nn::Var total;
  LossReport report;
};

inline JointLoss joint_loss(const std::vector<nn::Var>& ests,
                            const std::vector<std::shared_ptr<const std::vector<Real>>>& refs,
                            nn::Var vad_probs, const VadLabels* labels, double lambda_vad) {
  if (ests.size() != 2 || refs.size() != 2) throw DimensionError("joint_loss: exactly two speakers required");
  std::vector<std::vector<nn::Var>> pair(2, std::vector<nn::Var>(2));
  std::vector<std::vector<double>> pair_value(2, std::vector<double>(2));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      pair[i][j] = si_sdr(ests[i], refs[j]);
      pair_value[i][j] = pair[i][j].value().data[0];
    }
  }
  JointLoss out;
  LossReport& r = out.report;
  r.chosen_permutation = best_permutation(pair_value);
  r.lambda_vad = lambda_vad;
  const auto& perm = r.chosen_permutation;
  nn::Var sep = nn::scale(nn::add(pair[0][perm[0]], pair[1][perm[1]]), -0.5);
  r.si_sdr_per_speaker = {pair_value[0][perm[0]], pair_value[1][perm[1]]};
  r.separation = sep.value().data[0];
  out.total = sep;
  if (lambda_vad != 0.0 && labels != nullptr && vad_probs.valid()) {
    const VadLabels aligned = permute_rows(*labels, perm);
    nn::Var b = bce_loss(vad_probs, aligned);
    r.bce = b.value().data[0];
    out.total = nn::add(sep, nn::scale(b, lambda_vad));
  }
  r.total = out.total.value().data[0];
  return out;
}

}  // namespace septfa
