// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "septfa/core/error.hpp"

namespace septfa {

using Real = double;

/// Mono time-domain signal.
struct Waveform {
  std::vector<Real> samples;
  int sample_rate = 16000;

  Waveform() = default;
  Waveform(std::vector<Real> s, int fs) : samples(std::move(s)), sample_rate(fs) {}
  Waveform(std::size_t n, int fs) : samples(n, 0.0), sample_rate(fs) {}

  std::size_t size() const { return samples.size(); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
  std::span<const Real> view() const { return samples; }

  // Throws if the invariants (non-empty, positive rate, finite) do not hold.
  void validate(const std::string& what = "waveform") const {
    if (samples.empty()) throw LengthError(what + ": empty");
    if (sample_rate <= 0) throw DomainError(what + ": non-positive sample rate");
    for (Real v : samples) {
      if (!std::isfinite(v)) throw NumericError(what + ": non-finite sample");
    }
  }
};

inline double dot(std::span<const Real> a, std::span<const Real> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double energy(std::span<const Real> a) { return dot(a, a); }

inline double power(std::span<const Real> a) {
  return a.empty() ? 0.0 : energy(a) / static_cast<double>(a.size());
}

}  // namespace septfa
