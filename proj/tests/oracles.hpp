// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "septfa/signal/waveform.hpp"
#include "septfa/train/objectives.hpp"

namespace septfa::test {

// Plain textbook SI-SDR in long double, used as an oracle.
inline long double oracle_si_sdr(const std::vector<double>& s, const std::vector<double>& sh) {
  long double ss = 0, sx = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ss += static_cast<long double>(s[i]) * s[i];
    sx += static_cast<long double>(s[i]) * sh[i];
  }
  const long double a = sx / ss;
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    num += (a * s[i]) * (a * s[i]);
    den += (a * s[i] - sh[i]) * (a * s[i] - sh[i]);
  }
  return 10.0L * std::log10(num / den);
}

// Exhaustive search written independently of the library: enumerate both
// assignments with std::next_permutation and keep the first strict maximum.
inline std::vector<int> exhaustive(const std::vector<Waveform>& refs, const std::vector<Waveform>& ests, double* best) {
  std::vector<int> p{0, 1}, chosen;
  *best = -1e300;
  do {
    const double m = (si_sdr(refs[p[0]], ests[0]) + si_sdr(refs[p[1]], ests[1])) / 2.0;
    if (m > *best) {
      *best = m;
      chosen = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return chosen;
}

}  // namespace septfa::test
