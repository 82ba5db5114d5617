// tests/det_oracle.h

// Copyright 2026  The tssl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TSSL_TESTS_DET_ORACLE_H_
#define TSSL_TESTS_DET_ORACLE_H_

#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "tssl/common.h"
#include "tssl/eval.h"

namespace tssl::testing {

/// Rates at one threshold by direct counting.
inline OperatingPoint BruteForcePoint(std::span<const ScoredTrial> trials, double threshold) {
  long tp = 0, fn = 0, fp = 0, tn = 0;
  for (const ScoredTrial& t : trials) {
    const bool accept = t.score >= threshold;
    if (t.is_target) accept ? ++tp : ++fn;
    else accept ? ++fp : ++tn;
  }
  return {threshold, static_cast<double>(fn) / static_cast<double>(fn + tp),
          static_cast<double>(fp) / static_cast<double>(fp + tn)};
}

/// Every distinct threshold: -inf, the midpoint between each pair of
/// consecutive distinct scores, +inf. Each point counted in O(n).
inline std::vector<OperatingPoint> BruteForceDet(std::span<const ScoredTrial> trials) {
  const double inf = std::numeric_limits<double>::infinity();
  std::set<double> distinct;
  for (const ScoredTrial& t : trials) distinct.insert(t.score);
  std::vector<double> thresholds{-inf};
  for (auto it = distinct.begin(); it != distinct.end(); ++it) {
    auto next = std::next(it);
    if (next == distinct.end()) break;
    double mid = *it + (*next - *it) / 2;
    if (!(mid > *it)) mid = *next;
    thresholds.push_back(mid);
  }
  thresholds.push_back(inf);
  std::vector<OperatingPoint> out;
  for (double th : thresholds) out.push_back(BruteForcePoint(trials, th));
  return out;
}

/// Relative FAR by exhaustive search over every DET threshold and the
/// baseline threshold: closest FRR, then threshold closest to the baseline
/// threshold, then the lower threshold.
inline double BruteForceRelativeFar(std::span<const ScoredTrial> candidate,
                                    std::span<const ScoredTrial> baseline, double threshold,
                                    OperatingPoint* chosen = nullptr) {
  const OperatingPoint base = BruteForcePoint(baseline, threshold);
  std::vector<OperatingPoint> pts = BruteForceDet(candidate);
  pts.push_back(BruteForcePoint(candidate, threshold));
  OperatingPoint best = pts[0];
  for (const OperatingPoint& p : pts) {
    const double d = std::abs(p.frr - base.frr), bd = std::abs(best.frr - base.frr);
    const double t = std::abs(p.threshold - threshold), bt = std::abs(best.threshold - threshold);
    if (d < bd || (d == bd && (t < bt || (t == bt && p.threshold < best.threshold)))) best = p;
  }
  if (chosen) *chosen = best;
  return best.far / base.far;
}

inline std::vector<ScoredTrial> RandomTrials(Rng& rng, int max_size) {
  const int n = 2 + static_cast<int>(rng.Bits() % static_cast<uint64_t>(max_size - 1));
  std::vector<ScoredTrial> trials(n);
  // Coarse grid scores on half the sets to force ties.
  const bool coarse = rng.Bits() % 2 == 0;
  for (auto& t : trials) {
    t.is_target = rng.Bits() % 3 == 0;
    const double s = rng.Uniform() * 0.6 + (t.is_target ? 0.4 : 0.0);
    t.score = coarse ? std::round(s * 20) / 20 : s;
  }
  trials[0].is_target = true;
  trials[1].is_target = false;
  return trials;
}

}  // namespace tssl::testing

#endif  // TSSL_TESTS_DET_ORACLE_H_
