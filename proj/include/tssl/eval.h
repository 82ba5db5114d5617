// include/tssl/eval.h

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

#ifndef TSSL_EVAL_H_
#define TSSL_EVAL_H_

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace tssl {

struct ScoredTrial {
  double score = 0.0;
  bool is_target = false;
};

/// A trial is accepted when score >= threshold.
/// frr = FN / (FN + TP), far = FP / (FP + TN).
struct OperatingPoint {
  double threshold = 0.0;
  double frr = 0.0;
  double far = 0.0;
};

/// Fraction of positions where predictions equal labels. Throws ConfigError
/// on empty input or a length mismatch.
double Accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Throws ConfigError unless every score is finite and both classes occur.
void ValidateTrials(std::span<const ScoredTrial> trials);

/// One point per threshold in {-inf, midpoints between consecutive distinct
/// scores, +inf}, in increasing threshold order.
std::vector<OperatingPoint> DetPoints(std::span<const ScoredTrial> trials);

OperatingPoint OperatingPointAt(std::span<const ScoredTrial> trials, double threshold);

struct RelativeFarResult {
  OperatingPoint baseline;
  OperatingPoint candidate;
  double relative_far = 0.0;
};

/// Fixes the baseline operating point at `baseline_threshold`, picks the
/// candidate point whose FRR is closest to the baseline FRR and returns the
/// FAR ratio candidate / baseline. Candidate points are DetPoints plus the
/// point at `baseline_threshold` itself; FRR ties go to the threshold
/// nearest `baseline_threshold`, then to the lower one. Throws ConfigError
/// ("degenerate baseline") when the baseline FAR is 0.
RelativeFarResult RelativeFar(std::span<const ScoredTrial> candidate,
                              std::span<const ScoredTrial> baseline,
                              double baseline_threshold = 0.5);

/// CSV with header "score,is_target"; is_target is 0/1 or false/true.
std::vector<ScoredTrial> ReadTrialsCsv(const std::filesystem::path& path);
void WriteTrialsCsv(const std::filesystem::path& path, std::span<const ScoredTrial> trials);

/// {frr, far, threshold, relative_far} of the candidate point, plus the
/// baseline point.
nlohmann::json RelativeFarReport(const RelativeFarResult& result);

}  // namespace tssl

#endif  // TSSL_EVAL_H_
