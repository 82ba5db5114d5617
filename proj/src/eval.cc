// src/eval.cc

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

#include "tssl/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "tssl/common.h"

namespace tssl {

double Accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw ConfigError("accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                      std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw ConfigError("accuracy: no examples");
  size_t correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void ValidateTrials(std::span<const ScoredTrial> trials) {
  size_t targets = 0;
  for (const ScoredTrial& t : trials) {
    if (!std::isfinite(t.score)) throw ConfigError("non-finite trial score");
    targets += t.is_target;
  }
  if (targets == 0 || targets == trials.size())
    throw ConfigError("trial list needs at least one target and one non-target");
}

std::vector<OperatingPoint> DetPoints(std::span<const ScoredTrial> trials) {
  ValidateTrials(trials);
  std::vector<ScoredTrial> sorted(trials.begin(), trials.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredTrial& a, const ScoredTrial& b) { return a.score < b.score; });
  double pos = 0, neg = 0;
  for (const ScoredTrial& t : sorted) (t.is_target ? pos : neg) += 1;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<OperatingPoint> points;
  // Everything accepted below the lowest score.
  double fn = 0, fp = neg;
  points.push_back({-kInf, 0.0, 1.0});
  size_t i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i].score;
    // Moving the threshold past s rejects every trial scored s.
    while (i < sorted.size() && sorted[i].score == s) {
      if (sorted[i].is_target)
        fn += 1;
      else
        fp -= 1;
      ++i;
    }
    double threshold = kInf;
    if (i < sorted.size()) {
      threshold = s + (sorted[i].score - s) / 2;
      // Adjacent doubles: the midpoint can round down onto s.
      if (!(threshold > s)) threshold = sorted[i].score;
    }
    points.push_back({threshold, fn / pos, fp / neg});
  }
  return points;
}

OperatingPoint OperatingPointAt(std::span<const ScoredTrial> trials, double threshold) {
  ValidateTrials(trials);
  double tp = 0, fn = 0, fp = 0, tn = 0;
  for (const ScoredTrial& t : trials) {
    const bool accept = t.score >= threshold;
    if (t.is_target)
      (accept ? tp : fn) += 1;
    else
      (accept ? fp : tn) += 1;
  }
  return {threshold, fn / (fn + tp), fp / (fp + tn)};
}

RelativeFarResult RelativeFar(std::span<const ScoredTrial> candidate,
                              std::span<const ScoredTrial> baseline,
                              double baseline_threshold) {
  RelativeFarResult r;
  r.baseline = OperatingPointAt(baseline, baseline_threshold);
  if (r.baseline.far == 0.0) throw ConfigError("degenerate baseline: FAR is 0");
  std::vector<OperatingPoint> points = DetPoints(candidate);
  points.push_back(OperatingPointAt(candidate, baseline_threshold));
  const OperatingPoint* best = nullptr;
  for (const OperatingPoint& p : points) {
    if (!best) {
      best = &p;
      continue;
    }
    const double d = std::abs(p.frr - r.baseline.frr);
    const double bd = std::abs(best->frr - r.baseline.frr);
    if (d != bd) {
      if (d < bd) best = &p;
      continue;
    }
    const double t = std::abs(p.threshold - baseline_threshold);
    const double bt = std::abs(best->threshold - baseline_threshold);
    if (t < bt || (t == bt && p.threshold < best->threshold)) best = &p;
  }
  r.candidate = *best;
  r.relative_far = r.candidate.far / r.baseline.far;
  return r;
}

std::vector<ScoredTrial> ReadTrialsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trials file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trials file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "score,is_target")
    throw ConfigError("trials file " + path.string() + " must start with 'score,is_target'");
  std::vector<ScoredTrial> trials;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (comma == std::string::npos) throw ConfigError("malformed trial at " + where);
    ScoredTrial t;
    try {
      size_t used = 0;
      const std::string score = line.substr(0, comma);
      t.score = std::stod(score, &used);
      if (used != score.size()) throw ConfigError("bad score");
    } catch (const std::exception&) {
      throw ConfigError("malformed score at " + where);
    }
    const std::string label = line.substr(comma + 1);
    if (label == "1" || label == "true")
      t.is_target = true;
    else if (label == "0" || label == "false")
      t.is_target = false;
    else
      throw ConfigError("malformed is_target at " + where);
    trials.push_back(t);
  }
  return trials;
}

void WriteTrialsCsv(const std::filesystem::path& path, std::span<const ScoredTrial> trials) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write trials file " + path.string());
  out << "score,is_target\n";
  char buf[64];
  for (const ScoredTrial& t : trials) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d\n", t.score, t.is_target ? 1 : 0);
    out << buf;
  }
}

namespace {

nlohmann::json PointJson(const OperatingPoint& p) {
  nlohmann::json j;
  j["frr"] = p.frr;
  j["far"] = p.far;
  // JSON has no infinities.
  if (std::isfinite(p.threshold))
    j["threshold"] = p.threshold;
  else
    j["threshold"] = p.threshold > 0 ? "inf" : "-inf";
  return j;
}

}  // namespace

nlohmann::json RelativeFarReport(const RelativeFarResult& result) {
  nlohmann::json j = PointJson(result.candidate);
  j["relative_far"] = result.relative_far;
  j["baseline"] = PointJson(result.baseline);
  return j;
}

}  // namespace tssl
