// src/gradcheck.cc

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

#include "tssl/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "tssl/common.h"

namespace tssl {

double RelativeError(double analytic, double numeric) {
  double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

namespace {

double Evaluate(const LossBuilder& loss) {
  Tape tape;
  return loss(tape).scalar();
}

std::vector<std::pair<int, size_t>> SampleCoordinates(std::span<Parameter* const> params,
                                                      const GradCheckOptions& opt) {
  std::vector<std::pair<int, size_t>> coords;
  size_t total = 0;
  for (Parameter* p : params) total += p->value.size();
  if (opt.all_coordinates || total <= static_cast<size_t>(opt.samples)) {
    for (int i = 0; i < static_cast<int>(params.size()); ++i)
      for (size_t k = 0; k < params[i]->value.size(); ++k) coords.emplace_back(i, k);
    return coords;
  }
  Rng rng(opt.seed, kStreamGradCheck);
  int n = static_cast<int>(params.size());
  if (opt.samples >= n) {
    for (int i = 0; i < n; ++i)
      coords.emplace_back(i, rng.Bits() % params[i]->value.size());
  }
  while (static_cast<int>(coords.size()) < opt.samples) {
    size_t flat = rng.Bits() % total;
    int i = 0;
    while (flat >= params[i]->value.size()) flat -= params[i++]->value.size();
    coords.emplace_back(i, flat);
  }
  return coords;
}

}  // namespace

GradCheckResult GradCheck(const LossBuilder& loss, std::span<Parameter* const> params,
                          const GradCheckOptions& opt) {
  if (!(opt.step >= 1e-6 && opt.step <= 1e-4))
    throw ConfigError("grad check step must lie in [1e-6, 1e-4]");
  for (Parameter* p : params) p->ZeroGrad();
  {
    Tape tape;
    Var l = loss(tape);
    if (!std::isfinite(l.scalar())) throw NumericalError("grad check: loss is not finite");
    tape.Backward(l);
  }
  GradCheckResult result;
  for (auto [pi, k] : SampleCoordinates(params, opt)) {
    Parameter& p = *params[pi];
    double analytic = p.requires_grad ? p.grad[k] : 0.0;
    double orig = p.value[k];
    p.value[k] = orig + opt.step;
    double up = Evaluate(loss);
    p.value[k] = orig - opt.step;
    double down = Evaluate(loss);
    p.value[k] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("grad check: non-finite loss when perturbing " + p.name + "[" +
                           std::to_string(k) + "]");
    double numeric = (up - down) / (2.0 * opt.step);
    double err = RelativeError(analytic, numeric);
    ++result.coordinates;
    if (err > result.max_rel_error || result.coordinates == 1) {
      result.max_rel_error = err;
      result.worst_param = p.name;
      result.worst_index = k;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace tssl
