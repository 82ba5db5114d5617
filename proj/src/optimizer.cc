// src/optimizer.cc

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

#include "tssl/optimizer.h"

#include <cmath>

namespace tssl {

Adam::Adam(std::vector<Parameter*> params, const AdamConfig& config)
    : params_(std::move(params)), config_(config) {
  moments_.reserve(params_.size());
  for (Parameter* p : params_)
    moments_.push_back({Tensor(p->value.rows(), p->value.cols()),
                        Tensor(p->value.rows(), p->value.cols())});
}

void Adam::Step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.requires_grad) continue;
    Tensor& m = moments_[i].m;
    Tensor& v = moments_[i].v;
    for (size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

double LearningRate(double lr0, double decay, int epoch) {
  return lr0 * std::pow(decay, static_cast<double>(epoch));
}

double GlobalGradNorm(std::span<Parameter* const> params) {
  double s = 0.0;
  for (const Parameter* p : params) {
    if (!p->requires_grad) continue;
    for (double g : p->grad.values()) s += g * g;
  }
  return std::sqrt(s);
}

double ClipGradNorm(std::span<Parameter* const> params, double max_norm) {
  const double norm = GlobalGradNorm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) {
      if (!p->requires_grad) continue;
      for (double& g : p->grad.values()) g *= scale;
    }
  }
  return norm;
}

}  // namespace tssl
