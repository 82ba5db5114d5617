// include/tssl/optimizer.h

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

#ifndef TSSL_OPTIMIZER_H_
#define TSSL_OPTIMIZER_H_

#include <span>
#include <vector>

#include "tssl/tape.h"

namespace tssl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters with requires_grad == false are
/// never touched.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, const AdamConfig& config = {});

  void Step(double lr);
  long step_count() const { return t_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  std::vector<Parameter*> params_;
  std::vector<Moments> moments_;
  AdamConfig config_;
  long t_ = 0;
};

/// lr0 * decay^epoch, epochs counted from 0.
double LearningRate(double lr0, double decay, int epoch);

/// L2 norm over the gradients of trainable parameters.
double GlobalGradNorm(std::span<Parameter* const> params);

/// Rescales gradients so their global norm is at most max_norm; returns the
/// norm before clipping. max_norm <= 0 disables clipping.
double ClipGradNorm(std::span<Parameter* const> params, double max_norm);

}  // namespace tssl

#endif  // TSSL_OPTIMIZER_H_
