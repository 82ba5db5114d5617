// include/tssl/selftest.h

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

#ifndef TSSL_SELFTEST_H_
#define TSSL_SELFTEST_H_

#include <string>
#include <vector>

#include "tssl/config.h"
#include "tssl/gradcheck.h"

namespace tssl {

/// Small config (under 10K parameters) for gradient checks: 16-dim inputs
/// and model, 2 heads, 3 blocks, 8-entry codebooks, APC shift 2.
TrainConfig ToyConfig();

struct LossCheck {
  std::string name;
  GradCheckResult result;
  size_t values_checked = 0;
  double seconds = 0.0;
};

/// Finite-difference checks of every pretraining loss through the real
/// batch-loss path on ToyConfig: apc, mpc, cl, the utterance loss alone
/// (alpha = 0) and the combined loss (alpha = 0.9, APC and CL).
/// Straight-through quantizers are checked twice: with the hard selection
/// (logit projections excluded, their gradient is not a derivative of the
/// forward value) and in soft mode ("*.soft") over every trainable
/// parameter. The frozen tower is never perturbed.
std::vector<LossCheck> RunLossGradChecks(const GradCheckOptions& options);

}  // namespace tssl

#endif  // TSSL_SELFTEST_H_
