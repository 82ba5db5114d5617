// include/tssl/mask_plan.h

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

#ifndef TSSL_MASK_PLAN_H_
#define TSSL_MASK_PLAN_H_

#include <cstdint>
#include <vector>

namespace tssl {

/// Per-frame mask indicator and loss weights: weight 1.0 on masked frames,
/// 0.0 on unmasked ones.
struct MaskPlan {
  std::vector<uint8_t> mask;
  std::vector<double> weights;

  int length() const { return static_cast<int>(mask.size()); }
  int num_masked() const;
  static MaskPlan None(int length);
  static MaskPlan FromMask(std::vector<uint8_t> mask);
};

}  // namespace tssl

#endif  // TSSL_MASK_PLAN_H_
