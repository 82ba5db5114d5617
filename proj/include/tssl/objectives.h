// include/tssl/objectives.h

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

#ifndef TSSL_OBJECTIVES_H_
#define TSSL_OBJECTIVES_H_

#include <cstdint>
#include <span>

#include "tssl/mask_plan.h"
#include "tssl/quantizer.h"
#include "tssl/tape.h"

namespace tssl {

/// Masks exactly floor(proportion * T + 0.5) frames chosen uniformly without
/// replacement. Requires T > 0 and 0 < proportion < 1.
MaskPlan MakeMaskPlan(int num_frames, double proportion, uint64_t seed);

/// Projects an input-rate plan to the 2x downsampled rate: output frame t is
/// masked if input frame 2t or 2t+1 is.
MaskPlan DownsampleMaskPlan(const MaskPlan& plan);

/// 2x average pooling over time (ceil length) so reconstruction targets align
/// with the frontend output rate.
Tensor PoolTargets(const Tensor& features);

/// L1 auto-regressive prediction loss:
///   sum_{i < T-n} |x_{i+n} - y_i|_1 / ((T - n) * D).
/// Throws when n < 1 or n >= T.
Var ApcLoss(Tape& tape, const Tensor& targets, Var predictions, int shift);

/// Weighted L1 reconstruction loss: sum_i w_i |x_i - y_i|_1 / (sum_i w_i * D),
/// defined as 0 when no weight is set.
Var MpcLoss(Tape& tape, const Tensor& targets, Var reconstructions, const MaskPlan& plan);

/// Per-row infoNCE over codebook candidates with cosine similarity and
/// temperature kappa:
///   -log exp(cos(y_i, q_i)/k) / sum_v exp(cos(y_i, e_v)/k).
/// The candidate set is every entry; the selected entry's similarity is taken
/// against `positives` so gradient reaches the quantizer through its
/// straight-through path. Returns [m x 1].
Var InfoNceRows(Var queries, Var positives, std::span<const int> positive_index, Var entries,
                double kappa);

struct ClLoss {
  Var total;
  Var info_nce;
  Var diversity;
  /// No frame carried weight; the infoNCE term is then 0.
  bool empty_support = false;
};

/// Masked-frame contrastive loss of one utterance: weighted mean of
/// InfoNceRows over masked frames plus beta times the diversity loss of
/// `quant.usage`.
ClLoss ClFrameLoss(Var outputs, const QuantizeResult& quant, Var entries, const MaskPlan& plan,
                   double kappa, double beta);

/// Weighted infoNCE term alone, normalized by the weight sum; 0 on empty
/// support.
Var WeightedInfoNce(Var outputs, Var positives, std::span<const int> positive_index,
                    Var entries, const MaskPlan& plan, double kappa, bool* empty_support);

}  // namespace tssl

#endif  // TSSL_OBJECTIVES_H_
