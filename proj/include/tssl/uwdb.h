// include/tssl/uwdb.h

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

#ifndef TSSL_UWDB_H_
#define TSSL_UWDB_H_

#include <vector>

#include "json.hpp"
#include "tssl/model.h"
#include "tssl/quantizer.h"
#include "tssl/tape.h"

namespace tssl {

/// Utterance-wise distinction boosting. A frozen copy of the step-1 encoder
/// embeds the unmasked input; its pooled block output is quantized by a
/// small utterance codebook whose selected entry is the positive anchor and
/// whose other entries are negatives for the trainable encoder's pooled
/// embedding.
struct UwdbConfig {
  double alpha = 0.9;
  double beta = 0.1;
  double kappa = 0.1;
  int codebook_size = 32;
  /// 1-based transformer block whose output is mean-pooled.
  int tap_layer = 2;

  void Validate(int n_blocks) const;
  nlohmann::json ToJson() const;
  static UwdbConfig FromJson(const nlohmann::json& j);
};

/// Mean over time of block `tap_layer`'s output, [1 x d_model].
Var UtteranceEmbedding(const EncoderOutput& out, int tap_layer);

struct AnchorPair {
  int positive = -1;
  std::vector<int> negatives;
};

/// Anchors for each row of u2 [N x d]: the quantizer's selected entry is the
/// positive and the remaining V - 1 entries are negatives.
std::vector<AnchorPair> AnchorPairs(const QuantizeResult& quant, int num_entries);

struct UttLoss {
  Var total;
  Var info_nce;
  Var diversity;
};

/// Mean over rows of the utterance infoNCE of u1 [N x d] against the anchors
/// in `quant` (computed from detached u2), plus beta times the diversity of
/// the utterance codebook usage.
UttLoss UtteranceLoss(Var u1, const QuantizeResult& quant, Var entries, double kappa,
                      double beta);

/// alpha * s3rl + (1 - alpha) * utt.
Var CombinedLoss(Var s3rl, Var utt, double alpha);

}  // namespace tssl

#endif  // TSSL_UWDB_H_
