// src/uwdb.cc

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

#include "tssl/uwdb.h"

#include "tssl/common.h"
#include "tssl/objectives.h"
#include "tssl/ops.h"

namespace tssl {

void UwdbConfig::Validate(int n_blocks) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("uwdb alpha must lie in [0, 1]");
  if (!(kappa > 0.0)) throw ConfigError("uwdb kappa must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("uwdb beta must be >= 0");
  if (codebook_size < 2) throw ConfigError("uwdb codebook needs at least 2 entries");
  if (tap_layer < 1 || tap_layer > n_blocks)
    throw ConfigError("uwdb tap_layer must lie in [1, n_blocks]");
}

nlohmann::json UwdbConfig::ToJson() const {
  return {{"alpha", alpha},
          {"beta", beta},
          {"kappa", kappa},
          {"codebook_size", codebook_size},
          {"tap_layer", tap_layer}};
}

UwdbConfig UwdbConfig::FromJson(const nlohmann::json& j) {
  UwdbConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "alpha") c.alpha = value.get<double>();
    else if (key == "beta") c.beta = value.get<double>();
    else if (key == "kappa") c.kappa = value.get<double>();
    else if (key == "codebook_size") c.codebook_size = value.get<int>();
    else if (key == "tap_layer") c.tap_layer = value.get<int>();
    else throw ConfigError("unknown uwdb config key: " + key);
  }
  return c;
}

Var UtteranceEmbedding(const EncoderOutput& out, int tap_layer) {
  if (tap_layer < 1 || tap_layer > static_cast<int>(out.blocks.size()))
    throw ConfigError("tap layer " + std::to_string(tap_layer) + " out of range");
  return ops::MeanRows(out.blocks[tap_layer - 1]);
}

std::vector<AnchorPair> AnchorPairs(const QuantizeResult& quant, int num_entries) {
  std::vector<AnchorPair> pairs(quant.selected.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    pairs[i].positive = quant.selected[i];
    for (int v = 0; v < num_entries; ++v)
      if (v != quant.selected[i]) pairs[i].negatives.push_back(v);
  }
  return pairs;
}

UttLoss UtteranceLoss(Var u1, const QuantizeResult& quant, Var entries, double kappa,
                      double beta) {
  UttLoss loss;
  Var rows = InfoNceRows(u1, quant.quantized, quant.selected, entries, kappa);
  loss.info_nce = ops::Scale(ops::Sum(rows), 1.0 / rows.rows());
  loss.diversity = DiversityLoss(quant.usage);
  loss.total = ops::Add(loss.info_nce, ops::Scale(loss.diversity, beta));
  return loss;
}

Var CombinedLoss(Var s3rl, Var utt, double alpha) {
  return ops::Add(ops::Scale(s3rl, alpha), ops::Scale(utt, 1.0 - alpha));
}

}  // namespace tssl
