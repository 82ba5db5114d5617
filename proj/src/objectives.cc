// src/objectives.cc

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

#include "tssl/objectives.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tssl/common.h"
#include "tssl/ops.h"

namespace tssl {

MaskPlan MakeMaskPlan(int num_frames, double proportion, uint64_t seed) {
  if (num_frames <= 0) throw ConfigError("mask plan needs at least one frame");
  if (!(proportion > 0.0 && proportion < 1.0))
    throw ConfigError("mask proportion must lie in (0, 1)");
  const int count =
      std::min(num_frames, static_cast<int>(std::floor(proportion * num_frames + 0.5)));
  std::vector<int> order(num_frames);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, kStreamMask);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (int i = 0; i < count; ++i) {
    int j = i + static_cast<int>(rng.Bits() % static_cast<uint64_t>(num_frames - i));
    std::swap(order[i], order[j]);
  }
  std::vector<uint8_t> mask(num_frames, 0);
  for (int i = 0; i < count; ++i) mask[order[i]] = 1;
  return MaskPlan::FromMask(std::move(mask));
}

MaskPlan DownsampleMaskPlan(const MaskPlan& plan) {
  const int n = plan.length();
  std::vector<uint8_t> out((n + 1) / 2, 0);
  for (int t = 0; t < n; ++t)
    if (plan.mask[t]) out[t / 2] = 1;
  return MaskPlan::FromMask(std::move(out));
}

Tensor PoolTargets(const Tensor& features) {
  const int t_out = (features.rows() + 1) / 2;
  Tensor out(t_out, features.cols());
  for (int t = 0; t < t_out; ++t) {
    auto a = features.Row(2 * t);
    auto dst = out.Row(t);
    if (2 * t + 1 < features.rows()) {
      auto b = features.Row(2 * t + 1);
      for (size_t c = 0; c < dst.size(); ++c) dst[c] = 0.5 * (a[c] + b[c]);
    } else {
      std::copy(a.begin(), a.end(), dst.begin());
    }
  }
  return out;
}

Var ApcLoss(Tape& tape, const Tensor& targets, Var predictions, int shift) {
  const int t = targets.rows();
  if (!predictions.value().SameShape(targets))
    throw ConfigError("APC predictions " + predictions.value().ShapeString() +
                      " do not match targets " + targets.ShapeString());
  if (shift < 1 || shift >= t)
    throw ConfigError("APC shift " + std::to_string(shift) + " must lie in [1, " +
                      std::to_string(t) + ")");
  const int span = t - shift;
  Tensor future(span, targets.cols());
  std::copy_n(targets.data() + static_cast<size_t>(shift) * targets.cols(), future.size(),
              future.data());
  Var diff = ops::Sub(ops::SliceRows(predictions, 0, span), tape.Constant(std::move(future)));
  return ops::Scale(ops::Sum(ops::Abs(diff)), 1.0 / (static_cast<double>(span) * targets.cols()));
}

Var MpcLoss(Tape& tape, const Tensor& targets, Var reconstructions, const MaskPlan& plan) {
  if (!reconstructions.value().SameShape(targets))
    throw ConfigError("MPC reconstructions do not match targets");
  if (plan.length() != targets.rows()) throw ConfigError("MPC plan length does not match targets");
  double wsum = 0.0;
  for (double w : plan.weights) wsum += w;
  Var diff = ops::Abs(ops::Sub(reconstructions, tape.Constant(targets)));
  Var weighted = ops::Sum(ops::WeightRows(diff, plan.weights));
  if (wsum == 0.0) return ops::Scale(weighted, 0.0);
  return ops::Scale(weighted, 1.0 / (wsum * targets.cols()));
}

Var InfoNceRows(Var queries, Var positives, std::span<const int> positive_index, Var entries,
                double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0");
  Var sims = ops::CosineMatrix(queries, entries);
  Var pos = ops::RowCosine(queries, positives);
  Var logits = ops::Scale(ops::ReplaceAt(sims, positive_index, pos), 1.0 / kappa);
  return ops::CrossEntropyRows(logits, positive_index);
}

Var WeightedInfoNce(Var outputs, Var positives, std::span<const int> positive_index,
                    Var entries, const MaskPlan& plan, double kappa, bool* empty_support) {
  if (plan.length() != outputs.rows()) throw ConfigError("CL plan length does not match outputs");
  double wsum = 0.0;
  for (double w : plan.weights) wsum += w;
  Var rows = InfoNceRows(outputs, positives, positive_index, entries, kappa);
  Var weighted = ops::Sum(ops::WeightRows(rows, plan.weights));
  if (empty_support) *empty_support = wsum == 0.0;
  if (wsum == 0.0) return ops::Scale(weighted, 0.0);
  return ops::Scale(weighted, 1.0 / wsum);
}

ClLoss ClFrameLoss(Var outputs, const QuantizeResult& quant, Var entries, const MaskPlan& plan,
                   double kappa, double beta) {
  ClLoss loss;
  loss.info_nce = WeightedInfoNce(outputs, quant.quantized, quant.selected, entries, plan, kappa,
                                  &loss.empty_support);
  loss.diversity = DiversityLoss(quant.usage);
  loss.total = ops::Add(loss.info_nce, ops::Scale(loss.diversity, beta));
  return loss;
}

}  // namespace tssl
