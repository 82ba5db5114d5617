// include/tssl/quantizer.h

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

#ifndef TSSL_QUANTIZER_H_
#define TSSL_QUANTIZER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tssl/common.h"
#include "tssl/tape.h"

namespace tssl {

struct CodebookConfig {
  int groups = 1;
  int num_entries = 64;
  int input_dim = 64;
  int entry_dim = 64;
  /// Gumbel-softmax temperature, annealed multiplicatively once per step
  /// from tau_start down to tau_end.
  double tau_start = 2.0;
  double tau_end = 0.5;
  double tau_decay = 0.9995;

  void Validate() const;
  nlohmann::json ToJson() const;
  static CodebookConfig FromJson(const nlohmann::json& j);
};

struct QuantizeResult {
  /// Selected entry per input row.
  std::vector<int> selected;
  /// One-hot rows of the selection.
  Tensor hard;
  Var logits;
  /// softmax((logits + gumbel) / tau) in training, softmax(logits / tau) in
  /// evaluation.
  Var soft_probs;
  /// Selected entries; forward value is exactly an entry row, gradient flows
  /// to soft_probs (straight-through) and to the entries.
  Var quantized;
  /// Batch average of soft_probs, [groups x num_entries].
  Var usage;
};

/// Gumbel-softmax vector quantizer with a linear logit projection.
/// Parameters are named "<prefix>.logits.weight", "<prefix>.logits.bias" and
/// "<prefix>.entries".
class Codebook {
 public:
  Codebook(const CodebookConfig& config, const std::string& prefix, uint64_t seed);

  /// Quantizes each row of `inputs` [N x input_dim]. In train mode `rng`
  /// supplies the Gumbel noise and must be non-null.
  QuantizeResult Quantize(Tape& tape, Var inputs, bool train, Rng* rng);

  Var Entries(Tape& tape) { return tape.Param(params_.at(entries_)); }
  const Tensor& entries() const { return params_.at(entries_).value; }

  const CodebookConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const std::string& prefix() const { return prefix_; }

  double temperature() const { return temperature_; }
  void set_temperature(double tau);
  /// One annealing step: tau <- max(tau_end, tau * tau_decay).
  void AnnealStep();

  /// When off, `quantized` is the soft mixture soft_probs * entries, the
  /// differentiable surrogate whose gradient straight-through reproduces.
  void set_straight_through(bool on) { straight_through_ = on; }
  bool straight_through() const { return straight_through_; }

 private:
  CodebookConfig config_;
  std::string prefix_;
  ParameterSet params_;
  int logits_w_ = -1, logits_b_ = -1, entries_ = -1;
  double temperature_;
  bool straight_through_ = true;
};

/// (1 / (G V)) * sum_g sum_v p log p over a [G x V] usage matrix, 0 log 0 = 0.
/// Lies in [-(log V) / V, 0]: minimal for uniform usage, 0 for one-hot.
/// Throws on negative probabilities.
Var DiversityLoss(Var usage);
double DiversityLoss(const Tensor& usage);

}  // namespace tssl

#endif  // TSSL_QUANTIZER_H_
