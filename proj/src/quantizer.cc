// src/quantizer.cc

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

#include "tssl/quantizer.h"

#include <algorithm>
#include <cmath>

#include "tssl/model.h"
#include "tssl/ops.h"

namespace tssl {

void CodebookConfig::Validate() const {
  if (groups != 1) throw ConfigError("only a single codebook group is supported");
  if (num_entries < 2) throw ConfigError("codebook needs at least 2 entries");
  if (input_dim < 1 || entry_dim < 1) throw ConfigError("codebook dimensions must be positive");
  if (!(tau_start > 0.0) || !(tau_end > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(tau_decay > 0.0 && tau_decay <= 1.0)) throw ConfigError("tau_decay must lie in (0, 1]");
}

nlohmann::json CodebookConfig::ToJson() const {
  return {{"groups", groups},       {"num_entries", num_entries}, {"input_dim", input_dim},
          {"entry_dim", entry_dim}, {"tau_start", tau_start},     {"tau_end", tau_end},
          {"tau_decay", tau_decay}};
}

CodebookConfig CodebookConfig::FromJson(const nlohmann::json& j) {
  CodebookConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "groups") c.groups = value.get<int>();
    else if (key == "num_entries") c.num_entries = value.get<int>();
    else if (key == "input_dim") c.input_dim = value.get<int>();
    else if (key == "entry_dim") c.entry_dim = value.get<int>();
    else if (key == "tau_start") c.tau_start = value.get<double>();
    else if (key == "tau_end") c.tau_end = value.get<double>();
    else if (key == "tau_decay") c.tau_decay = value.get<double>();
    else throw ConfigError("unknown codebook config key: " + key);
  }
  c.Validate();
  return c;
}

Codebook::Codebook(const CodebookConfig& config, const std::string& prefix, uint64_t seed)
    : config_(config), prefix_(prefix), temperature_(config.tau_start) {
  config_.Validate();
  Rng rng(seed, kStreamInit, 2);
  const int v = config_.num_entries;
  logits_w_ = params_.Add(prefix + ".logits.weight",
                          UniformInit(config_.input_dim, v, config_.input_dim, rng));
  logits_b_ = params_.Add(prefix + ".logits.bias", Tensor(1, v));
  entries_ = params_.Add(prefix + ".entries",
                         UniformInit(v, config_.entry_dim, config_.entry_dim, rng));
}

void Codebook::set_temperature(double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
  temperature_ = tau;
}

void Codebook::AnnealStep() {
  temperature_ = std::max(config_.tau_end, temperature_ * config_.tau_decay);
}

QuantizeResult Codebook::Quantize(Tape& tape, Var inputs, bool train, Rng* rng) {
  if (!(temperature_ > 0.0)) throw ConfigError("temperature must be > 0");
  if (inputs.cols() != config_.input_dim)
    throw ConfigError("quantizer input has " + std::to_string(inputs.cols()) +
                      " dims, expected " + std::to_string(config_.input_dim));
  if (train && rng == nullptr) throw Error("train-mode quantization needs an rng");
  QuantizeResult r;
  r.logits = ops::Linear(inputs, tape.Param(params_.at(logits_w_)),
                         tape.Param(params_.at(logits_b_)));
  Var scores = r.logits;
  if (train) {
    Tensor gumbel(r.logits.rows(), r.logits.cols());
    for (double& g : gumbel.values()) g = -std::log(-std::log(rng->Uniform()));
    scores = ops::AddConstant(scores, gumbel);
  }
  r.soft_probs = ops::SoftmaxRows(ops::Scale(scores, 1.0 / temperature_));
  const Tensor& sv = scores.value();
  const int n = sv.rows(), v = sv.cols();
  r.hard = Tensor(n, v);
  r.selected.resize(n);
  for (int i = 0; i < n; ++i) {
    auto row = sv.Row(i);
    int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    r.selected[i] = best;
    r.hard(i, best) = 1.0;
  }
  Var weights = straight_through_ ? ops::StraightThrough(r.soft_probs, r.hard) : r.soft_probs;
  r.quantized = ops::MatMul(weights, Entries(tape));
  r.usage = ops::MeanRows(r.soft_probs);
  return r;
}

Var DiversityLoss(Var usage) {
  const Tensor& u = usage.value();
  for (double p : u.values())
    if (p < 0.0) throw ConfigError("diversity loss: negative probability");
  return ops::Scale(ops::NegEntropy(usage), 1.0 / static_cast<double>(u.size()));
}

double DiversityLoss(const Tensor& usage) {
  Tape tape;
  return DiversityLoss(tape.Constant(usage)).scalar();
}

}  // namespace tssl
