// src/selftest.cc

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

#include "tssl/selftest.h"

#include <chrono>

#include "tssl/common.h"
#include "tssl/trainer.h"

namespace tssl {

TrainConfig ToyConfig() {
  TrainConfig c;
  c.model.input_dim = 16;
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.ffn_dim = 32;
  c.model.n_blocks = 3;
  c.model.frontend_channels = {2, 4, 4};
  c.model.param_budget = 10000;
  c.codebook.num_entries = 8;
  c.codebook.input_dim = c.codebook.entry_dim = 16;
  c.uwdb_config.codebook_size = 8;
  c.apc_shift = 2;
  c.seed = 7;
  c.Validate();
  return c;
}

namespace {

struct Case {
  std::string name;
  Method method;
  bool boosting;
  double alpha;
  bool soft;
};

bool IsLogitParam(const std::string& name) { return name.find(".logits.") != std::string::npos; }

}  // namespace

std::vector<LossCheck> RunLossGradChecks(const GradCheckOptions& options) {
  const std::vector<Case> cases = {
      {"apc", Method::kApc, false, 1.0, false},
      {"mpc", Method::kMpc, false, 1.0, false},
      {"cl", Method::kCl, false, 1.0, false},
      {"cl.soft", Method::kCl, false, 1.0, true},
      {"utt", Method::kMpc, true, 0.0, false},
      {"utt.soft", Method::kMpc, true, 0.0, true},
      {"combined.apc", Method::kApc, true, 0.9, false},
      {"combined.apc.soft", Method::kApc, true, 0.9, true},
      {"combined.cl", Method::kCl, true, 0.9, false},
      {"combined.cl.soft", Method::kCl, true, 0.9, true},
  };
  // Two utterances of odd and even length.
  const TrainConfig base = ToyConfig();
  std::vector<Tensor> feats;
  Rng data(base.seed, kStreamGradCheck);
  for (int t : {20, 23}) {
    Tensor x(t, base.model.input_dim);
    for (double& v : x.values()) v = data.Normal();
    feats.push_back(std::move(x));
  }
  std::vector<const Tensor*> batch;
  for (const Tensor& f : feats) batch.push_back(&f);

  std::vector<LossCheck> out;
  for (const Case& c : cases) {
    const auto start = std::chrono::steady_clock::now();
    TrainConfig config = base;
    config.method = c.method;
    config.uwdb = c.boosting;
    config.uwdb_config.alpha = c.alpha;
    PretrainModels models = MakePretrainModels(config, c.boosting);
    if (models.quant) models.quant->set_straight_through(!c.soft);
    if (models.utt_quant) models.utt_quant->set_straight_through(!c.soft);
    // The utterance loss needs a frozen tower that differs from the
    // trainable one; perturb it away from the shared initialization.
    if (models.lwt2) {
      Rng shift(base.seed, kStreamGradCheck, 1);
      for (Parameter& p : models.lwt2->params())
        for (double& v : p.value.values()) v += 0.05 * shift.Normal();
    }
    std::vector<Parameter*> params;
    for (Parameter* p : models.Trainable()) {
      if (!c.soft && IsLogitParam(p->name)) continue;
      params.push_back(p);
    }
    // CL targets are a stop-gradient input: hold them at their unperturbed
    // value so the finite differences see the same function.
    std::vector<Tensor> targets;
    LossBuilder build = [&](Tape& tape) {
      return PretrainBatchLoss(tape, config, models, batch, 0, c.boosting, &targets).total;
    };
    LossCheck check;
    check.name = c.name;
    for (const Parameter* p : params) check.values_checked += p->value.size();
    check.result = GradCheck(build, params, options);
    check.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(check));
  }
  return out;
}

}  // namespace tssl
