// include/tssl/trainer.h

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

#ifndef TSSL_TRAINER_H_
#define TSSL_TRAINER_H_

#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tssl/checkpoint.h"
#include "tssl/config.h"
#include "tssl/eval.h"
#include "tssl/features.h"
#include "tssl/model.h"
#include "tssl/quantizer.h"

namespace tssl {

/// Per-dimension feature standardization, fitted on the pretraining corpus
/// and carried in every checkpoint as "norm.mean" / "norm.std".
struct Normalizer {
  Tensor mean;
  Tensor stddev;

  static Normalizer Fit(const Corpus& corpus, std::span<const int> indices = {});
  Tensor Apply(const Tensor& frames) const;
  void Export(Checkpoint* ckpt) const;
  static Normalizer Import(const Checkpoint& ckpt);
};

/// Everything a pretraining step touches. lwt2 and utt_quant exist only in
/// the boosting step; quant only for CL.
struct PretrainModels {
  std::unique_ptr<EncoderModel> lwt1;
  std::unique_ptr<Codebook> quant;
  std::unique_ptr<EncoderModel> lwt2;
  std::unique_ptr<Codebook> utt_quant;

  /// Parameters updated by the optimizer (never the frozen tower).
  std::vector<Parameter*> Trainable();
  std::vector<Parameter*> Frozen();
};

PretrainModels MakePretrainModels(const TrainConfig& config, bool boosting);

struct BatchLoss {
  Var total;
  Var s3rl;
  /// Only set in the boosting step.
  Var utt;
  bool empty_support = false;
};

/// Pretraining loss of one batch of normalized feature matrices. Masks and
/// Gumbel noise derive from (config.seed, step) so that rebuilding the loss
/// for the same step reproduces it exactly. CL targets carry no gradient;
/// when `cl_targets` is non-null and empty it receives them, and when it is
/// non-empty they are reused instead of being recomputed.
BatchLoss PretrainBatchLoss(Tape& tape, const TrainConfig& config, PretrainModels& models,
                            std::span<const Tensor* const> batch, uint64_t step, bool boosting,
                            std::vector<Tensor>* cl_targets = nullptr);

struct EpochSummary {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct PretrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<EpochSummary> epochs;
  /// Boosting runs: the step-1 checkpoint and its SHA-256.
  std::filesystem::path step1_checkpoint;
  std::string step1_sha256;
  /// Boosting runs: sum of |grad| over every frozen-tower parameter, per
  /// epoch, measured after each backward pass.
  std::vector<double> frozen_grad_abs_sum;
  bool frozen_tower_unchanged = true;
};

/// Pretrains into `run_dir` (config.json, log.csv, timing.csv, run.json,
/// ckpt-epoch-<e>.bin). A "+" method first runs (or, given
/// init_checkpoint, reuses) the plain step 1 under run_dir/step1, then
/// trains with the combined loss and additionally writes components.csv.
/// Throws NumericalError on a non-finite loss or gradient.
PretrainResult Pretrain(const TrainConfig& config, const Corpus& corpus,
                        const std::filesystem::path& run_dir, std::ostream* progress = nullptr);

struct FinetuneResult {
  std::filesystem::path final_checkpoint;
  std::vector<EpochSummary> epochs;
  double train_accuracy = 0.0;
  /// -1 without a holdout split.
  double holdout_accuracy = -1.0;
};

/// Trains the mean-pool + linear classifier with cross-entropy, from scratch
/// or on top of config.init_checkpoint. encoder_frozen updates only the
/// classifier head. Throws ConfigError when the checkpoint's encoder config
/// differs from config.model.
FinetuneResult Finetune(const TrainConfig& config, const Corpus& labeled,
                        const std::filesystem::path& run_dir, std::ostream* progress = nullptr);

struct Classifier {
  std::unique_ptr<EncoderModel> model;
  Normalizer norm;
  std::vector<std::string> class_names;
};

Classifier LoadClassifier(const std::filesystem::path& checkpoint);
/// Class posteriors of one utterance, [1 x C].
Tensor Posteriors(Classifier& classifier, const Tensor& frames);
std::vector<int> Predict(Classifier& classifier, const Corpus& corpus);
/// Keyword-detection trials: the posterior of `keyword` per utterance,
/// target when the label is `keyword`.
std::vector<ScoredTrial> ScoreTrials(Classifier& classifier, const Corpus& corpus, int keyword);

/// Labels of a corpus in order.
std::vector<int> Labels(const Corpus& corpus);

}  // namespace tssl

#endif  // TSSL_TRAINER_H_
