// include/tssl/config.h

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

#ifndef TSSL_CONFIG_H_
#define TSSL_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "tssl/checkpoint.h"
#include "tssl/features.h"
#include "tssl/model.h"
#include "tssl/optimizer.h"
#include "tssl/quantizer.h"
#include "tssl/uwdb.h"

namespace tssl {

enum class Method { kApc, kMpc, kCl, kScratch };
enum class FreezeMode { kNone, kEncoderFrozen };

/// Parses "apc", "mpc", "cl", "scratch" and the boosted "apc+", "mpc+",
/// "cl+". Throws ConfigError on anything else.
Method ParseMethod(const std::string& name, bool* uwdb);
std::string MethodName(Method method, bool uwdb);

struct TrainConfig {
  Method method = Method::kApc;
  /// Two-step run: plain pretraining, then the combined utterance loss.
  bool uwdb = false;
  ModelConfig model;

  int apc_shift = 8;
  double mask_proportion = 0.5;
  /// Frame-level codebook for CL; its input and entry dims follow d_model.
  CodebookConfig codebook;
  double cl_kappa = 0.1;
  double cl_beta = 0.1;
  /// +1 minimizes the diversity term as written (p log p); -1 flips it.
  int diversity_sign = 1;
  UwdbConfig uwdb_config;

  int epochs_pretrain = 20;
  /// Epochs of the second (boosting) step of a "+" method.
  int epochs_uwdb = 20;
  int epochs_finetune = 10;
  double lr0 = 1e-3;
  double lr_decay_per_epoch = 0.95;
  int batch_size = 32;
  int steps_per_epoch = 50;
  int finetune_batch_size = 32;
  int finetune_steps_per_epoch = 50;
  uint64_t seed = 0;
  FreezeMode freeze_mode = FreezeMode::kNone;
  double clip_norm = 5.0;
  AdamConfig adam;

  /// Writes real wall_ms values to log.csv; off by default so that logs are
  /// reproducible byte for byte (timings always go to timing.csv).
  bool log_wall_time = false;
  StoragePrecision checkpoint_precision = StoragePrecision::kF32;
  /// Fraction of the labeled corpus held out from fine-tuning and scored.
  double holdout_fraction = 0.0;
  /// Pretraining: warm start (for "+" methods, the step-1 checkpoint).
  /// Fine-tuning: pretrained encoder; empty means train from scratch.
  std::string init_checkpoint;

  std::string method_name() const { return MethodName(method, uwdb); }
  CodebookConfig UtteranceCodebook() const;

  void Validate() const;
  nlohmann::json ToJson() const;
  /// Unknown keys and mistyped values raise ConfigError.
  static TrainConfig FromJson(const nlohmann::json& j);
  static TrainConfig Load(const std::filesystem::path& path);
};

nlohmann::json SynthSpecToJson(const SynthCorpusSpec& spec);
SynthCorpusSpec SynthSpecFromJson(const nlohmann::json& j);

/// Reads a JSON document, turning I/O and parse failures into ConfigError
/// messages that name the path.
nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace tssl

#endif  // TSSL_CONFIG_H_
