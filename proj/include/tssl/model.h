// include/tssl/model.h

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

#ifndef TSSL_MODEL_H_
#define TSSL_MODEL_H_

#include <array>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "tssl/common.h"
#include "tssl/mask_plan.h"
#include "tssl/tape.h"

namespace tssl {

struct ModelConfig {
  int input_dim = 64;
  int d_model = 64;
  int n_heads = 4;
  int ffn_dim = 128;
  int n_blocks = 3;
  /// Output channels of the three 3x3 frontend convolutions.
  std::array<int, 3> frontend_channels{8, 16, 16};
  /// Classifier classes; 0 means no classifier head.
  int num_classes = 0;
  int param_budget = 330000;

  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
  /// Same config without the classifier, i.e. the part pretraining fixes.
  ModelConfig EncoderOnly() const;
};

/// Frontend temporal receptive field in input frames.
inline constexpr int kReceptiveField = 7;

/// Output length of the 2x strided frontend: ceil(T / 2).
inline int DownsampledLength(int input_frames) { return (input_frames + 1) / 2; }

enum class AttentionMode { kNone, kCausal };

struct AttentionMask {
  AttentionMode mode = AttentionMode::kNone;
  int length = 0;

  bool Allows(int query, int key) const {
    return mode == AttentionMode::kNone || key <= query;
  }
};

/// Per-block outputs plus the final-normalized representation that feeds the
/// decoder and classifier heads.
struct EncoderOutput {
  std::vector<Var> blocks;
  Var final;
};

/// Light-weight transformer: VGG-style conv frontend (2x temporal
/// downsampling, receptive field 7), pre-LN transformer blocks, a linear
/// projection decoder back to the input feature space, an optional
/// mean-pool + linear classifier, and a learnable input-space mask
/// embedding.
class EncoderModel {
 public:
  EncoderModel(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// [T x input_dim] -> [ceil(T/2) x d_model], positional encoding added.
  /// Throws when T < 7.
  Var Frontend(Tape& tape, Var input);
  /// Runs the blocks; returns every block's output.
  std::vector<Var> Encode(Tape& tape, Var hidden, const AttentionMask& mask);
  Var FinalNorm(Tape& tape, Var last_block);
  EncoderOutput Run(Tape& tape, Var input, AttentionMode mode);

  /// [T' x d_model] -> [T' x input_dim].
  Var Decode(Tape& tape, Var final);
  /// Mean over time then linear: [T' x d_model] -> [1 x num_classes].
  Var Classify(Tape& tape, Var final);

  /// Input features with masked frames replaced by the mask embedding.
  Var ApplyMaskEmbedding(Tape& tape, const Tensor& features, const MaskPlan& plan);

  /// Re-initializes only the classifier head (used when fine-tuning a
  /// pretrained encoder).
  void ResetClassifier(uint64_t seed);
  /// Marks every non-classifier parameter frozen (or trainable again).
  void FreezeEncoder(bool frozen);
  bool IsClassifierParam(const Parameter& p) const;

  size_t CountParams() const { return params_.NumValues(); }

 private:
  struct Block {
    int ln1_gamma, ln1_beta, qkv_w, qkv_b, out_w, out_b;
    int ln2_gamma, ln2_beta, fc1_w, fc1_b, fc2_w, fc2_b;
  };
  Var P(Tape& tape, int index) { return tape.Param(params_.at(index)); }
  Var BlockForward(Tape& tape, const Block& b, Var x, bool causal);

  ModelConfig config_;
  ParameterSet params_;
  std::array<int, 3> conv_w_{}, conv_b_{};
  std::array<int, 3> conv_in_freq_{};
  int proj_w_ = -1, proj_b_ = -1;
  std::vector<Block> blocks_;
  int final_gamma_ = -1, final_beta_ = -1;
  int dec_w_ = -1, dec_b_ = -1;
  int mask_embedding_ = -1;
  int cls_w_ = -1, cls_b_ = -1;
};

/// Sinusoidal positional encoding, [T x d].
Tensor PositionalEncoding(int length, int d);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.
Tensor UniformInit(int rows, int cols, int fan_in, Rng& rng);

}  // namespace tssl

#endif  // TSSL_MODEL_H_
