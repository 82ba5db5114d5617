// src/model.cc

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

#include "tssl/model.h"

#include <cmath>
#include <string>

#include "tssl/common.h"
#include "tssl/ops.h"

namespace tssl {

int MaskPlan::num_masked() const {
  int n = 0;
  for (uint8_t m : mask) n += m != 0;
  return n;
}

MaskPlan MaskPlan::None(int length) {
  return FromMask(std::vector<uint8_t>(static_cast<size_t>(length), 0));
}

MaskPlan MaskPlan::FromMask(std::vector<uint8_t> mask) {
  MaskPlan plan;
  plan.weights.resize(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) plan.weights[i] = mask[i] ? 1.0 : 0.0;
  plan.mask = std::move(mask);
  return plan;
}

void ModelConfig::Validate() const {
  if (input_dim < 1 || d_model < 1 || n_heads < 1 || ffn_dim < 1 || n_blocks < 0)
    throw ConfigError("model dimensions must be positive");
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  for (int c : frontend_channels)
    if (c < 1) throw ConfigError("frontend channels must be positive");
  if (num_classes < 0) throw ConfigError("num_classes must be >= 0");
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"input_dim", input_dim},
          {"d_model", d_model},
          {"n_heads", n_heads},
          {"ffn_dim", ffn_dim},
          {"n_blocks", n_blocks},
          {"frontend_channels", frontend_channels},
          {"num_classes", num_classes},
          {"param_budget", param_budget}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "input_dim") c.input_dim = value.get<int>();
    else if (key == "d_model") c.d_model = value.get<int>();
    else if (key == "n_heads") c.n_heads = value.get<int>();
    else if (key == "ffn_dim") c.ffn_dim = value.get<int>();
    else if (key == "n_blocks") c.n_blocks = value.get<int>();
    else if (key == "frontend_channels") c.frontend_channels = value.get<std::array<int, 3>>();
    else if (key == "num_classes") c.num_classes = value.get<int>();
    else if (key == "param_budget") c.param_budget = value.get<int>();
    else throw ConfigError("unknown model config key: " + key);
  }
  c.Validate();
  return c;
}

ModelConfig ModelConfig::EncoderOnly() const {
  ModelConfig c = *this;
  c.num_classes = 0;
  return c;
}

Tensor UniformInit(int rows, int cols, int fan_in, Rng& rng) {
  Tensor t(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = bound * (2.0 * rng.Uniform() - 1.0);
  return t;
}

Tensor PositionalEncoding(int length, int d) {
  Tensor pe(length, d);
  for (int t = 0; t < length; ++t)
    for (int i = 0; i < d; i += 2) {
      double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      pe(t, i) = std::sin(t * freq);
      if (i + 1 < d) pe(t, i + 1) = std::cos(t * freq);
    }
  return pe;
}

EncoderModel::EncoderModel(const ModelConfig& config, uint64_t seed) : config_(config) {
  config_.Validate();
  Rng rng(seed, kStreamInit);
  const int d = config_.d_model;

  // Frontend: strides (1,1), (1,2), (2,2) over (time, freq).
  int freq = config_.input_dim;
  int in_ch = 1;
  const std::array<int, 3> freq_stride{1, 2, 2};
  for (int i = 0; i < 3; ++i) {
    const int out_ch = config_.frontend_channels[i];
    const std::string name = "frontend.conv" + std::to_string(i + 1);
    conv_in_freq_[i] = freq;
    conv_w_[i] = params_.Add(name + ".weight", UniformInit(9 * in_ch, out_ch, 9 * in_ch, rng));
    conv_b_[i] = params_.Add(name + ".bias", Tensor(1, out_ch));
    freq = (freq - 1) / freq_stride[i] + 1;
    in_ch = out_ch;
  }
  proj_w_ = params_.Add("frontend.proj.weight", UniformInit(freq * in_ch, d, freq * in_ch, rng));
  proj_b_ = params_.Add("frontend.proj.bias", Tensor(1, d));

  for (int b = 0; b < config_.n_blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    Block blk;
    blk.ln1_gamma = params_.Add(p + "ln1.gamma", Tensor(1, d, 1.0));
    blk.ln1_beta = params_.Add(p + "ln1.beta", Tensor(1, d));
    blk.qkv_w = params_.Add(p + "attn.qkv.weight", UniformInit(d, 3 * d, d, rng));
    blk.qkv_b = params_.Add(p + "attn.qkv.bias", Tensor(1, 3 * d));
    blk.out_w = params_.Add(p + "attn.out.weight", UniformInit(d, d, d, rng));
    blk.out_b = params_.Add(p + "attn.out.bias", Tensor(1, d));
    blk.ln2_gamma = params_.Add(p + "ln2.gamma", Tensor(1, d, 1.0));
    blk.ln2_beta = params_.Add(p + "ln2.beta", Tensor(1, d));
    blk.fc1_w = params_.Add(p + "ffn.fc1.weight", UniformInit(d, config_.ffn_dim, d, rng));
    blk.fc1_b = params_.Add(p + "ffn.fc1.bias", Tensor(1, config_.ffn_dim));
    blk.fc2_w = params_.Add(p + "ffn.fc2.weight",
                            UniformInit(config_.ffn_dim, d, config_.ffn_dim, rng));
    blk.fc2_b = params_.Add(p + "ffn.fc2.bias", Tensor(1, d));
    blocks_.push_back(blk);
  }
  final_gamma_ = params_.Add("final_norm.gamma", Tensor(1, d, 1.0));
  final_beta_ = params_.Add("final_norm.beta", Tensor(1, d));
  dec_w_ = params_.Add("decoder.weight", UniformInit(d, config_.input_dim, d, rng));
  dec_b_ = params_.Add("decoder.bias", Tensor(1, config_.input_dim));
  Tensor mask_emb(1, config_.input_dim);
  for (double& v : mask_emb.values()) v = 0.1 * rng.Normal();
  mask_embedding_ = params_.Add("mask_embedding", std::move(mask_emb));
  if (config_.num_classes > 0) {
    cls_w_ = params_.Add("classifier.weight", Tensor(d, config_.num_classes));
    cls_b_ = params_.Add("classifier.bias", Tensor(1, config_.num_classes));
    ResetClassifier(seed);
  }
  if (CountParams() > static_cast<size_t>(config_.param_budget))
    throw ConfigError("model has " + std::to_string(CountParams()) +
                      " parameters, over the budget of " + std::to_string(config_.param_budget));
}

void EncoderModel::ResetClassifier(uint64_t seed) {
  if (cls_w_ < 0) return;
  Rng rng(seed, kStreamInit, 1);
  const int d = config_.d_model;
  params_.at(cls_w_).value = UniformInit(d, config_.num_classes, d, rng);
  params_.at(cls_b_).value.SetZero();
}

bool EncoderModel::IsClassifierParam(const Parameter& p) const {
  return cls_w_ >= 0 && (&p == &params_.at(cls_w_) || &p == &params_.at(cls_b_));
}

void EncoderModel::FreezeEncoder(bool frozen) {
  for (auto& p : params_)
    if (!IsClassifierParam(p)) p.requires_grad = !frozen;
}

Var EncoderModel::Frontend(Tape& tape, Var input) {
  if (input.cols() != config_.input_dim)
    throw ConfigError("frontend input has " + std::to_string(input.cols()) +
                      " dims, expected " + std::to_string(config_.input_dim));
  if (input.rows() < kReceptiveField) throw ConfigError("sequence shorter than receptive field");
  const std::array<int, 3> t_stride{1, 1, 2};
  const std::array<int, 3> f_stride{1, 2, 2};
  Var x = input;
  int in_ch = 1;
  for (int i = 0; i < 3; ++i) {
    x = ops::Gelu(ops::Conv2d3x3(x, conv_in_freq_[i], in_ch, P(tape, conv_w_[i]),
                                 P(tape, conv_b_[i]), t_stride[i], f_stride[i]));
    in_ch = config_.frontend_channels[i];
  }
  Var h = ops::Linear(x, P(tape, proj_w_), P(tape, proj_b_));
  return ops::AddConstant(h, PositionalEncoding(h.rows(), config_.d_model));
}

Var EncoderModel::BlockForward(Tape& tape, const Block& b, Var x, bool causal) {
  Var h = ops::LayerNorm(x, P(tape, b.ln1_gamma), P(tape, b.ln1_beta));
  Var qkv = ops::Linear(h, P(tape, b.qkv_w), P(tape, b.qkv_b));
  Var att = ops::MultiHeadAttention(qkv, config_.n_heads, causal);
  x = ops::Add(x, ops::Linear(att, P(tape, b.out_w), P(tape, b.out_b)));
  h = ops::LayerNorm(x, P(tape, b.ln2_gamma), P(tape, b.ln2_beta));
  h = ops::Gelu(ops::Linear(h, P(tape, b.fc1_w), P(tape, b.fc1_b)));
  return ops::Add(x, ops::Linear(h, P(tape, b.fc2_w), P(tape, b.fc2_b)));
}

std::vector<Var> EncoderModel::Encode(Tape& tape, Var hidden, const AttentionMask& mask) {
  if (hidden.cols() != config_.d_model) throw ConfigError("encoder input width != d_model");
  if (mask.length != hidden.rows())
    throw ConfigError("attention mask length " + std::to_string(mask.length) +
                      " does not match sequence length " + std::to_string(hidden.rows()));
  std::vector<Var> outs;
  Var x = hidden;
  for (const Block& b : blocks_) {
    x = BlockForward(tape, b, x, mask.mode == AttentionMode::kCausal);
    outs.push_back(x);
  }
  return outs;
}

Var EncoderModel::FinalNorm(Tape& tape, Var last_block) {
  return ops::LayerNorm(last_block, P(tape, final_gamma_), P(tape, final_beta_));
}

EncoderOutput EncoderModel::Run(Tape& tape, Var input, AttentionMode mode) {
  Var h = Frontend(tape, input);
  EncoderOutput out;
  out.blocks = Encode(tape, h, AttentionMask{mode, h.rows()});
  out.final = FinalNorm(tape, out.blocks.empty() ? h : out.blocks.back());
  return out;
}

Var EncoderModel::Decode(Tape& tape, Var final) {
  return ops::Linear(final, P(tape, dec_w_), P(tape, dec_b_));
}

Var EncoderModel::Classify(Tape& tape, Var final) {
  if (cls_w_ < 0) throw ConfigError("model has no classifier head");
  return ops::Linear(ops::MeanRows(final), P(tape, cls_w_), P(tape, cls_b_));
}

Var EncoderModel::ApplyMaskEmbedding(Tape& tape, const Tensor& features, const MaskPlan& plan) {
  if (plan.length() != features.rows())
    throw ConfigError("mask plan length " + std::to_string(plan.length()) +
                      " does not match " + std::to_string(features.rows()) + " frames");
  return ops::ReplaceRows(tape.Constant(features), plan.mask, P(tape, mask_embedding_));
}

}  // namespace tssl
