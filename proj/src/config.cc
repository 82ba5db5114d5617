// src/config.cc

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

#include "tssl/config.h"

#include <fstream>

#include "tssl/common.h"

namespace tssl {

Method ParseMethod(const std::string& name, bool* uwdb) {
  std::string base = name;
  bool plus = false;
  if (!base.empty() && base.back() == '+') {
    plus = true;
    base.pop_back();
  }
  Method m;
  if (base == "apc") m = Method::kApc;
  else if (base == "mpc") m = Method::kMpc;
  else if (base == "cl") m = Method::kCl;
  else if (base == "scratch" && !plus) m = Method::kScratch;
  else throw ConfigError("invalid method '" + name + "' (apc, mpc, cl, apc+, mpc+, cl+, scratch)");
  if (uwdb) *uwdb = plus;
  return m;
}

std::string MethodName(Method method, bool uwdb) {
  std::string s;
  switch (method) {
    case Method::kApc: s = "apc"; break;
    case Method::kMpc: s = "mpc"; break;
    case Method::kCl: s = "cl"; break;
    case Method::kScratch: s = "scratch"; break;
  }
  return uwdb ? s + "+" : s;
}

CodebookConfig TrainConfig::UtteranceCodebook() const {
  CodebookConfig c = codebook;
  c.num_entries = uwdb_config.codebook_size;
  c.input_dim = model.d_model;
  c.entry_dim = model.d_model;
  return c;
}

void TrainConfig::Validate() const {
  model.Validate();
  codebook.Validate();
  if (codebook.input_dim != model.d_model || codebook.entry_dim != model.d_model)
    throw ConfigError("codebook input_dim and entry_dim must equal model d_model");
  uwdb_config.Validate(model.n_blocks);
  if (uwdb && method == Method::kScratch) throw ConfigError("scratch has no boosted variant");
  if (apc_shift < 1) throw ConfigError("apc_shift must be >= 1");
  if (!(mask_proportion > 0.0 && mask_proportion < 1.0))
    throw ConfigError("mask_proportion must lie in (0, 1)");
  if (!(cl_kappa > 0.0)) throw ConfigError("cl_kappa must be > 0");
  if (!(cl_beta >= 0.0)) throw ConfigError("cl_beta must be >= 0");
  if (diversity_sign != 1 && diversity_sign != -1)
    throw ConfigError("diversity_sign must be 1 or -1");
  if (epochs_pretrain < 0 || epochs_uwdb < 0 || epochs_finetune < 0)
    throw ConfigError("epoch counts must be >= 0");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
  if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0))
    throw ConfigError("lr_decay_per_epoch must lie in (0, 1]");
  if (batch_size < 1 || steps_per_epoch < 1 || finetune_batch_size < 1 ||
      finetune_steps_per_epoch < 1)
    throw ConfigError("batch sizes and steps per epoch must be >= 1");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0 (0 disables)");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
        adam.eps > 0.0))
    throw ConfigError("adam needs beta1, beta2 in [0, 1) and eps > 0");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw ConfigError("holdout_fraction must lie in [0, 1)");
}

nlohmann::json TrainConfig::ToJson() const {
  nlohmann::json j;
  j["method"] = method_name();
  j["model"] = model.ToJson();
  j["apc_shift"] = apc_shift;
  j["mask_proportion"] = mask_proportion;
  j["codebook"] = codebook.ToJson();
  j["cl_kappa"] = cl_kappa;
  j["cl_beta"] = cl_beta;
  j["diversity_sign"] = diversity_sign;
  j["uwdb"] = uwdb_config.ToJson();
  j["epochs_pretrain"] = epochs_pretrain;
  j["epochs_uwdb"] = epochs_uwdb;
  j["epochs_finetune"] = epochs_finetune;
  j["lr0"] = lr0;
  j["lr_decay_per_epoch"] = lr_decay_per_epoch;
  j["batch_size"] = batch_size;
  j["steps_per_epoch"] = steps_per_epoch;
  j["finetune_batch_size"] = finetune_batch_size;
  j["finetune_steps_per_epoch"] = finetune_steps_per_epoch;
  j["seed"] = seed;
  j["freeze_mode"] = freeze_mode == FreezeMode::kNone ? "none" : "encoder_frozen";
  j["clip_norm"] = clip_norm;
  j["adam"] = {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
  j["log_wall_time"] = log_wall_time;
  j["checkpoint_precision"] = checkpoint_precision == StoragePrecision::kF32 ? "f32" : "f64";
  j["holdout_fraction"] = holdout_fraction;
  j["init_checkpoint"] = init_checkpoint;
  return j;
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  try {
    // The model goes first so the codebook dims can default to d_model.
    if (j.contains("model")) c.model = ModelConfig::FromJson(j.at("model"));
    c.codebook.input_dim = c.codebook.entry_dim = c.model.d_model;
    for (const auto& [key, v] : j.items()) {
      if (key == "model") continue;
      if (key == "method") c.method = ParseMethod(v.get<std::string>(), &c.uwdb);
      else if (key == "apc_shift") c.apc_shift = v.get<int>();
      else if (key == "mask_proportion") c.mask_proportion = v.get<double>();
      else if (key == "codebook") {
        nlohmann::json cb = v;
        if (!cb.contains("input_dim")) cb["input_dim"] = c.model.d_model;
        if (!cb.contains("entry_dim")) cb["entry_dim"] = c.model.d_model;
        c.codebook = CodebookConfig::FromJson(cb);
      }
      else if (key == "cl_kappa") c.cl_kappa = v.get<double>();
      else if (key == "cl_beta") c.cl_beta = v.get<double>();
      else if (key == "diversity_sign") c.diversity_sign = v.get<int>();
      else if (key == "uwdb") c.uwdb_config = UwdbConfig::FromJson(v);
      else if (key == "epochs_pretrain") c.epochs_pretrain = v.get<int>();
      else if (key == "epochs_uwdb") c.epochs_uwdb = v.get<int>();
      else if (key == "epochs_finetune") c.epochs_finetune = v.get<int>();
      else if (key == "lr0") c.lr0 = v.get<double>();
      else if (key == "lr_decay_per_epoch") c.lr_decay_per_epoch = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "steps_per_epoch") c.steps_per_epoch = v.get<int>();
      else if (key == "finetune_batch_size") c.finetune_batch_size = v.get<int>();
      else if (key == "finetune_steps_per_epoch") c.finetune_steps_per_epoch = v.get<int>();
      else if (key == "seed") c.seed = v.get<uint64_t>();
      else if (key == "freeze_mode") {
        const std::string m = v.get<std::string>();
        if (m == "none") c.freeze_mode = FreezeMode::kNone;
        else if (m == "encoder_frozen") c.freeze_mode = FreezeMode::kEncoderFrozen;
        else throw ConfigError("freeze_mode must be 'none' or 'encoder_frozen'");
      }
      else if (key == "clip_norm") c.clip_norm = v.get<double>();
      else if (key == "adam") {
        for (const auto& [k, a] : v.items()) {
          if (k == "beta1") c.adam.beta1 = a.get<double>();
          else if (k == "beta2") c.adam.beta2 = a.get<double>();
          else if (k == "eps") c.adam.eps = a.get<double>();
          else throw ConfigError("unknown adam config key: " + k);
        }
      }
      else if (key == "log_wall_time") c.log_wall_time = v.get<bool>();
      else if (key == "checkpoint_precision") {
        const std::string p = v.get<std::string>();
        if (p == "f32") c.checkpoint_precision = StoragePrecision::kF32;
        else if (p == "f64") c.checkpoint_precision = StoragePrecision::kF64;
        else throw ConfigError("checkpoint_precision must be 'f32' or 'f64'");
      }
      else if (key == "holdout_fraction") c.holdout_fraction = v.get<double>();
      else if (key == "init_checkpoint") c.init_checkpoint = v.get<std::string>();
      else throw ConfigError("unknown train config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config value: ") + e.what());
  }
  c.Validate();
  return c;
}

TrainConfig TrainConfig::Load(const std::filesystem::path& path) {
  return FromJson(ReadJsonFile(path));
}

nlohmann::json SynthSpecToJson(const SynthCorpusSpec& spec) {
  return {{"num_classes", spec.num_classes},
          {"utterances_per_class", spec.utterances_per_class},
          {"utterance_sec", spec.utterance_sec},
          {"seed", spec.seed},
          {"noise_level", spec.noise_level}};
}

SynthCorpusSpec SynthSpecFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
  SynthCorpusSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "num_classes") s.num_classes = v.get<int>();
      else if (key == "utterances_per_class") s.utterances_per_class = v.get<int>();
      else if (key == "utterance_sec") s.utterance_sec = v.get<double>();
      else if (key == "seed") s.seed = v.get<uint64_t>();
      else if (key == "noise_level") s.noise_level = v.get<double>();
      else throw ConfigError("unknown synth spec key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad synth spec value: ") + e.what());
  }
  s.Validate();
  return s;
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace tssl
