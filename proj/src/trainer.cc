// src/trainer.cc

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

#include "tssl/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "parallel.h"
#include "tssl/common.h"
#include "tssl/digest.h"
#include "tssl/objectives.h"
#include "tssl/ops.h"
#include "tssl/optimizer.h"
#include "tssl/uwdb.h"

namespace tssl {

namespace fs = std::filesystem;

namespace {

// Per-step stream index stride; batch element b of step s uses s * k + b.
constexpr uint64_t kBatchStride = uint64_t{1} << 20;

uint64_t DeriveSeed(uint64_t seed, uint64_t salt) { return Rng(seed, kStreamInit, salt).Bits(); }

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double MsSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

AttentionMode PretrainMode(Method m) {
  return m == Method::kApc ? AttentionMode::kCausal : AttentionMode::kNone;
}

std::ofstream OpenCsv(const fs::path& path, const std::string& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << header << "\n";
  return out;
}

std::vector<int> SampleBatch(uint64_t seed, uint64_t step, int batch_size,
                             std::span<const int> pool) {
  Rng rng(seed, kStreamBatch, step);
  std::vector<int> ids(batch_size);
  for (int& id : ids) id = pool[rng.Bits() % pool.size()];
  return ids;
}

std::string IdList(const Corpus& corpus, std::span<const int> ids) {
  std::string s;
  for (int id : ids) {
    if (!s.empty()) s += ", ";
    s += std::to_string(id);
    if (!corpus.utterances[id].source_id.empty())
      s += " (" + corpus.utterances[id].source_id + ")";
  }
  return s;
}

[[noreturn]] void FailNonFinite(const fs::path& run_dir, const Corpus& corpus,
                                const std::string& what, int epoch, uint64_t step,
                                std::span<const int> ids) {
  nlohmann::json dump = {{"what", what}, {"epoch", epoch}, {"step", step}, {"batch", ids}};
  std::vector<std::string> sources;
  for (int id : ids) sources.push_back(corpus.utterances[id].source_id);
  dump["sources"] = sources;
  try {
    WriteJsonFile(run_dir / "nonfinite_batch.json", dump);
  } catch (const Error&) {
  }
  throw NumericalError("non-finite " + what + " at step " + std::to_string(step) + " (epoch " +
                       std::to_string(epoch) + "), batch utterances: " + IdList(corpus, ids));
}

bool GradsFinite(std::span<Parameter* const> params) {
  for (const Parameter* p : params)
    if (p->requires_grad && !p->grad.AllFinite()) return false;
  return true;
}

void ZeroGrads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->ZeroGrad();
}

std::vector<Parameter*> Pointers(ParameterSet& set) {
  std::vector<Parameter*> out;
  for (Parameter& p : set) out.push_back(&p);
  return out;
}

// Utterances long enough for the frontend and, for APC, for the shift.
std::vector<int> UsableIndices(const Corpus& corpus, int min_frames) {
  std::vector<int> out;
  for (size_t i = 0; i < corpus.utterances.size(); ++i)
    if (corpus.utterances[i].features.num_frames() >= min_frames) out.push_back(static_cast<int>(i));
  return out;
}

std::string EncoderPrefix(const Checkpoint& ckpt) {
  return ckpt.meta.value("encoder_prefix", std::string());
}

void CheckEncoderConfig(const Checkpoint& ckpt, const ModelConfig& model,
                        const fs::path& path) {
  const nlohmann::json want = model.EncoderOnly().ToJson();
  nlohmann::json have = ckpt.config;
  try {
    have = ModelConfig::FromJson(ckpt.config).EncoderOnly().ToJson();
  } catch (const Error&) {
  }
  if (have != want)
    throw ConfigError("checkpoint/config mismatch: " + path.string() + " holds model " +
                      ckpt.config.dump() + " but the config asks for " + want.dump());
}

std::string BaseMethod(const std::string& name) {
  return !name.empty() && name.back() == '+' ? name.substr(0, name.size() - 1) : name;
}

struct PhaseSpec {
  bool boosting = false;
  int epochs = 0;
  fs::path init_checkpoint;
};

Checkpoint PretrainCheckpoint(const TrainConfig& config, PretrainModels& m,
                              const Normalizer& norm, bool boosting, int epoch,
                              const nlohmann::json& lineage) {
  Checkpoint ck;
  ck.config = config.model.EncoderOnly().ToJson();
  const std::string prefix = boosting ? "lwt1." : "";
  ck.meta = {{"kind", "pretrain"},
             {"method", config.method_name()},
             {"epoch", epoch},
             {"encoder_prefix", prefix},
             {"seed", config.seed}};
  if (!lineage.is_null()) ck.meta["lineage"] = lineage;
  ExportParams(m.lwt1->params(), prefix, false, &ck);
  if (m.quant) {
    ExportParams(m.quant->params(), "", false, &ck);
    ck.meta["temperature"] = m.quant->temperature();
  }
  if (m.lwt2) ExportParams(m.lwt2->params(), "lwt2.", true, &ck);
  if (m.utt_quant) {
    ExportParams(m.utt_quant->params(), "", false, &ck);
    ck.meta["utt_temperature"] = m.utt_quant->temperature();
  }
  norm.Export(&ck);
  return ck;
}

PretrainResult RunPretrainPhase(const TrainConfig& config, const Corpus& corpus,
                                const fs::path& run_dir, const PhaseSpec& phase,
                                std::ostream* progress) {
  fs::create_directories(run_dir);
  WriteJsonFile(run_dir / "config.json", config.ToJson());

  PretrainModels models = MakePretrainModels(config, phase.boosting);
  Normalizer norm;
  nlohmann::json lineage;
  PretrainResult result;
  if (!phase.init_checkpoint.empty()) {
    const Checkpoint ck = LoadCheckpoint(phase.init_checkpoint);
    CheckEncoderConfig(ck, config.model, phase.init_checkpoint);
    const std::string prefix = EncoderPrefix(ck);
    const std::string ck_method = ck.meta.value("method", std::string());
    if (phase.boosting && BaseMethod(ck_method) != MethodName(config.method, false))
      throw ConfigError("step-1 checkpoint was pretrained with '" + ck_method + "', expected '" +
                        MethodName(config.method, false) + "'");
    norm = Normalizer::Import(ck);
    ImportParams(ck, prefix, &models.lwt1->params());
    if (models.quant && ck.Find("quant.entries")) {
      ImportParams(ck, "", &models.quant->params());
      if (ck.meta.contains("temperature"))
        models.quant->set_temperature(ck.meta["temperature"].get<double>());
    }
    if (models.lwt2) ImportParams(ck, prefix, &models.lwt2->params());
    if (models.utt_quant && ck.Find("utt_quant.entries")) {
      ImportParams(ck, "", &models.utt_quant->params());
      if (ck.meta.contains("utt_temperature"))
        models.utt_quant->set_temperature(ck.meta["utt_temperature"].get<double>());
    }
    result.step1_checkpoint = phase.init_checkpoint;
    result.step1_sha256 = FileDigest(phase.init_checkpoint);
    lineage = {{"init_checkpoint", fs::absolute(phase.init_checkpoint).string()},
               {"init_sha256", result.step1_sha256}};
  }

  int min_frames = kReceptiveField;
  if (config.method == Method::kApc) min_frames = std::max(min_frames, 2 * config.apc_shift + 1);
  const std::vector<int> pool = UsableIndices(corpus, min_frames);
  if (pool.empty()) throw ConfigError("no utterance is long enough to pretrain on");
  if (phase.init_checkpoint.empty()) norm = Normalizer::Fit(corpus, pool);

  std::vector<Tensor> feats(corpus.utterances.size());
  ParallelFor(pool.size(), [&](size_t i) {
    feats[pool[i]] = norm.Apply(corpus.utterances[pool[i]].features.frames);
  });

  std::vector<Parameter*> trainable = models.Trainable();
  std::vector<Parameter*> frozen = models.Frozen();
  std::vector<Tensor> frozen_before;
  for (const Parameter* p : frozen) frozen_before.push_back(p->value);
  Adam adam(trainable, config.adam);

  std::ofstream log = OpenCsv(run_dir / "log.csv", "epoch,step,loss,lr,wall_ms");
  std::ofstream timing = OpenCsv(run_dir / "timing.csv", "epoch,step,wall_ms");
  std::ofstream components;
  if (phase.boosting)
    components = OpenCsv(run_dir / "components.csv", "epoch,step,l_s3rl,l_utt,alpha,combined");

  const auto run_start = std::chrono::steady_clock::now();
  uint64_t empty_support_steps = 0;
  for (int epoch = 0; epoch < phase.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const double lr = LearningRate(config.lr0, config.lr_decay_per_epoch, epoch);
    double loss_sum = 0.0, frozen_abs = 0.0;
    for (int s = 0; s < config.steps_per_epoch; ++s) {
      const auto step_start = std::chrono::steady_clock::now();
      const uint64_t step = static_cast<uint64_t>(epoch) * config.steps_per_epoch + s;
      const std::vector<int> ids = SampleBatch(config.seed, step, config.batch_size, pool);
      std::vector<const Tensor*> batch;
      for (int id : ids) batch.push_back(&feats[id]);

      ZeroGrads(trainable);
      ZeroGrads(frozen);
      Tape tape;
      BatchLoss loss = PretrainBatchLoss(tape, config, models, batch, step, phase.boosting);
      const double value = loss.total.scalar();
      if (!std::isfinite(value)) FailNonFinite(run_dir, corpus, "loss", epoch, step, ids);
      empty_support_steps += loss.empty_support;
      tape.Backward(loss.total);
      if (!GradsFinite(trainable)) FailNonFinite(run_dir, corpus, "gradient", epoch, step, ids);
      for (const Parameter* p : frozen)
        for (double g : p->grad.values()) frozen_abs += std::abs(g);
      ClipGradNorm(trainable, config.clip_norm);
      adam.Step(lr);
      if (models.quant) models.quant->AnnealStep();
      if (models.utt_quant) models.utt_quant->AnnealStep();

      const double step_ms = MsSince(step_start);
      loss_sum += value;
      log << epoch << "," << step << "," << Num(value) << "," << Num(lr) << ","
          << (config.log_wall_time ? Num(step_ms) : "0") << "\n";
      timing << epoch << "," << step << "," << Num(step_ms) << "\n";
      if (phase.boosting)
        components << epoch << "," << step << "," << Num(loss.s3rl.scalar()) << ","
                   << Num(loss.utt.scalar()) << "," << Num(config.uwdb_config.alpha) << ","
                   << Num(value) << "\n";
    }
    EpochSummary summary{epoch, loss_sum / config.steps_per_epoch, lr, MsSince(epoch_start)};
    result.epochs.push_back(summary);
    if (phase.boosting) result.frozen_grad_abs_sum.push_back(frozen_abs);

    const fs::path ckpt_path = run_dir / ("ckpt-epoch-" + std::to_string(epoch) + ".bin");
    SaveCheckpoint(ckpt_path,
                   PretrainCheckpoint(config, models, norm, phase.boosting, epoch, lineage),
                   config.checkpoint_precision);
    result.final_checkpoint = ckpt_path;
    log.flush();
    if (progress)
      *progress << config.method_name() << (phase.boosting ? " (boosting)" : "") << " epoch "
                << epoch << " loss " << summary.mean_loss << " lr " << lr << " "
                << static_cast<long>(summary.wall_ms) << " ms" << std::endl;
  }
  for (size_t i = 0; i < frozen.size(); ++i)
    if (!(frozen[i]->value == frozen_before[i])) result.frozen_tower_unchanged = false;

  nlohmann::json run;
  run["command"] = "pretrain";
  run["method"] = config.method_name();
  run["boosting_step"] = phase.boosting;
  run["final_checkpoint"] = result.final_checkpoint.filename().string();
  run["utterances_used"] = pool.size();
  run["utterances_too_short"] = corpus.utterances.size() - pool.size();
  run["empty_mask_support_steps"] = empty_support_steps;
  run["degenerate_similarity_count"] = DegenerateSimilarityCount();
  run["total_wall_ms"] = MsSince(run_start);
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochSummary& e : result.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"lr", e.lr}});
  run["epochs"] = epochs;
  if (!lineage.is_null()) run["lineage"] = lineage;
  if (phase.boosting) {
    run["frozen_grad_abs_sum"] = result.frozen_grad_abs_sum;
    run["frozen_tower_unchanged"] = result.frozen_tower_unchanged;
  }
  WriteJsonFile(run_dir / "run.json", run);
  return result;
}

}  // namespace

Normalizer Normalizer::Fit(const Corpus& corpus, std::span<const int> indices) {
  std::vector<int> all;
  if (indices.empty()) {
    for (size_t i = 0; i < corpus.utterances.size(); ++i) all.push_back(static_cast<int>(i));
    indices = all;
  }
  if (indices.empty()) throw ConfigError("cannot fit feature statistics on an empty corpus");
  const int d = corpus.utterances[indices[0]].features.frames.cols();
  Normalizer n;
  n.mean = Tensor(1, d);
  n.stddev = Tensor(1, d);
  double count = 0.0;
  for (int i : indices) {
    const Tensor& f = corpus.utterances[i].features.frames;
    if (f.cols() != d) throw ConfigError("feature dimension differs across the corpus");
    for (int t = 0; t < f.rows(); ++t)
      for (int c = 0; c < d; ++c) n.mean(0, c) += f(t, c);
    count += f.rows();
  }
  if (count == 0.0) throw ConfigError("cannot fit feature statistics on empty utterances");
  for (int c = 0; c < d; ++c) n.mean(0, c) /= count;
  for (int i : indices) {
    const Tensor& f = corpus.utterances[i].features.frames;
    for (int t = 0; t < f.rows(); ++t)
      for (int c = 0; c < d; ++c) {
        const double z = f(t, c) - n.mean(0, c);
        n.stddev(0, c) += z * z;
      }
  }
  for (int c = 0; c < d; ++c) {
    const double s = std::sqrt(n.stddev(0, c) / count);
    n.stddev(0, c) = s > 1e-8 ? s : 1.0;
  }
  return n;
}

Tensor Normalizer::Apply(const Tensor& frames) const {
  if (frames.cols() != mean.cols())
    throw ConfigError("features have " + std::to_string(frames.cols()) +
                      " dims, normalizer expects " + std::to_string(mean.cols()));
  Tensor out(frames.rows(), frames.cols());
  for (int t = 0; t < frames.rows(); ++t)
    for (int c = 0; c < frames.cols(); ++c)
      out(t, c) = (frames(t, c) - mean(0, c)) / stddev(0, c);
  return out;
}

void Normalizer::Export(Checkpoint* ckpt) const {
  ckpt->tensors.push_back({"norm.mean", mean, false});
  ckpt->tensors.push_back({"norm.std", stddev, false});
}

Normalizer Normalizer::Import(const Checkpoint& ckpt) {
  const NamedTensor* m = ckpt.Find("norm.mean");
  const NamedTensor* s = ckpt.Find("norm.std");
  if (!m || !s) throw ConfigError("checkpoint lacks feature normalization statistics");
  return {m->value, s->value};
}

std::vector<Parameter*> PretrainModels::Trainable() {
  std::vector<Parameter*> out = Pointers(lwt1->params());
  if (quant)
    for (Parameter* p : Pointers(quant->params())) out.push_back(p);
  if (utt_quant)
    for (Parameter* p : Pointers(utt_quant->params())) out.push_back(p);
  return out;
}

std::vector<Parameter*> PretrainModels::Frozen() {
  return lwt2 ? Pointers(lwt2->params()) : std::vector<Parameter*>{};
}

PretrainModels MakePretrainModels(const TrainConfig& config, bool boosting) {
  PretrainModels m;
  const ModelConfig encoder = config.model.EncoderOnly();
  m.lwt1 = std::make_unique<EncoderModel>(encoder, config.seed);
  if (config.method == Method::kCl)
    m.quant = std::make_unique<Codebook>(config.codebook, "quant", DeriveSeed(config.seed, 11));
  if (boosting) {
    m.lwt2 = std::make_unique<EncoderModel>(encoder, config.seed);
    m.utt_quant = std::make_unique<Codebook>(config.UtteranceCodebook(), "utt_quant",
                                             DeriveSeed(config.seed, 12));
  }
  return m;
}

BatchLoss PretrainBatchLoss(Tape& tape, const TrainConfig& config, PretrainModels& models,
                            std::span<const Tensor* const> batch, uint64_t step,
                            bool boosting, std::vector<Tensor>* cl_targets) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (config.method == Method::kScratch) throw ConfigError("scratch has no pretraining loss");
  if (config.method == Method::kCl && !models.quant)
    throw ConfigError("CL pretraining needs a codebook");
  if (boosting && (!models.lwt2 || !models.utt_quant))
    throw ConfigError("boosting needs the frozen tower and the utterance codebook");
  EncoderModel& lwt1 = *models.lwt1;
  const AttentionMode mode = PretrainMode(config.method);
  const int n = static_cast<int>(batch.size());

  std::vector<EncoderOutput> outs;
  std::vector<Var> per_utt;
  std::vector<Var> cl_outputs, targets;
  std::vector<uint8_t> cl_mask;
  for (int b = 0; b < n; ++b) {
    const Tensor& x = *batch[b];
    if (config.method == Method::kApc) {
      EncoderOutput out = lwt1.Run(tape, tape.Constant(x), mode);
      per_utt.push_back(
          ApcLoss(tape, PoolTargets(x), lwt1.Decode(tape, out.final), config.apc_shift));
      outs.push_back(std::move(out));
      continue;
    }
    const uint64_t mask_seed = Rng(config.seed, kStreamMask, step * kBatchStride + b).Bits();
    const MaskPlan plan = MakeMaskPlan(x.rows(), config.mask_proportion, mask_seed);
    const MaskPlan out_plan = DownsampleMaskPlan(plan);
    EncoderOutput out = lwt1.Run(tape, lwt1.ApplyMaskEmbedding(tape, x, plan), mode);
    if (config.method == Method::kMpc) {
      per_utt.push_back(MpcLoss(tape, PoolTargets(x), lwt1.Decode(tape, out.final), out_plan));
    } else {
      // Targets: frontend of the original input, without gradient.
      const bool reuse = cl_targets && cl_targets->size() == batch.size();
      if (reuse) {
        targets.push_back(tape.Constant((*cl_targets)[b]));
      } else {
        Tape scratch;
        targets.push_back(tape.Constant(lwt1.Frontend(scratch, scratch.Constant(x)).value()));
      }
      cl_outputs.push_back(out.final);
      cl_mask.insert(cl_mask.end(), out_plan.mask.begin(), out_plan.mask.end());
    }
    outs.push_back(std::move(out));
  }

  BatchLoss r;
  if (config.method == Method::kCl) {
    if (cl_targets && cl_targets->empty())
      for (const Var& t : targets) cl_targets->push_back(t.value());
    Rng gumbel(config.seed, kStreamGumbel, step);
    QuantizeResult q = models.quant->Quantize(tape, ops::ConcatRows(targets), true, &gumbel);
    ClLoss cl = ClFrameLoss(ops::ConcatRows(cl_outputs), q, models.quant->Entries(tape),
                            MaskPlan::FromMask(std::move(cl_mask)), config.cl_kappa,
                            config.cl_beta * config.diversity_sign);
    r.s3rl = cl.total;
    r.empty_support = cl.empty_support;
  } else {
    Var sum = per_utt[0];
    for (int b = 1; b < n; ++b) sum = ops::Add(sum, per_utt[b]);
    r.s3rl = ops::Scale(sum, 1.0 / n);
  }
  if (!boosting) {
    r.total = r.s3rl;
    return r;
  }

  const UwdbConfig& u = config.uwdb_config;
  std::vector<Var> u1, u2;
  for (int b = 0; b < n; ++b) {
    u1.push_back(UtteranceEmbedding(outs[b], u.tap_layer));
    // The frozen tower sees the unprocessed input.
    EncoderOutput o2 = models.lwt2->Run(tape, tape.Constant(*batch[b]), mode);
    u2.push_back(UtteranceEmbedding(o2, u.tap_layer));
  }
  Rng utt_gumbel(config.seed, kStreamUttGumbel, step);
  QuantizeResult uq = models.utt_quant->Quantize(tape, ops::Detach(ops::ConcatRows(u2)), true,
                                                 &utt_gumbel);
  UttLoss ul = UtteranceLoss(ops::ConcatRows(u1), uq, models.utt_quant->Entries(tape), u.kappa,
                             u.beta * config.diversity_sign);
  r.utt = ul.total;
  r.total = CombinedLoss(r.s3rl, r.utt, u.alpha);
  return r;
}

PretrainResult Pretrain(const TrainConfig& config, const Corpus& corpus, const fs::path& run_dir,
                        std::ostream* progress) {
  config.Validate();
  if (config.method == Method::kScratch)
    throw ConfigError("scratch means no pretraining; use apc, mpc or cl");
  if (config.epochs_pretrain < 1) throw ConfigError("epochs_pretrain must be >= 1");
  if (!config.uwdb)
    return RunPretrainPhase(config, corpus, run_dir, {false, config.epochs_pretrain,
                                                      config.init_checkpoint},
                            progress);
  if (config.epochs_uwdb < 1) throw ConfigError("epochs_uwdb must be >= 1");
  fs::path step1 = config.init_checkpoint;
  if (step1.empty()) {
    TrainConfig plain = config;
    plain.uwdb = false;
    step1 = RunPretrainPhase(plain, corpus, run_dir / "step1",
                             {false, config.epochs_pretrain, {}}, progress)
                .final_checkpoint;
  }
  return RunPretrainPhase(config, corpus, run_dir, {true, config.epochs_uwdb, step1}, progress);
}

std::vector<int> Labels(const Corpus& corpus) {
  std::vector<int> labels;
  for (const LabeledUtterance& u : corpus.utterances) labels.push_back(u.label);
  return labels;
}

FinetuneResult Finetune(const TrainConfig& config, const Corpus& labeled, const fs::path& run_dir,
                        std::ostream* progress) {
  config.Validate();
  if (labeled.num_classes() < 2) throw ConfigError("fine-tuning needs at least 2 classes");
  ModelConfig mc = config.model;
  if (mc.num_classes != 0 && mc.num_classes != labeled.num_classes())
    throw ConfigError("config has " + std::to_string(mc.num_classes) + " classes, corpus has " +
                      std::to_string(labeled.num_classes()));
  mc.num_classes = labeled.num_classes();
  mc.Validate();
  fs::create_directories(run_dir);
  TrainConfig resolved = config;
  resolved.model = mc;
  WriteJsonFile(run_dir / "config.json", resolved.ToJson());

  std::vector<int> usable = UsableIndices(labeled, kReceptiveField);
  if (usable.empty()) throw ConfigError("no labeled utterance is long enough");
  for (int i : usable)
    if (labeled.utterances[i].label < 0 || labeled.utterances[i].label >= mc.num_classes)
      throw ConfigError("label out of range for utterance " + std::to_string(i));
  // Deterministic shuffle, then the head of the order is held out.
  Rng split_rng(config.seed, kStreamSplit);
  for (size_t i = usable.size(); i > 1; --i)
    std::swap(usable[i - 1], usable[split_rng.Bits() % i]);
  const size_t n_hold =
      static_cast<size_t>(std::floor(config.holdout_fraction * usable.size() + 0.5));
  std::vector<int> holdout(usable.begin(), usable.begin() + n_hold);
  std::vector<int> train(usable.begin() + n_hold, usable.end());
  std::sort(holdout.begin(), holdout.end());
  std::sort(train.begin(), train.end());
  if (train.empty()) throw ConfigError("holdout_fraction leaves no training utterances");

  EncoderModel model(mc, config.seed);
  Normalizer norm;
  nlohmann::json lineage;
  if (!config.init_checkpoint.empty()) {
    const Checkpoint ck = LoadCheckpoint(config.init_checkpoint);
    CheckEncoderConfig(ck, mc, config.init_checkpoint);
    ImportParams(ck, EncoderPrefix(ck), &model.params(),
                 [&](const Parameter& p) { return model.IsClassifierParam(p); });
    norm = Normalizer::Import(ck);
    lineage = {{"init_checkpoint", fs::absolute(config.init_checkpoint).string()},
               {"init_sha256", FileDigest(config.init_checkpoint)},
               {"init_method", ck.meta.value("method", std::string())}};
  } else {
    norm = Normalizer::Fit(labeled, train);
  }
  model.FreezeEncoder(config.freeze_mode == FreezeMode::kEncoderFrozen);

  std::vector<Tensor> feats(labeled.utterances.size());
  ParallelFor(usable.size(), [&](size_t i) {
    feats[usable[i]] = norm.Apply(labeled.utterances[usable[i]].features.frames);
  });

  std::vector<Parameter*> params = Pointers(model.params());
  std::vector<Tensor> frozen_before;
  for (const Parameter* p : params)
    if (!p->requires_grad) frozen_before.push_back(p->value);
  Adam adam(params, config.adam);

  std::ofstream log = OpenCsv(run_dir / "log.csv", "epoch,step,loss,lr,wall_ms");
  std::ofstream timing = OpenCsv(run_dir / "timing.csv", "epoch,step,wall_ms");
  FinetuneResult result;
  const auto run_start = std::chrono::steady_clock::now();
  const int bs = config.finetune_batch_size;
  for (int epoch = 0; epoch < config.epochs_finetune; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const double lr = LearningRate(config.lr0, config.lr_decay_per_epoch, epoch);
    double loss_sum = 0.0;
    for (int s = 0; s < config.finetune_steps_per_epoch; ++s) {
      const auto step_start = std::chrono::steady_clock::now();
      const uint64_t step = static_cast<uint64_t>(epoch) * config.finetune_steps_per_epoch + s;
      const std::vector<int> ids = SampleBatch(config.seed, step, bs, train);
      ZeroGrads(params);
      Tape tape;
      std::vector<Var> logits;
      std::vector<int> labels;
      for (int id : ids) {
        EncoderOutput out = model.Run(tape, tape.Constant(feats[id]), AttentionMode::kNone);
        logits.push_back(model.Classify(tape, out.final));
        labels.push_back(labeled.utterances[id].label);
      }
      Var ce = ops::CrossEntropyRows(ops::ConcatRows(logits), labels);
      Var loss = ops::Scale(ops::Sum(ce), 1.0 / bs);
      const double value = loss.scalar();
      if (!std::isfinite(value)) FailNonFinite(run_dir, labeled, "loss", epoch, step, ids);
      tape.Backward(loss);
      if (!GradsFinite(params)) FailNonFinite(run_dir, labeled, "gradient", epoch, step, ids);
      ClipGradNorm(params, config.clip_norm);
      adam.Step(lr);
      const double step_ms = MsSince(step_start);
      loss_sum += value;
      log << epoch << "," << step << "," << Num(value) << "," << Num(lr) << ","
          << (config.log_wall_time ? Num(step_ms) : "0") << "\n";
      timing << epoch << "," << step << "," << Num(step_ms) << "\n";
    }
    EpochSummary summary{epoch, loss_sum / config.finetune_steps_per_epoch, lr,
                         MsSince(epoch_start)};
    result.epochs.push_back(summary);

    Checkpoint ck;
    ck.config = mc.ToJson();
    ck.meta = {{"kind", "classifier"},
               {"epoch", epoch},
               {"encoder_prefix", ""},
               {"class_names", labeled.class_names},
               {"freeze_mode", config.freeze_mode == FreezeMode::kNone ? "none" : "encoder_frozen"},
               {"seed", config.seed}};
    if (!lineage.is_null()) ck.meta["lineage"] = lineage;
    ExportParams(model.params(), "", false, &ck);
    norm.Export(&ck);
    const fs::path ckpt_path = run_dir / ("ckpt-epoch-" + std::to_string(epoch) + ".bin");
    SaveCheckpoint(ckpt_path, ck, config.checkpoint_precision);
    result.final_checkpoint = ckpt_path;
    log.flush();
    if (progress)
      *progress << "finetune epoch " << epoch << " loss " << summary.mean_loss << " lr " << lr
                << " " << static_cast<long>(summary.wall_ms) << " ms" << std::endl;
  }

  // Score with the in-memory model (checkpoints may be stored in f32).
  auto accuracy = [&](std::span<const int> ids) {
    std::vector<int> pred(ids.size()), gold(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
      Tape tape;
      EncoderOutput out = model.Run(tape, tape.Constant(feats[ids[i]]), AttentionMode::kNone);
      const Tensor& z = model.Classify(tape, out.final).value();
      pred[i] = static_cast<int>(std::max_element(z.values().begin(), z.values().end()) -
                                 z.values().begin());
      gold[i] = labeled.utterances[ids[i]].label;
    }
    return Accuracy(pred, gold);
  };
  result.train_accuracy = accuracy(train);
  if (!holdout.empty()) result.holdout_accuracy = accuracy(holdout);

  bool frozen_unchanged = true;
  size_t k = 0;
  for (const Parameter* p : params)
    if (!p->requires_grad && !(p->value == frozen_before[k++])) frozen_unchanged = false;

  nlohmann::json run;
  run["command"] = "finetune";
  run["init"] = config.init_checkpoint.empty() ? "scratch" : "checkpoint";
  if (!lineage.is_null()) run["lineage"] = lineage;
  run["freeze_mode"] = config.freeze_mode == FreezeMode::kNone ? "none" : "encoder_frozen";
  run["final_checkpoint"] = result.final_checkpoint.filename().string();
  run["train_utterances"] = train.size();
  run["holdout_utterances"] = holdout.size();
  run["train_accuracy"] = result.train_accuracy;
  if (!holdout.empty()) run["holdout_accuracy"] = result.holdout_accuracy;
  run["frozen_parameters_unchanged"] = frozen_unchanged;
  run["total_wall_ms"] = MsSince(run_start);
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochSummary& e : result.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"lr", e.lr}});
  run["epochs"] = epochs;
  WriteJsonFile(run_dir / "run.json", run);
  return result;
}

Classifier LoadClassifier(const fs::path& checkpoint) {
  const Checkpoint ck = LoadCheckpoint(checkpoint);
  if (ck.meta.value("kind", std::string()) != "classifier")
    throw ConfigError(checkpoint.string() + " is not a classifier checkpoint");
  const ModelConfig mc = ModelConfig::FromJson(ck.config);
  if (mc.num_classes < 2) throw ConfigError("classifier checkpoint without classes");
  Classifier c;
  c.model = std::make_unique<EncoderModel>(mc, 0);
  ImportParams(ck, "", &c.model->params());
  c.model->params().SetRequiresGrad(false);
  for (Parameter& p : c.model->params()) p.ZeroGrad();
  c.norm = Normalizer::Import(ck);
  if (ck.meta.contains("class_names"))
    c.class_names = ck.meta["class_names"].get<std::vector<std::string>>();
  return c;
}

Tensor Posteriors(Classifier& classifier, const Tensor& frames) {
  Tape tape;
  EncoderModel& m = *classifier.model;
  EncoderOutput out =
      m.Run(tape, tape.Constant(classifier.norm.Apply(frames)), AttentionMode::kNone);
  return ops::SoftmaxRows(m.Classify(tape, out.final)).value();
}

std::vector<int> Predict(Classifier& classifier, const Corpus& corpus) {
  std::vector<int> pred(corpus.utterances.size());
  ParallelFor(pred.size(), [&](size_t i) {
    const Tensor p = Posteriors(classifier, corpus.utterances[i].features.frames);
    pred[i] = static_cast<int>(std::max_element(p.values().begin(), p.values().end()) -
                               p.values().begin());
  });
  return pred;
}

std::vector<ScoredTrial> ScoreTrials(Classifier& classifier, const Corpus& corpus, int keyword) {
  const int classes = classifier.model->config().num_classes;
  if (keyword < 0 || keyword >= classes)
    throw ConfigError("keyword class " + std::to_string(keyword) + " out of range");
  std::vector<ScoredTrial> trials(corpus.utterances.size());
  ParallelFor(trials.size(), [&](size_t i) {
    const Tensor p = Posteriors(classifier, corpus.utterances[i].features.frames);
    trials[i] = {p(0, keyword), corpus.utterances[i].label == keyword};
  });
  return trials;
}

}  // namespace tssl
