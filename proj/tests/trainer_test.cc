// tests/trainer_test.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "test_util.h"
#include "tssl/checkpoint.h"
#include "tssl/config.h"
#include "tssl/digest.h"
#include "tssl/optimizer.h"
#include "tssl/trainer.h"

namespace tssl {
namespace {

namespace fs = std::filesystem;

TrainConfig SmallConfig(Method method, bool uwdb = false) {
  TrainConfig c;
  c.method = method;
  c.uwdb = uwdb;
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.ffn_dim = 32;
  c.model.n_blocks = 2;
  c.model.frontend_channels = {2, 4, 4};
  c.codebook.num_entries = 8;
  c.codebook.input_dim = 16;
  c.codebook.entry_dim = 16;
  c.uwdb_config.codebook_size = 4;
  c.apc_shift = 2;
  c.batch_size = 4;
  c.steps_per_epoch = 3;
  c.epochs_pretrain = 2;
  c.epochs_uwdb = 2;
  c.epochs_finetune = 2;
  c.finetune_batch_size = 4;
  c.finetune_steps_per_epoch = 3;
  c.seed = 5;
  c.checkpoint_precision = StoragePrecision::kF64;
  return c;
}

const Corpus& SmallCorpus() {
  static const Corpus corpus = [] {
    SynthCorpusSpec spec;
    spec.num_classes = 3;
    spec.utterances_per_class = 4;
    spec.utterance_sec = 0.3;
    spec.seed = 1;
    return SynthesizeCorpus(spec);
  }();
  return corpus;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> ReadCsv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST(ScheduleTest, ExponentialDecay) {
  EXPECT_NEAR(LearningRate(1e-3, 0.95, 3), 8.5737e-4, 1e-8);
  double lr = 1e-3;
  for (int e = 0; e < 20; ++e) {
    EXPECT_NEAR(LearningRate(1e-3, 0.95, e), lr, 1e-18);
    lr *= 0.95;
  }
  EXPECT_EQ(LearningRate(1e-3, 0.95, 0), 1e-3);
}

TEST(AdamTest, MatchesScalarReference) {
  Parameter p{"w", Tensor::Scalar(0.3), Tensor::Scalar(0.0)};
  Parameter frozen{"f", Tensor::Scalar(1.0), Tensor::Scalar(0.0)};
  frozen.requires_grad = false;
  Adam adam({&p, &frozen});
  double w = 0.3, m = 0, v = 0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.01;
  for (int t = 1; t <= 50; ++t) {
    const double g = 2 * w - 1 + 0.1 * std::sin(t);
    p.grad[0] = g;
    frozen.grad[0] = 5.0;
    adam.Step(lr);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    w -= lr * mh / (std::sqrt(vh) + eps);
    EXPECT_NEAR(p.value[0], w, 1e-14) << t;
  }
  EXPECT_EQ(frozen.value[0], 1.0);
  EXPECT_EQ(adam.step_count(), 50);
}

TEST(ClipTest, ScalesToMaxNorm) {
  Parameter a{"a", Tensor(1, 2), Tensor(1, 2)}, b{"b", Tensor(1, 1), Tensor(1, 1)};
  a.grad[0] = 3;
  a.grad[1] = 0;
  b.grad[0] = 4;
  std::vector<Parameter*> ps{&a, &b};
  EXPECT_DOUBLE_EQ(GlobalGradNorm(ps), 5.0);
  EXPECT_DOUBLE_EQ(ClipGradNorm(ps, 10.0), 5.0);
  EXPECT_EQ(a.grad[0], 3.0);
  EXPECT_DOUBLE_EQ(ClipGradNorm(ps, 1.0), 5.0);
  EXPECT_NEAR(GlobalGradNorm(ps), 1.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  a.grad[0] = 30;
  ClipGradNorm(ps, 0.0);
  EXPECT_EQ(a.grad[0], 30.0);
}

TEST(NormalizerTest, GlobalMeanAndStd) {
  Corpus c;
  c.class_names = {"a"};
  Tensor x(2, 2), y(1, 2);
  x(0, 0) = 1;
  x(1, 0) = 3;
  y(0, 0) = 5;
  x(0, 1) = y(0, 1) = 2;
  x(1, 1) = 2;
  c.utterances.push_back({{x}, 0, "x"});
  c.utterances.push_back({{y}, 0, "y"});
  Normalizer n = Normalizer::Fit(c);
  EXPECT_DOUBLE_EQ(n.mean(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(n.mean(0, 1), 2.0);
  EXPECT_NEAR(n.stddev(0, 0), std::sqrt(8.0 / 3.0), 1e-12);
  const Tensor z = n.Apply(x);
  EXPECT_NEAR(z(0, 0), -2.0 / std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_TRUE(std::isfinite(z(0, 1)));
  Checkpoint ck;
  n.Export(&ck);
  Normalizer back = Normalizer::Import(ck);
  EXPECT_TRUE(back.mean == n.mean);
  EXPECT_TRUE(back.stddev == n.stddev);
}

TEST(TrainConfigTest, MethodNames) {
  bool uwdb = false;
  EXPECT_EQ(ParseMethod("apc", &uwdb), Method::kApc);
  EXPECT_FALSE(uwdb);
  EXPECT_EQ(ParseMethod("cl+", &uwdb), Method::kCl);
  EXPECT_TRUE(uwdb);
  EXPECT_EQ(ParseMethod("scratch", &uwdb), Method::kScratch);
  EXPECT_THROW(ParseMethod("bert", &uwdb), ConfigError);
  EXPECT_EQ(MethodName(Method::kMpc, true), "mpc+");
}

TEST(TrainConfigTest, JsonRoundTripAndStrictness) {
  TrainConfig c = SmallConfig(Method::kCl, true);
  c.holdout_fraction = 0.25;
  c.freeze_mode = FreezeMode::kEncoderFrozen;
  TrainConfig back = TrainConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  nlohmann::json bad = c.ToJson();
  bad["lr"] = 0.1;
  EXPECT_THROW(TrainConfig::FromJson(bad), ConfigError);
  bad = c.ToJson();
  bad["lr0"] = "fast";
  EXPECT_THROW(TrainConfig::FromJson(bad), ConfigError);
}

TEST(TrainConfigTest, Invariants) {
  TrainConfig c = SmallConfig(Method::kApc);
  c.lr0 = 0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = SmallConfig(Method::kApc);
  c.lr_decay_per_epoch = 1.01;
  EXPECT_THROW(c.Validate(), ConfigError);
  c.lr_decay_per_epoch = 1.0;
  EXPECT_NO_THROW(c.Validate());
  c = SmallConfig(Method::kScratch, true);
  EXPECT_THROW(c.Validate(), ConfigError);
  c = SmallConfig(Method::kApc);
  c.codebook.entry_dim = 8;
  EXPECT_THROW(c.Validate(), ConfigError);
}

TEST(PretrainTest, RunIsDeterministicAndLogged) {
  const fs::path a = testing::TempDir("pre_a"), b = testing::TempDir("pre_b");
  TrainConfig c = SmallConfig(Method::kMpc);
  PretrainResult ra = Pretrain(c, SmallCorpus(), a);
  Pretrain(c, SmallCorpus(), b);
  EXPECT_EQ(Slurp(a / "log.csv"), Slurp(b / "log.csv"));
  EXPECT_EQ(Slurp(a / "ckpt-epoch-1.bin"), Slurp(b / "ckpt-epoch-1.bin"));
  EXPECT_EQ(ra.final_checkpoint, a / "ckpt-epoch-1.bin");
  EXPECT_TRUE(fs::exists(a / "ckpt-epoch-0.bin"));
  EXPECT_TRUE(fs::exists(a / "config.json"));
  EXPECT_TRUE(fs::exists(a / "timing.csv"));

  auto rows = ReadCsv(a / "log.csv");
  ASSERT_EQ(rows.size(), 1u + 6u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"epoch", "step", "loss", "lr", "wall_ms"}));
  for (size_t i = 1; i < rows.size(); ++i) {
    const int epoch = std::stoi(rows[i][0]);
    EXPECT_EQ(epoch, static_cast<int>(i - 1) / 3);
    EXPECT_EQ(std::stoi(rows[i][1]), static_cast<int>(i - 1));
    EXPECT_EQ(std::stod(rows[i][3]), LearningRate(c.lr0, c.lr_decay_per_epoch, epoch));
    EXPECT_EQ(rows[i][4], "0");
  }
  const nlohmann::json run = ReadJsonFile(a / "run.json");
  EXPECT_EQ(run["epochs"].size(), 2u);
  EXPECT_EQ(run["utterances_used"], 12);

  c.seed = 6;
  const fs::path d = testing::TempDir("pre_d");
  Pretrain(c, SmallCorpus(), d);
  EXPECT_NE(Slurp(a / "log.csv"), Slurp(d / "log.csv"));
}

TEST(PretrainTest, ApcLossDecreases) {
  const fs::path dir = testing::TempDir("pre_apc");
  TrainConfig c = SmallConfig(Method::kApc);
  c.lr0 = 3e-3;
  c.steps_per_epoch = 10;
  PretrainResult r = Pretrain(c, SmallCorpus(), dir);
  ASSERT_EQ(r.epochs.size(), 2u);
  EXPECT_LT(r.epochs[1].mean_loss, r.epochs[0].mean_loss);
}

TEST(PretrainTest, ClCheckpointCarriesCodebook) {
  const fs::path dir = testing::TempDir("pre_cl");
  TrainConfig c = SmallConfig(Method::kCl);
  PretrainResult r = Pretrain(c, SmallCorpus(), dir);
  Checkpoint ck = LoadCheckpoint(r.final_checkpoint);
  EXPECT_NE(ck.Find("quant.entries"), nullptr);
  EXPECT_NE(ck.Find("final_norm.gamma"), nullptr);
  EXPECT_NE(ck.Find("norm.mean"), nullptr);
  EXPECT_EQ(ck.meta["method"], "cl");
}

TEST(PretrainTest, BoostingRunKeepsFrozenTowerAndComposesLoss) {
  const fs::path dir = testing::TempDir("pre_boost");
  TrainConfig c = SmallConfig(Method::kApc, true);
  PretrainResult r = Pretrain(c, SmallCorpus(), dir);
  EXPECT_TRUE(fs::exists(dir / "step1" / "ckpt-epoch-1.bin"));
  EXPECT_EQ(r.step1_sha256, FileDigest(dir / "step1" / "ckpt-epoch-1.bin"));
  ASSERT_EQ(r.frozen_grad_abs_sum.size(), 2u);
  for (double g : r.frozen_grad_abs_sum) EXPECT_EQ(g, 0.0);
  EXPECT_TRUE(r.frozen_tower_unchanged);

  auto rows = ReadCsv(dir / "components.csv");
  ASSERT_EQ(rows.size(), 7u);
  for (size_t i = 1; i < rows.size(); ++i) {
    const double s = std::stod(rows[i][2]), u = std::stod(rows[i][3]), a = std::stod(rows[i][4]);
    EXPECT_EQ(a, 0.9);
    EXPECT_NEAR(std::stod(rows[i][5]), a * s + (1 - a) * u, 1e-12);
  }
  Checkpoint ck = LoadCheckpoint(r.final_checkpoint);
  EXPECT_EQ(ck.meta["encoder_prefix"], "lwt1.");
  ASSERT_NE(ck.Find("lwt2.final_norm.gamma"), nullptr);
  EXPECT_TRUE(ck.Find("lwt2.final_norm.gamma")->read_only);
  EXPECT_FALSE(ck.Find("lwt1.final_norm.gamma")->read_only);
  EXPECT_NE(ck.Find("utt_quant.entries"), nullptr);
  // The frozen tower is the step-1 encoder, untouched.
  Checkpoint s1 = LoadCheckpoint(r.step1_checkpoint);
  for (const NamedTensor& t : s1.tensors) {
    if (t.name.rfind("norm.", 0) == 0 || t.name.rfind("quant.", 0) == 0) continue;
    const NamedTensor* frozen = ck.Find("lwt2." + t.name);
    ASSERT_NE(frozen, nullptr) << t.name;
    EXPECT_TRUE(frozen->value == t.value) << t.name;
  }
  EXPECT_EQ(ReadJsonFile(dir / "run.json")["lineage"]["init_sha256"], r.step1_sha256);
}

TEST(PretrainTest, AlphaOneEqualsPlainContinuation) {
  const fs::path base = testing::TempDir("pre_alpha_base");
  TrainConfig plain = SmallConfig(Method::kMpc);
  PretrainResult step1 = Pretrain(plain, SmallCorpus(), base);

  TrainConfig boost = SmallConfig(Method::kMpc, true);
  boost.uwdb_config.alpha = 1.0;
  boost.init_checkpoint = step1.final_checkpoint.string();
  const fs::path bdir = testing::TempDir("pre_alpha_boost");
  Pretrain(boost, SmallCorpus(), bdir);

  TrainConfig cont = SmallConfig(Method::kMpc);
  cont.epochs_pretrain = boost.epochs_uwdb;
  cont.init_checkpoint = step1.final_checkpoint.string();
  const fs::path cdir = testing::TempDir("pre_alpha_cont");
  Pretrain(cont, SmallCorpus(), cdir);
  EXPECT_EQ(Slurp(bdir / "log.csv"), Slurp(cdir / "log.csv"));
}

TEST(PretrainTest, ErrorsAreReported) {
  const fs::path dir = testing::TempDir("pre_err");
  EXPECT_THROW(Pretrain(SmallConfig(Method::kScratch), SmallCorpus(), dir), ConfigError);

  TrainConfig c = SmallConfig(Method::kApc);
  c.apc_shift = 40;
  EXPECT_THROW(Pretrain(c, SmallCorpus(), dir), ConfigError);

  // A step-1 checkpoint of another method cannot seed a boosted run.
  PretrainResult mpc = Pretrain(SmallConfig(Method::kMpc), SmallCorpus(), dir / "mpc");
  TrainConfig boost = SmallConfig(Method::kApc, true);
  boost.init_checkpoint = mpc.final_checkpoint.string();
  EXPECT_THROW(Pretrain(boost, SmallCorpus(), dir / "boost"), ConfigError);

  TrainConfig wide = SmallConfig(Method::kMpc);
  wide.model.d_model = 32;
  wide.codebook.input_dim = wide.codebook.entry_dim = 32;
  wide.init_checkpoint = mpc.final_checkpoint.string();
  EXPECT_THROW(Pretrain(wide, SmallCorpus(), dir / "wide"), ConfigError);
}

TEST(PretrainTest, NonFiniteLossAbortsWithBatchDump) {
  Corpus bad = SmallCorpus();
  for (auto& u : bad.utterances) u.features.frames(0, 0) = std::nan("");
  const fs::path dir = testing::TempDir("pre_nan");
  try {
    Pretrain(SmallConfig(Method::kMpc), bad, dir);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
  const nlohmann::json dump = ReadJsonFile(dir / "nonfinite_batch.json");
  EXPECT_EQ(dump["step"], 0);
  EXPECT_EQ(dump["batch"].size(), 4u);
}

TEST(FinetuneTest, FrozenEncoderOnlyMovesClassifier) {
  const fs::path pre = testing::TempDir("ft_pre");
  PretrainResult p = Pretrain(SmallConfig(Method::kApc), SmallCorpus(), pre);
  TrainConfig c = SmallConfig(Method::kApc);
  c.init_checkpoint = p.final_checkpoint.string();
  c.freeze_mode = FreezeMode::kEncoderFrozen;
  const fs::path dir = testing::TempDir("ft_frozen");
  FinetuneResult r = Finetune(c, SmallCorpus(), dir);
  Checkpoint init = LoadCheckpoint(p.final_checkpoint), out = LoadCheckpoint(r.final_checkpoint);
  EXPECT_EQ(out.meta["kind"], "classifier");
  for (const NamedTensor& t : out.tensors) {
    if (t.name.rfind("classifier.", 0) == 0) {
      EXPECT_EQ(init.Find(t.name), nullptr);
      continue;
    }
    const NamedTensor* before = init.Find(t.name);
    ASSERT_NE(before, nullptr) << t.name;
    EXPECT_TRUE(before->value == t.value) << t.name;
  }
  EXPECT_TRUE(ReadJsonFile(dir / "run.json")["frozen_parameters_unchanged"].get<bool>());

  c.freeze_mode = FreezeMode::kNone;
  const fs::path dir2 = testing::TempDir("ft_open");
  FinetuneResult r2 = Finetune(c, SmallCorpus(), dir2);
  Checkpoint open = LoadCheckpoint(r2.final_checkpoint);
  EXPECT_FALSE(open.Find("final_norm.gamma")->value == init.Find("final_norm.gamma")->value);
}

TEST(FinetuneTest, FromBoostedCheckpointUsesTrainedTower) {
  const fs::path pre = testing::TempDir("ft_boost_pre");
  PretrainResult p = Pretrain(SmallConfig(Method::kMpc, true), SmallCorpus(), pre);
  TrainConfig c = SmallConfig(Method::kMpc);
  c.init_checkpoint = p.final_checkpoint.string();
  c.freeze_mode = FreezeMode::kEncoderFrozen;
  FinetuneResult r = Finetune(c, SmallCorpus(), testing::TempDir("ft_boost"));
  Checkpoint init = LoadCheckpoint(p.final_checkpoint), out = LoadCheckpoint(r.final_checkpoint);
  EXPECT_TRUE(out.Find("final_norm.gamma")->value == init.Find("lwt1.final_norm.gamma")->value);
}

TEST(FinetuneTest, HoldoutSplitAndClassifierRoundTrip) {
  TrainConfig c = SmallConfig(Method::kScratch);
  c.holdout_fraction = 0.25;
  const fs::path dir = testing::TempDir("ft_hold");
  FinetuneResult r = Finetune(c, SmallCorpus(), dir);
  const nlohmann::json run = ReadJsonFile(dir / "run.json");
  EXPECT_EQ(run["holdout_utterances"], 3);
  EXPECT_EQ(run["train_utterances"], 9);
  EXPECT_GE(r.holdout_accuracy, 0.0);

  Classifier cls = LoadClassifier(r.final_checkpoint);
  EXPECT_EQ(cls.class_names, SmallCorpus().class_names);
  const Tensor p = Posteriors(cls, SmallCorpus().utterances[0].features.frames);
  double sum = 0;
  for (double v : p.values()) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  auto pred = Predict(cls, SmallCorpus());
  EXPECT_EQ(pred.size(), 12u);
  auto trials = ScoreTrials(cls, SmallCorpus(), 1);
  for (size_t i = 0; i < trials.size(); ++i) {
    EXPECT_EQ(trials[i].is_target, SmallCorpus().utterances[i].label == 1);
    EXPECT_EQ(trials[i].score, Posteriors(cls, SmallCorpus().utterances[i].features.frames)(0, 1));
  }
  EXPECT_THROW(ScoreTrials(cls, SmallCorpus(), 3), ConfigError);
}

TEST(FinetuneTest, MismatchesAreErrors) {
  TrainConfig c = SmallConfig(Method::kScratch);
  c.model.num_classes = 5;
  EXPECT_THROW(Finetune(c, SmallCorpus(), testing::TempDir("ft_bad")), ConfigError);
  const fs::path pre = testing::TempDir("ft_bad_pre");
  PretrainResult p = Pretrain(SmallConfig(Method::kMpc), SmallCorpus(), pre);
  TrainConfig wide = SmallConfig(Method::kScratch);
  wide.model.ffn_dim = 48;
  wide.init_checkpoint = p.final_checkpoint.string();
  EXPECT_THROW(Finetune(wide, SmallCorpus(), testing::TempDir("ft_bad2")), ConfigError);
  EXPECT_THROW(LoadClassifier(p.final_checkpoint), ConfigError);
}

TEST(FinetuneTest, SeparableTwoClassSetIsLearned) {
  SynthCorpusSpec spec;
  spec.num_classes = 2;
  spec.utterances_per_class = 8;
  spec.utterance_sec = 0.3;
  spec.seed = 4;
  const Corpus two = SynthesizeCorpus(spec);
  TrainConfig c = SmallConfig(Method::kScratch);
  c.epochs_finetune = 10;
  c.finetune_steps_per_epoch = 4;
  FinetuneResult r = Finetune(c, two, testing::TempDir("ft_two"));
  EXPECT_GT(r.train_accuracy, 0.95);
}

TEST(FinetuneTest, DeterministicLogs) {
  TrainConfig c = SmallConfig(Method::kScratch);
  const fs::path a = testing::TempDir("ft_det_a"), b = testing::TempDir("ft_det_b");
  Finetune(c, SmallCorpus(), a);
  Finetune(c, SmallCorpus(), b);
  EXPECT_EQ(Slurp(a / "log.csv"), Slurp(b / "log.csv"));
}

}  // namespace
}  // namespace tssl
