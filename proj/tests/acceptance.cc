// tests/acceptance.cc

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

// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "det_oracle.h"
#include "param_oracle.h"
#include "test_util.h"
#include "tssl/checkpoint.h"
#include "tssl/config.h"
#include "tssl/eval.h"
#include "tssl/model.h"
#include "tssl/objectives.h"
#include "tssl/quantizer.h"
#include "tssl/selftest.h"
#include "tssl/trainer.h"

namespace tssl {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<double>> ReadNumericCsv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

// Small model over 64-D features for the training-based criteria.
TrainConfig SmallConfig(Method method, bool uwdb) {
  TrainConfig c;
  c.method = method;
  c.uwdb = uwdb;
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.ffn_dim = 32;
  c.model.n_blocks = 2;
  c.model.frontend_channels = {2, 4, 4};
  c.codebook.num_entries = 8;
  c.codebook.input_dim = c.codebook.entry_dim = 16;
  c.uwdb_config.codebook_size = 4;
  c.apc_shift = 2;
  c.batch_size = 4;
  c.steps_per_epoch = 4;
  c.epochs_pretrain = 2;
  c.epochs_uwdb = 2;
  c.seed = 11;
  c.checkpoint_precision = StoragePrecision::kF64;
  return c;
}

const Corpus& SmallCorpus() {
  static const Corpus corpus = [] {
    SynthCorpusSpec spec;
    spec.num_classes = 4;
    spec.utterances_per_class = 5;
    spec.utterance_sec = 0.3;
    spec.seed = 21;
    return SynthesizeCorpus(spec);
  }();
  return corpus;
}

Outcome GradientCorrectness() {
  const auto t0 = std::chrono::steady_clock::now();
  const size_t toy_params = EncoderModel(ToyConfig().model, 0).CountParams();
  GradCheckOptions opt;
  opt.all_coordinates = true;
  const auto checks = RunLossGradChecks(opt);
  double worst = 0;
  std::string worst_name;
  size_t coords = 0;
  for (const auto& c : checks) {
    coords += c.result.coordinates;
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      worst_name = c.name + ":" + c.result.worst_param;
    }
  }
  const double secs = Seconds(t0);
  Outcome o;
  o.pass = worst < 1e-4 && secs < 300 && toy_params <= 10000 && checks.size() == 10;
  o.detail = std::to_string(checks.size()) + " loss cases, " + std::to_string(coords) +
             " coordinates, toy encoder " + std::to_string(toy_params) + " params, max rel err " +
             Fmt("%.3g", worst) + " (" + worst_name + "), " + Fmt("%.1f", secs) + " s";
  return o;
}

Outcome ParameterBudget() {
  ModelConfig c;
  const long got = static_cast<long>(EncoderModel(c, 0).CountParams());
  const long want = testing::ClosedFormCount(c);
  return {got == want && got <= 330000,
          "count_params " + std::to_string(got) + ", closed form " + std::to_string(want) +
              ", budget 330000"};
}

Outcome Causality() {
  EncoderModel m(ModelConfig{}, 3);
  Rng rng(3, 7);
  int violations = 0, compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int t = 20 + static_cast<int>(rng.Bits() % 80);
    const Tensor x = testing::RandomTensor(t, 64, rng);
    const int frame = static_cast<int>(rng.Bits() % t);
    Tensor y = x;
    for (int k = 0; k < 64; ++k) y(frame, k) += rng.Normal();
    Tape ta, tb;
    EncoderOutput a = m.Run(ta, ta.Constant(x), AttentionMode::kCausal);
    EncoderOutput b = m.Run(tb, tb.Constant(y), AttentionMode::kCausal);
    // Encoder positions whose frontend window ends before the perturbed
    // frame: row r sees input frames up to 2r + 3.
    for (int r = 0; r < a.final.rows() && 2 * r + 3 < frame; ++r) {
      for (size_t blk = 0; blk < a.blocks.size(); ++blk)
        for (int k = 0; k < a.blocks[blk].cols(); ++k) violations += a.blocks[blk].value()(r, k) != b.blocks[blk].value()(r, k);
      for (int k = 0; k < a.final.cols(); ++k) violations += a.final.value()(r, k) != b.final.value()(r, k);
      ++compared;
    }
    // Perturb the encoder input directly at position p.
    const int tp = a.final.rows();
    const int p = static_cast<int>(rng.Bits() % tp);
    Tensor h = testing::RandomTensor(tp, 64, rng);
    Tensor h2 = h;
    for (int k = 0; k < 64; ++k) h2(p, k) += rng.Normal();
    Tape tc, td;
    auto ea = m.Encode(tc, tc.Constant(h), {AttentionMode::kCausal, tp});
    auto eb = m.Encode(td, td.Constant(h2), {AttentionMode::kCausal, tp});
    for (size_t blk = 0; blk < ea.size(); ++blk)
      for (int r = 0; r < p; ++r)
        for (int k = 0; k < 64; ++k) violations += ea[blk].value()(r, k) != eb[blk].value()(r, k);
    compared += p;
  }
  return {violations == 0, "100 trials, " + std::to_string(compared) + " positions compared, " +
                               std::to_string(violations) + " differing values"};
}

Outcome LossFixedPoints() {
  Rng rng(4, 7);
  double apc = 0, mpc = 0, nce = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int t = 10 + static_cast<int>(rng.Bits() % 40);
    const int n = 1 + static_cast<int>(rng.Bits() % (t - 1));
    const Tensor x = testing::RandomTensor(t, 64, rng);
    Tensor y = testing::RandomTensor(t, 64, rng);
    for (int i = 0; i + n < t; ++i)
      for (int k = 0; k < 64; ++k) y(i, k) = x(i + n, k);
    Tape tape;
    apc = std::max(apc, std::abs(ApcLoss(tape, x, tape.Constant(y), n).scalar()));

    const MaskPlan plan = MakeMaskPlan(t, 0.5, trial);
    Tensor y2 = y;
    for (int i = 0; i < t; ++i)
      if (!plan.mask[i])
        for (int k = 0; k < 64; ++k) y2(i, k) += 10.0 * rng.Normal();
    mpc = std::max(mpc, std::abs(MpcLoss(tape, x, tape.Constant(y), plan).scalar() -
                                 MpcLoss(tape, x, tape.Constant(y2), plan).scalar()));
  }
  for (int v : {2, 32, 64}) {
    Tensor entries(v, v + 1);
    for (int i = 0; i < v; ++i) entries(i, i + 1) = 1.0 + rng.Uniform();
    Tensor q(1, v + 1);
    q(0, 0) = 1.0 + rng.Uniform();
    std::vector<int> idx{static_cast<int>(rng.Bits() % v)};
    Tensor pos(1, v + 1);
    pos(0, idx[0] + 1) = entries(idx[0], idx[0] + 1);
    Tape tape;
    const double got = InfoNceRows(tape.Constant(q), tape.Constant(pos), idx, tape.Constant(entries), 0.1).scalar();
    nce = std::max(nce, std::abs(got - std::log(static_cast<double>(v))));
  }
  return {apc <= 1e-9 && mpc <= 1e-9 && nce <= 1e-9,
          "apc zero case " + Fmt("%.3g", apc) + ", mpc unmasked invariance " + Fmt("%.3g", mpc) +
              ", infoNCE log V (V=2,32,64) " + Fmt("%.3g", nce)};
}

Outcome DiversityBounds() {
  Rng rng(5, 7);
  int out_of_range = 0;
  double uniform_err = 0, onehot_err = 0;
  const int vs[] = {2, 32, 64};
  for (int s = 0; s < 10000; ++s) {
    const int v = vs[s % 3];
    Tensor p(1, v);
    double sum = 0;
    for (double& x : p.values()) sum += (x = -std::log(rng.Uniform()));
    for (double& x : p.values()) x /= sum;
    const double d = DiversityLoss(p);
    if (d < -std::log(static_cast<double>(v)) / v || d > 0.0) ++out_of_range;
  }
  for (int v : vs) {
    uniform_err = std::max(uniform_err, std::abs(DiversityLoss(Tensor(1, v, 1.0 / v)) + std::log(static_cast<double>(v)) / v));
    Tensor one(1, v);
    one(0, v - 1) = 1.0;
    onehot_err = std::max(onehot_err, std::abs(DiversityLoss(one)));
  }
  return {out_of_range == 0 && uniform_err <= 1e-9 && onehot_err <= 1e-9,
          "10000 simplex samples, " + std::to_string(out_of_range) + " outside [-(log V)/V, 0]; uniform err " +
              Fmt("%.3g", uniform_err) + ", one-hot err " + Fmt("%.3g", onehot_err)};
}

Outcome FrozenTower(const fs::path& work) {
  bool ok = true;
  std::string detail;
  for (Method m : {Method::kApc, Method::kMpc, Method::kCl}) {
    TrainConfig c = SmallConfig(m, true);
    const fs::path dir = work / ("frozen_" + MethodName(m, true));
    Pretrain(c, SmallCorpus(), dir);
    const nlohmann::json run = ReadJsonFile(dir / "run.json");
    double total = 0;
    for (double g : run["frozen_grad_abs_sum"]) total += g;
    const bool unchanged = run["frozen_tower_unchanged"].get<bool>();
    ok = ok && total == 0.0 && unchanged && run["frozen_grad_abs_sum"].size() == 2;
    detail += MethodName(m, true) + ": sum|grad| " + Fmt("%g", total) + (unchanged ? ", weights unchanged; " : ", weights CHANGED; ");
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome Composition(const fs::path& work) {
  double worst = 0;
  size_t rows = 0;
  for (Method m : {Method::kApc, Method::kMpc, Method::kCl}) {
    const fs::path dir = work / ("frozen_" + MethodName(m, true));
    for (const auto& r : ReadNumericCsv(dir / "components.csv")) {
      worst = std::max(worst, std::abs(r[5] - (r[4] * r[2] + (1 - r[4]) * r[3])));
      ++rows;
    }
  }
  // alpha = 1 against a plain run continuing from the same step-1 checkpoint.
  const fs::path step1 = work / "frozen_mpc+" / "step1" / "ckpt-epoch-1.bin";
  TrainConfig boost = SmallConfig(Method::kMpc, true);
  boost.uwdb_config.alpha = 1.0;
  boost.init_checkpoint = step1.string();
  Pretrain(boost, SmallCorpus(), work / "alpha1_boost");
  TrainConfig plain = SmallConfig(Method::kMpc, false);
  plain.epochs_pretrain = boost.epochs_uwdb;
  plain.init_checkpoint = step1.string();
  Pretrain(plain, SmallCorpus(), work / "alpha1_plain");
  const bool same_log = Slurp(work / "alpha1_boost" / "log.csv") == Slurp(work / "alpha1_plain" / "log.csv");
  const Checkpoint a = LoadCheckpoint(work / "alpha1_boost" / "ckpt-epoch-1.bin");
  const Checkpoint b = LoadCheckpoint(work / "alpha1_plain" / "ckpt-epoch-1.bin");
  int mismatched = 0, compared = 0;
  for (const NamedTensor& t : b.tensors) {
    if (t.name.rfind("norm.", 0) == 0 || t.name.rfind("quant.", 0) == 0) continue;
    const NamedTensor* u = a.Find("lwt1." + t.name);
    ++compared;
    if (!u || !(u->value == t.value)) ++mismatched;
  }
  return {worst <= 1e-12 && rows > 0 && same_log && mismatched == 0 && compared > 0,
          std::to_string(rows) + " logged steps, max |combined - (a*s3rl + (1-a)*utt)| " + Fmt("%.3g", worst) +
              "; alpha=1 log.csv " + (same_log ? "byte-identical" : "DIFFERS") + ", " +
              std::to_string(compared - mismatched) + "/" + std::to_string(compared) +
              " encoder tensors identical"};
}

Outcome MetricOracle() {
  Rng rng(8, 7);
  int det_mismatch = 0, rel_mismatch = 0, rel_compared = 0;
  for (int s = 0; s < 100; ++s) {
    const auto trials = testing::RandomTrials(rng, 1000);
    const auto got = DetPoints(trials);
    const auto want = testing::BruteForceDet(trials);
    bool same = got.size() == want.size();
    for (size_t i = 0; same && i < got.size(); ++i)
      same = got[i].threshold == want[i].threshold && got[i].frr == want[i].frr && got[i].far == want[i].far;
    det_mismatch += !same;
    const auto base = testing::RandomTrials(rng, 1000);
    // Below the top non-target score, so the baseline FAR is positive.
    double top_nontarget = 0.0;
    for (const ScoredTrial& t : base)
      if (!t.is_target) top_nontarget = std::max(top_nontarget, t.score);
    const double th = rng.Uniform() * top_nontarget;
    ++rel_compared;
    rel_mismatch += RelativeFar(trials, base, th).relative_far != testing::BruteForceRelativeFar(trials, base, th);
  }
  return {det_mismatch == 0 && rel_mismatch == 0 && rel_compared == 100,
          "100 random sets (size <= 1000): det_points mismatches " + std::to_string(det_mismatch) +
              ", relative_far mismatches " + std::to_string(rel_mismatch) + " of " + std::to_string(rel_compared)};
}

// Desk-scale learning effect.
struct LearningSetup {
  double noise_level = 10.0;
  double utterance_sec = 0.5;
};

TrainConfig LearningConfig(uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.steps_per_epoch = 25;
  c.epochs_pretrain = 20;
  c.epochs_uwdb = 5;
  c.epochs_finetune = 10;
  c.finetune_steps_per_epoch = 10;
  return c;
}

Outcome LearningEffect(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const LearningSetup setup;
  int apc_wins = 0, boost_wins = 0;
  double sum_scratch = 0, sum_apc = 0, sum_boost = 0;
  std::string per_seed;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    auto corpus = [&](int per_class, uint64_t salt) {
      SynthCorpusSpec spec;
      spec.num_classes = 10;
      spec.utterances_per_class = per_class;
      spec.utterance_sec = setup.utterance_sec;
      spec.noise_level = setup.noise_level;
      spec.seed = seed * 100 + salt;
      return SynthesizeCorpus(spec);
    };
    Corpus unlabeled = corpus(200, 1), labeled = corpus(20, 2), test = corpus(50, 3);
    const fs::path dir = work / ("learning_seed" + std::to_string(seed));

    TrainConfig pre = LearningConfig(seed);
    pre.method = Method::kApc;
    pre.uwdb = true;
    const PretrainResult boosted = Pretrain(pre, unlabeled, dir / "apc+");

    auto finetune_accuracy = [&](const std::string& name, const fs::path& init) {
      TrainConfig ft = LearningConfig(seed);
      ft.method = Method::kScratch;
      ft.init_checkpoint = init.string();
      const FinetuneResult r = Finetune(ft, labeled, dir / ("ft_" + name));
      Classifier c = LoadClassifier(r.final_checkpoint);
      return Accuracy(Predict(c, test), Labels(test));
    };
    const double scratch = finetune_accuracy("scratch", {});
    const double apc = finetune_accuracy("apc", boosted.step1_checkpoint);
    const double boost = finetune_accuracy("apc+", boosted.final_checkpoint);
    apc_wins += apc >= scratch;
    boost_wins += boost >= apc;
    sum_scratch += scratch;
    sum_apc += apc;
    sum_boost += boost;
    per_seed += " seed " + std::to_string(seed) + ": scratch " + Fmt("%.3f", scratch) + " apc " + Fmt("%.3f", apc) +
                " apc+ " + Fmt("%.3f", boost) + ";";
  }
  const double secs = Seconds(t0);
  per_seed.pop_back();
  const bool means_ordered = sum_apc >= sum_scratch && sum_boost >= sum_apc;
  return {apc_wins >= 2 && boost_wins >= 2 && means_ordered && secs < 1800,
          "noise " + Fmt("%g", setup.noise_level) + ", " + Fmt("%g", setup.utterance_sec) + " s utterances;" + per_seed +
              "; means scratch " + Fmt("%.3f", sum_scratch / 3) + " apc " + Fmt("%.3f", sum_apc / 3) + " apc+ " +
              Fmt("%.3f", sum_boost / 3) + "; apc>=scratch in " + std::to_string(apc_wins) + "/3, apc+>=apc in " +
              std::to_string(boost_wins) + "/3; " + Fmt("%.0f", secs) + " s"};
}

Outcome Determinism(const fs::path& work) {
  bool ok = true;
  std::string detail;
  for (Method m : {Method::kApc, Method::kCl}) {
    TrainConfig c = SmallConfig(m, true);
    const std::string name = MethodName(m, true);
    Pretrain(c, SmallCorpus(), work / ("det_a_" + name));
    Pretrain(c, SmallCorpus(), work / ("det_b_" + name));
    for (const char* f : {"step1/log.csv", "log.csv", "components.csv"}) {
      const std::string a = Slurp(work / ("det_a_" + name) / f), b = Slurp(work / ("det_b_" + name) / f);
      const bool same = !a.empty() && a == b;
      ok = ok && same;
      detail += name + "/" + f + (same ? " identical; " : " DIFFERS; ");
    }
  }
  TrainConfig ft = SmallConfig(Method::kScratch, false);
  ft.epochs_finetune = 2;
  ft.finetune_batch_size = 4;
  ft.finetune_steps_per_epoch = 4;
  Finetune(ft, SmallCorpus(), work / "det_ft_a");
  Finetune(ft, SmallCorpus(), work / "det_ft_b");
  const bool same = Slurp(work / "det_ft_a" / "log.csv") == Slurp(work / "det_ft_b" / "log.csv");
  ok = ok && same;
  detail += std::string("finetune/log.csv") + (same ? " identical" : " DIFFERS");
  return {ok, detail};
}

}  // namespace
}  // namespace tssl

int main(int argc, char** argv) {
  using namespace tssl;
  const fs::path work = argc > 1 ? fs::path(argv[1]) : testing::TempDir("acceptance");
  fs::create_directories(work);
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", [] { return GradientCorrectness(); }},
      {2, "parameter budget", [] { return ParameterBudget(); }},
      {3, "causality", [] { return Causality(); }},
      {4, "loss fixed points", [] { return LossFixedPoints(); }},
      {5, "diversity loss bounds", [] { return DiversityBounds(); }},
      {6, "frozen tower", [&] { return FrozenTower(work); }},
      {7, "combined loss composition", [&] { return Composition(work); }},
      {8, "metric oracle", [] { return MetricOracle(); }},
      {9, "desk-scale learning effect", [&] { return LearningEffect(work); }},
      {10, "determinism", [&] { return Determinism(work); }},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " | "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
