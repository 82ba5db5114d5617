// tests/cli_test.cc

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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "test_util.h"
#include "tssl/config.h"

namespace tssl {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Result RunCli(const std::string& args, const fs::path& scratch) {
  const std::string cli = TSSL_CLI;
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = cli + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = Slurp(out);
  r.err = Slurp(err);
  return r;
}

// Shared corpus and config for the pipeline tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::TempDir("cli"));
    WriteJsonFile(*root_ / "spec.json", {{"num_classes", 3},
                                         {"utterances_per_class", 4},
                                         {"utterance_sec", 0.3},
                                         {"seed", 2},
                                         {"noise_level", 0.5}});
    nlohmann::json cfg = {
        {"model",
         {{"d_model", 16}, {"n_heads", 2}, {"ffn_dim", 32}, {"n_blocks", 2}, {"frontend_channels", {2, 4, 4}}}},
        {"codebook", {{"num_entries", 8}, {"input_dim", 16}, {"entry_dim", 16}}},
        {"uwdb", {{"codebook_size", 4}}},
        {"apc_shift", 2},
        {"batch_size", 4},
        {"steps_per_epoch", 2},
        {"epochs_pretrain", 1},
        {"epochs_uwdb", 1},
        {"epochs_finetune", 2},
        {"finetune_batch_size", 4},
        {"finetune_steps_per_epoch", 2},
        {"seed", 3}};
    WriteJsonFile(*root_ / "cfg.json", cfg);
  }
  static void TearDownTestSuite() { delete root_; }

  static fs::path Root() { return *root_; }
  static std::string P(const std::string& rel) { return (*root_ / rel).string(); }

  static fs::path* root_;
};

fs::path* CliTest::root_ = nullptr;

TEST_F(CliTest, SynthIsDeterministicAndWritesManifest) {
  Result r = RunCli("synth --spec " + P("spec.json") + " --out " + P("corpus"), Root());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(Root() / "corpus" / "class_02" / "utt_000003.wav"));
  const nlohmann::json m1 = ReadJsonFile(Root() / "corpus" / "manifest.json");
  EXPECT_EQ(m1["command"], "synth");
  ASSERT_EQ(RunCli("synth --spec " + P("spec.json") + " --out " + P("corpus2"), Root()).code, 0);
  const nlohmann::json m2 = ReadJsonFile(Root() / "corpus2" / "manifest.json");
  EXPECT_EQ(m1["outputs"], m2["outputs"]);
  EXPECT_FALSE(m1["outputs"].empty());
}

TEST_F(CliTest, MissingSpecNamesThePath) {
  Result r = RunCli("synth --spec " + P("nope.json") + " --out " + P("x"), Root());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(RunCli("", Root()).code, 2);
  EXPECT_EQ(RunCli("pretrain --method bert --data " + P("corpus") + " --out " + P("bad"), Root()).code, 2);
  EXPECT_EQ(RunCli("pretrain --method apc --uwdb maybe --data " + P("corpus") + " --out " + P("bad"), Root()).code, 2);
  EXPECT_EQ(RunCli("eval --mode relfar --out " + P("bad"), Root()).code, 2);
  EXPECT_EQ(RunCli("finetune --freeze encoder --data " + P("corpus") + " --out " + P("bad"), Root()).code, 2);
}

TEST_F(CliTest, PretrainFinetuneEvalPipeline) {
  if (!fs::exists(Root() / "corpus" / "manifest.json"))
    ASSERT_EQ(RunCli("synth --spec " + P("spec.json") + " --out " + P("corpus"), Root()).code, 0);

  Result pre = RunCli("pretrain --method apc --uwdb on --config " + P("cfg.json") + " --data " + P("corpus") +
                       " --out " + P("apcp"),
                   Root());
  ASSERT_EQ(pre.code, 0) << pre.err;
  EXPECT_TRUE(fs::exists(Root() / "apcp" / "step1" / "log.csv"));
  EXPECT_TRUE(fs::exists(Root() / "apcp" / "components.csv"));
  const nlohmann::json man = ReadJsonFile(Root() / "apcp" / "manifest.json");
  EXPECT_EQ(man["config"]["method"], "apc+");
  EXPECT_TRUE(man["inputs"].contains("step1_checkpoint"));

  Result ft = RunCli("finetune --config " + P("cfg.json") + " --data " + P("corpus") + " --out " + P("ft") +
                      " --freeze encoder --init " + P("apcp/ckpt-epoch-0.bin"),
                  Root());
  ASSERT_EQ(ft.code, 0) << ft.err;
  const nlohmann::json run = ReadJsonFile(Root() / "ft" / "run.json");
  EXPECT_EQ(run["freeze_mode"], "encoder_frozen");
  EXPECT_TRUE(run["frozen_parameters_unchanged"].get<bool>());

  Result acc = RunCli("eval --mode accuracy --checkpoint " + P("ft/ckpt-epoch-1.bin") + " --data " + P("corpus") +
                       " --out " + P("ev"),
                   Root());
  ASSERT_EQ(acc.code, 0) << acc.err;
  const nlohmann::json rep = ReadJsonFile(Root() / "ev" / "report.json");
  EXPECT_GE(rep["accuracy"].get<double>(), 0.0);
  EXPECT_EQ(rep["utterances"], 12);

  Result tr = RunCli("eval --mode trials --keyword 1 --checkpoint " + P("ft/ckpt-epoch-1.bin") + " --data " +
                      P("corpus") + " --out " + P("ev") + " --trials-out cand.csv",
                  Root());
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_TRUE(fs::exists(Root() / "ev" / "cand.csv"));

  Result rf = RunCli("eval --mode relfar --threshold 0.3 --baseline " + P("ev/cand.csv") + " --candidate " +
                      P("ev/cand.csv") + " --out " + P("rf"),
                  Root());
  if (rf.code == 0) {
    const nlohmann::json j = ReadJsonFile(Root() / "rf" / "report.json");
    EXPECT_EQ(j["relative_far"], 1.0);
    for (const char* k : {"frr", "far", "threshold", "relative_far"}) EXPECT_TRUE(j.contains(k)) << k;
  } else {
    EXPECT_EQ(rf.code, 2);
    EXPECT_NE(rf.err.find("degenerate baseline"), std::string::npos) << rf.err;
  }
}

TEST_F(CliTest, RelfarOnHandWrittenTrials) {
  std::ofstream(Root() / "b.csv") << "score,is_target\n0.9,1\n0.7,1\n0.3,1\n0.6,0\n0.55,0\n0.2,0\n";
  std::ofstream(Root() / "c.csv") << "score,is_target\n0.9,1\n0.7,1\n0.3,1\n0.6,0\n0.25,0\n0.2,0\n";
  Result r = RunCli("eval --mode relfar --baseline " + P("b.csv") + " --candidate " + P("c.csv"), Root());
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["relative_far"], 0.5);
  std::ofstream(Root() / "d.csv") << "score,is_target\n0.9,1\n0.1,0\n";
  Result d = RunCli("eval --mode relfar --baseline " + P("d.csv") + " --candidate " + P("c.csv"), Root());
  EXPECT_EQ(d.code, 2);
}

TEST_F(CliTest, DivergentTrainingExitsThree) {
  if (!fs::exists(Root() / "corpus" / "manifest.json"))
    ASSERT_EQ(RunCli("synth --spec " + P("spec.json") + " --out " + P("corpus"), Root()).code, 0);
  Result r = RunCli("pretrain --method mpc --config " + P("cfg.json") + " --data " + P("corpus") + " --out " +
                     P("nan") + " --lr0 1e300 --steps 6",
                 Root());
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_TRUE(fs::exists(Root() / "nan" / "nonfinite_batch.json"));
}

TEST_F(CliTest, SampledGradcheckPasses) {
  Result r = RunCli("gradcheck --samples 10 --out " + P("gc"), Root());
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const nlohmann::json j = ReadJsonFile(Root() / "gc" / "gradcheck.json");
  EXPECT_EQ(j.size(), 10u);
  for (const auto& c : j) EXPECT_TRUE(c["pass"].get<bool>()) << c.dump();
}

}  // namespace
}  // namespace tssl
