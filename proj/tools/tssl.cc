// tools/tssl.cc

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

// Command-line front end: corpus synthesis, pretraining (optionally with
// utterance-wise boosting), fine-tuning, evaluation and the gradient-check
// self test. Exit codes: 0 success, 2 config/usage error, 3 numerical
// failure.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tssl/common.h"
#include "tssl/config.h"
#include "tssl/digest.h"
#include "tssl/eval.h"
#include "tssl/features.h"
#include "tssl/selftest.h"
#include "tssl/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInternal = 1;
constexpr double kGradTolerance = 1e-4;

// Digest of every regular file under `root` (feature caches excluded),
// keyed by relative path.
json TreeDigests(const fs::path& root, const std::vector<std::string>& skip = {}) {
  json out = json::object();
  if (!fs::exists(root)) return out;
  if (fs::is_regular_file(root)) {
    out[root.filename().string()] = tssl::FileDigest(root);
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() != ".lfbe") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    const std::string rel = fs::relative(f, root).generic_string();
    if (std::find(skip.begin(), skip.end(), rel) != skip.end()) continue;
    out[rel] = tssl::FileDigest(f);
  }
  return out;
}

std::string CombinedDigest(const json& digests) { return tssl::Sha256Hex(digests.dump()); }

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_path;
  json config;
  json inputs = json::object();
};

void WriteManifest(const fs::path& out_dir, const Manifest& m) {
  json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config_path"] = m.config_path;
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  json outputs = TreeDigests(out_dir, {"manifest.json"});
  j["outputs"] = outputs;
  j["outputs_digest"] = CombinedDigest(outputs);
  tssl::WriteJsonFile(out_dir / "manifest.json", j);
}

json InputDigest(const fs::path& path) {
  const json files = TreeDigests(path);
  return {{"path", fs::absolute(path).string()},
          {"files", files.size()},
          {"digest", CombinedDigest(files)}};
}

tssl::TrainConfig LoadTrainConfig(const std::string& path) {
  return path.empty() ? tssl::TrainConfig{} : tssl::TrainConfig::Load(path);
}

struct TrainOverrides {
  std::optional<uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> epochs_uwdb;
  std::optional<int> steps;
  std::optional<int> batch;
  std::optional<double> lr0;
  std::optional<double> alpha;
  std::string init;
  bool log_wall_time = false;
};

void AddTrainOverrides(CLI::App* cmd, TrainOverrides& o) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--epochs", o.epochs, "Epochs (pretraining or fine-tuning)");
  cmd->add_option("--steps", o.steps, "Steps per epoch");
  cmd->add_option("--batch", o.batch, "Batch size");
  cmd->add_option("--lr0", o.lr0, "Initial learning rate");
  cmd->add_option("--init", o.init, "Initial checkpoint");
  cmd->add_flag("--log-wall-time", o.log_wall_time, "Write real wall_ms values to log.csv");
}

int Synth(const std::string& spec_path, const fs::path& out, const std::vector<std::string>& argv) {
  const tssl::SynthCorpusSpec spec = tssl::SynthSpecFromJson(tssl::ReadJsonFile(spec_path));
  fs::create_directories(out);
  const auto paths = tssl::WriteSynthCorpus(spec, out);
  Manifest m{"synth", argv, spec_path, tssl::SynthSpecToJson(spec), json::object()};
  m.inputs["spec"] = {{"path", fs::absolute(spec_path).string()},
                      {"digest", tssl::FileDigest(spec_path)}};
  WriteManifest(out, m);
  std::cout << "wrote " << paths.size() << " utterances to " << out.string() << "\n";
  return kExitOk;
}

int Pretrain(tssl::TrainConfig config, const std::string& config_path, const std::string& method,
             const std::string& uwdb, const TrainOverrides& o, const fs::path& data,
             bool use_cache, const fs::path& out, const std::vector<std::string>& argv) {
  if (!method.empty()) {
    bool plus = false;
    config.method = tssl::ParseMethod(method, &plus);
    if (plus) config.uwdb = true;
  }
  if (uwdb == "on") config.uwdb = true;
  else if (uwdb == "off") config.uwdb = false;
  if (o.seed) config.seed = *o.seed;
  if (o.epochs) config.epochs_pretrain = *o.epochs;
  if (o.epochs_uwdb) config.epochs_uwdb = *o.epochs_uwdb;
  if (o.steps) config.steps_per_epoch = *o.steps;
  if (o.batch) config.batch_size = *o.batch;
  if (o.lr0) config.lr0 = *o.lr0;
  if (o.alpha) config.uwdb_config.alpha = *o.alpha;
  if (!o.init.empty()) config.init_checkpoint = o.init;
  if (o.log_wall_time) config.log_wall_time = true;
  config.Validate();
  const tssl::Corpus corpus = tssl::LoadGscLayout(data, {use_cache});
  if (corpus.utterances.empty()) throw tssl::ConfigError("no utterances under " + data.string());
  fs::create_directories(out);
  const tssl::PretrainResult r = tssl::Pretrain(config, corpus, out, &std::cerr);
  Manifest m{"pretrain", argv, config_path, config.ToJson(), json::object()};
  m.inputs["data"] = InputDigest(data);
  if (!r.step1_checkpoint.empty())
    m.inputs["step1_checkpoint"] = {{"path", fs::absolute(r.step1_checkpoint).string()},
                                    {"digest", r.step1_sha256}};
  WriteManifest(out, m);
  std::cout << r.final_checkpoint.string() << "\n";
  return kExitOk;
}

int Finetune(tssl::TrainConfig config, const std::string& config_path, const TrainOverrides& o,
             const std::string& freeze, std::optional<double> holdout, bool scratch,
             const fs::path& data, bool use_cache, const fs::path& out,
             const std::vector<std::string>& argv) {
  config.method = tssl::Method::kScratch;
  config.uwdb = false;
  if (o.seed) config.seed = *o.seed;
  if (o.epochs) config.epochs_finetune = *o.epochs;
  if (o.steps) config.finetune_steps_per_epoch = *o.steps;
  if (o.batch) config.finetune_batch_size = *o.batch;
  if (o.lr0) config.lr0 = *o.lr0;
  if (!o.init.empty()) config.init_checkpoint = o.init;
  if (scratch) config.init_checkpoint.clear();
  if (o.log_wall_time) config.log_wall_time = true;
  if (freeze == "encoder") config.freeze_mode = tssl::FreezeMode::kEncoderFrozen;
  else if (freeze == "none") config.freeze_mode = tssl::FreezeMode::kNone;
  if (holdout) config.holdout_fraction = *holdout;
  if (config.freeze_mode == tssl::FreezeMode::kEncoderFrozen && config.init_checkpoint.empty())
    throw tssl::ConfigError("--freeze encoder needs a pretrained checkpoint (--init)");
  config.Validate();
  const tssl::Corpus corpus = tssl::LoadGscLayout(data, {use_cache});
  if (corpus.utterances.empty()) throw tssl::ConfigError("no utterances under " + data.string());
  fs::create_directories(out);
  const tssl::FinetuneResult r = tssl::Finetune(config, corpus, out, &std::cerr);
  Manifest m{"finetune", argv, config_path, config.ToJson(), json::object()};
  m.inputs["data"] = InputDigest(data);
  if (!config.init_checkpoint.empty())
    m.inputs["init_checkpoint"] = {{"path", fs::absolute(config.init_checkpoint).string()},
                                   {"digest", tssl::FileDigest(config.init_checkpoint)}};
  WriteManifest(out, m);
  json report = {{"checkpoint", r.final_checkpoint.string()},
                 {"train_accuracy", r.train_accuracy}};
  if (r.holdout_accuracy >= 0) report["holdout_accuracy"] = r.holdout_accuracy;
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string mode;
  std::string checkpoint;
  std::string data;
  std::string baseline;
  std::string candidate;
  double threshold = 0.5;
  int keyword = 0;
  std::string trials_out;
  std::string out;
  bool use_cache = false;
};

int Eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  json report;
  Manifest m{"eval", argv, "", json::object(), json::object()};
  m.config = {{"mode", a.mode}, {"threshold", a.threshold}, {"keyword", a.keyword}};
  if (a.mode == "accuracy" || a.mode == "trials") {
    if (a.checkpoint.empty() || a.data.empty())
      throw tssl::ConfigError("--mode " + a.mode + " needs --checkpoint and --data");
    tssl::Classifier c = tssl::LoadClassifier(a.checkpoint);
    const tssl::Corpus corpus = tssl::LoadGscLayout(a.data, {a.use_cache});
    if (corpus.utterances.empty()) throw tssl::ConfigError("no utterances under " + a.data);
    if (corpus.num_classes() != c.model->config().num_classes)
      throw tssl::ConfigError("corpus has " + std::to_string(corpus.num_classes()) +
                              " classes, classifier has " +
                              std::to_string(c.model->config().num_classes));
    m.inputs["checkpoint"] = {{"path", fs::absolute(a.checkpoint).string()},
                              {"digest", tssl::FileDigest(a.checkpoint)}};
    m.inputs["data"] = InputDigest(a.data);
    if (a.mode == "accuracy") {
      const std::vector<int> pred = tssl::Predict(c, corpus);
      report["accuracy"] = tssl::Accuracy(pred, tssl::Labels(corpus));
      report["utterances"] = corpus.utterances.size();
    } else {
      if (a.trials_out.empty()) throw tssl::ConfigError("--mode trials needs --trials-out");
      const auto trials = tssl::ScoreTrials(c, corpus, a.keyword);
      fs::path dest = a.out.empty() ? fs::path(a.trials_out) : fs::path(a.out) / a.trials_out;
      if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
      tssl::WriteTrialsCsv(dest, trials);
      report["trials"] = trials.size();
      report["path"] = dest.string();
    }
  } else if (a.mode == "relfar") {
    if (a.baseline.empty() || a.candidate.empty())
      throw tssl::ConfigError("--mode relfar needs --baseline and --candidate");
    const auto base = tssl::ReadTrialsCsv(a.baseline);
    const auto cand = tssl::ReadTrialsCsv(a.candidate);
    report = tssl::RelativeFarReport(tssl::RelativeFar(cand, base, a.threshold));
    m.inputs["baseline"] = {{"path", fs::absolute(a.baseline).string()},
                            {"digest", tssl::FileDigest(a.baseline)}};
    m.inputs["candidate"] = {{"path", fs::absolute(a.candidate).string()},
                             {"digest", tssl::FileDigest(a.candidate)}};
  } else {
    throw tssl::ConfigError("unknown eval mode '" + a.mode + "' (accuracy, relfar, trials)");
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    tssl::WriteJsonFile(fs::path(a.out) / "report.json", report);
    WriteManifest(a.out, m);
  }
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

int GradCheckCmd(int samples, bool all, double step, const std::string& out,
                 const std::vector<std::string>& argv) {
  tssl::GradCheckOptions opt;
  opt.samples = samples;
  opt.all_coordinates = all;
  opt.step = step;
  const auto checks = tssl::RunLossGradChecks(opt);
  json report = json::array();
  bool ok = true;
  for (const auto& c : checks) {
    const bool pass = c.result.max_rel_error < kGradTolerance;
    ok = ok && pass;
    std::cout << (pass ? "ok   " : "FAIL ") << c.name << " max_rel_err=" << c.result.max_rel_error
              << " coords=" << c.result.coordinates << " worst=" << c.result.worst_param << "["
              << c.result.worst_index << "] " << c.seconds << "s\n";
    report.push_back({{"loss", c.name},
                      {"max_rel_error", c.result.max_rel_error},
                      {"coordinates", c.result.coordinates},
                      {"values_checked", c.values_checked},
                      {"worst_param", c.result.worst_param},
                      {"worst_index", c.result.worst_index},
                      {"analytic", c.result.worst_analytic},
                      {"numeric", c.result.worst_numeric},
                      {"pass", pass}});
  }
  if (!out.empty()) {
    fs::create_directories(out);
    tssl::WriteJsonFile(fs::path(out) / "gradcheck.json", report);
    Manifest m{"gradcheck", argv, "", tssl::ToyConfig().ToJson(), json::object()};
    m.config["samples"] = samples;
    m.config["all_coordinates"] = all;
    m.config["step"] = step;
    WriteManifest(out, m);
  }
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"tssl: self-supervised pretraining for small keyword-spotting transformers"};
  app.require_subcommand(1);

  std::string spec_path, out, config_path, data, method, uwdb = "", freeze = "";
  bool use_cache = false, scratch = false, all_coords = false;
  std::optional<double> holdout;
  TrainOverrides pre_o, ft_o;
  int samples = 200;
  double step = 1e-6;
  EvalArgs eval_args;

  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic keyword corpus");
  synth->add_option("--spec", spec_path, "Corpus spec JSON")->required();
  synth->add_option("--out", out, "Output directory")->required();

  CLI::App* pre = app.add_subcommand("pretrain", "Self-supervised pretraining");
  pre->add_option("--method", method, "apc, mpc or cl (a trailing + enables boosting)");
  pre->add_option("--uwdb", uwdb, "Utterance-wise boosting")->check(CLI::IsMember({"on", "off"}));
  pre->add_option("--config", config_path, "Train config JSON");
  pre->add_option("--data", data, "Corpus root (class directories of WAV files)")->required();
  pre->add_option("--out", out, "Run directory")->required();
  pre->add_option("--epochs-uwdb", pre_o.epochs_uwdb, "Epochs of the boosting step");
  pre->add_option("--alpha", pre_o.alpha, "Weight of the pretext loss in the combined loss");
  pre->add_flag("--feature-cache", use_cache, "Read/write <wav>.lfbe feature caches");
  AddTrainOverrides(pre, pre_o);

  CLI::App* ft = app.add_subcommand("finetune", "Train the keyword classifier");
  ft->add_option("--config", config_path, "Train config JSON");
  ft->add_option("--data", data, "Labeled corpus root")->required();
  ft->add_option("--out", out, "Run directory")->required();
  ft->add_option("--freeze", freeze, "encoder: train only the classifier head")
      ->check(CLI::IsMember({"encoder", "none"}));
  ft->add_option("--holdout", holdout, "Fraction of the corpus held out and scored");
  ft->add_flag("--scratch", scratch, "Ignore any init checkpoint in the config");
  ft->add_flag("--feature-cache", use_cache, "Read/write <wav>.lfbe feature caches");
  AddTrainOverrides(ft, ft_o);

  CLI::App* ev = app.add_subcommand("eval", "Accuracy, detection trials or relative FAR");
  ev->add_option("--mode", eval_args.mode, "accuracy, trials or relfar")->required();
  ev->add_option("--checkpoint", eval_args.checkpoint, "Classifier checkpoint");
  ev->add_option("--data", eval_args.data, "Labeled corpus root");
  ev->add_option("--baseline", eval_args.baseline, "Baseline trials CSV");
  ev->add_option("--candidate", eval_args.candidate, "Candidate trials CSV");
  ev->add_option("--threshold", eval_args.threshold, "Baseline operating threshold");
  ev->add_option("--keyword", eval_args.keyword, "Keyword class index for trials");
  ev->add_option("--trials-out", eval_args.trials_out, "Trials CSV to write (relative to --out)");
  ev->add_option("--out", eval_args.out, "Directory for report.json and the manifest");
  ev->add_flag("--feature-cache", eval_args.use_cache, "Read/write <wav>.lfbe feature caches");

  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of every loss");
  gc->add_option("--samples", samples, "Coordinates sampled per loss");
  gc->add_flag("--all", all_coords, "Check every coordinate");
  gc->add_option("--step", step, "Central-difference step in [1e-6, 1e-4]");
  gc->add_option("--out", out, "Directory for gradcheck.json and the manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) return Synth(spec_path, out, args);
    if (*pre)
      return Pretrain(LoadTrainConfig(config_path), config_path, method, uwdb, pre_o, data,
                      use_cache, out, args);
    if (*ft)
      return Finetune(LoadTrainConfig(config_path), config_path, ft_o, freeze, holdout, scratch,
                      data, use_cache, out, args);
    if (*ev) return Eval(eval_args, args);
    if (*gc) return GradCheckCmd(samples, all_coords, step, out, args);
  } catch (const tssl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tssl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}
