// src/features.cc

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

#include "tssl/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <numbers>
#include <thread>

#include "binary_io.h"
#include "parallel.h"
#include "tssl/common.h"
#include "tssl/wav.h"

namespace tssl {

namespace {

double MelScale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

// 64 x 257 triangular weights over FFT bins, built in the mel domain.
class MelBanks {
 public:
  MelBanks() : weights_(kNumMelBins, kFftSize / 2 + 1) {
    const double mel_lo = MelScale(kMelLowHz);
    const double mel_hi = MelScale(kMelHighHz);
    const double delta = (mel_hi - mel_lo) / (kNumMelBins + 1);
    for (int m = 0; m < kNumMelBins; ++m) {
      double left = mel_lo + m * delta, center = left + delta, right = center + delta;
      for (int k = 0; k <= kFftSize / 2; ++k) {
        double mel = MelScale(static_cast<double>(k) * kSampleRate / kFftSize);
        double w = 0.0;
        if (mel > left && mel <= center)
          w = (mel - left) / (center - left);
        else if (mel > center && mel < right)
          w = (right - mel) / (right - center);
        weights_(m, k) = w;
      }
    }
  }
  const Tensor& weights() const { return weights_; }

 private:
  Tensor weights_;
};

const MelBanks& Banks() {
  static const MelBanks banks;
  return banks;
}

const std::vector<double>& HannWindow() {
  static const std::vector<double> window = [] {
    std::vector<double> w(kFrameLength);
    for (int n = 0; n < kFrameLength; ++n)
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / (kFrameLength - 1));
    return w;
  }();
  return window;
}

fftw_plan FftPlan() {
  // Planning is not thread-safe in FFTW; executing a plan on new arrays is.
  static std::once_flag once;
  static fftw_plan plan;
  std::call_once(once, [] {
    std::vector<double> in(kFftSize);
    std::vector<fftw_complex> out(kFftSize / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(kFftSize, in.data(), out.data(),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  });
  return plan;
}

}  // namespace

void SynthCorpusSpec::Validate() const {
  if (num_classes < 2) throw ConfigError("synthetic corpus needs num_classes >= 2");
  if (utterances_per_class < 1) throw ConfigError("utterances_per_class must be >= 1");
  if (!(utterance_sec > 0.0)) throw ConfigError("utterance_sec must be > 0");
  if (!(noise_level >= 0.0)) throw ConfigError("noise_level must be >= 0");
}

int NumFrames(size_t num_samples) {
  if (num_samples < static_cast<size_t>(kFrameLength)) return 0;
  return 1 + static_cast<int>((num_samples - kFrameLength) / kFrameShift);
}

FeatureSequence ComputeLfbe(std::span<const int16_t> pcm, int sample_rate) {
  if (sample_rate != kSampleRate)
    throw ConfigError("expected 16000 Hz audio, got " + std::to_string(sample_rate));
  const int num_frames = NumFrames(pcm.size());
  if (num_frames == 0) throw ConfigError("utterance too short");

  const auto& window = HannWindow();
  const Tensor& banks = Banks().weights();
  fftw_plan plan = FftPlan();
  std::vector<double> frame(kFftSize, 0.0);
  std::vector<fftw_complex> spectrum(kFftSize / 2 + 1);
  std::vector<double> power(kFftSize / 2 + 1);

  FeatureSequence out;
  out.frames = Tensor(num_frames, kNumMelBins);
  for (int t = 0; t < num_frames; ++t) {
    const int16_t* src = pcm.data() + static_cast<size_t>(t) * kFrameShift;
    for (int n = 0; n < kFrameLength; ++n) frame[n] = window[n] * (src[n] / 32768.0);
    std::fill(frame.begin() + kFrameLength, frame.end(), 0.0);
    fftw_execute_dft_r2c(plan, frame.data(), spectrum.data());
    for (int k = 0; k <= kFftSize / 2; ++k)
      power[k] = spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1];
    for (int m = 0; m < kNumMelBins; ++m) {
      auto w = banks.Row(m);
      double e = 0.0;
      for (int k = 0; k <= kFftSize / 2; ++k) e += w[k] * power[k];
      out.frames(t, m) = std::log(std::max(e, kLogFloor));
    }
  }
  return out;
}

int WorkerThreads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TSSL_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) n = n > 0 ? std::min(n, cap) : cap;
  }
  return std::max(1, n);
}

namespace {

std::string ClassDirName(int k, int num_classes) {
  int width = std::max(2, static_cast<int>(std::to_string(num_classes - 1).size()));
  std::string digits = std::to_string(k);
  return "class_" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

Corpus LoadGscLayout(const std::filesystem::path& root, const LoadOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ConfigError("corpus root is not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    std::string name = e.path().filename().string();
    if (!e.is_directory() || name.empty() || name[0] == '_' || name[0] == '.') continue;
    class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ConfigError("no class directories under " + root.string());

  Corpus corpus;
  std::vector<std::pair<fs::path, int>> files;
  for (size_t k = 0; k < class_dirs.size(); ++k) {
    corpus.class_names.push_back(class_dirs[k].filename().string());
    std::vector<fs::path> wavs;
    for (const auto& e : fs::directory_iterator(class_dirs[k]))
      if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
    std::sort(wavs.begin(), wavs.end());
    for (auto& w : wavs) files.emplace_back(std::move(w), static_cast<int>(k));
  }

  std::vector<std::optional<LabeledUtterance>> loaded(files.size());
  ParallelFor(files.size(), [&](size_t i) {
    const auto& [path, label] = files[i];
    try {
      fs::path cache = path;
      cache += ".lfbe";
      LabeledUtterance u;
      if (options.use_feature_cache && fs::exists(cache)) {
        u.features = ReadFeatureCache(cache);
      } else {
        WavData wav = ReadWav(path);
        u.features = ComputeLfbe(wav.samples, wav.sample_rate);
        if (options.use_feature_cache) WriteFeatureCache(cache, u.features);
      }
      u.label = label;
      u.source_id = fs::relative(path, root).generic_string();
      loaded[i] = std::move(u);
    } catch (const Error&) {
      // Counted below.
    }
  });
  for (size_t i = 0; i < loaded.size(); ++i) {
    if (loaded[i]) {
      corpus.utterances.push_back(std::move(*loaded[i]));
    } else {
      ++corpus.skipped;
      std::fprintf(stderr, "warning: skipping unreadable file %s\n", files[i].first.c_str());
    }
  }
  return corpus;
}

std::vector<SynthWaveform> SynthesizeWaveforms(const SynthCorpusSpec& spec) {
  spec.Validate();
  const size_t n = static_cast<size_t>(std::llround(spec.utterance_sec * kSampleRate));
  const double am_rate_hz = 4.0;
  std::vector<SynthWaveform> out(static_cast<size_t>(spec.num_classes) * spec.utterances_per_class);
  for (int k = 0; k < spec.num_classes; ++k) {
    const double f0 = 120.0 + 60.0 * k;
    std::vector<double> clean(n);
    double energy = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / kSampleRate;
      double word = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 0.5) / n);
      double am = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * am_rate_hz * t);
      double v = 0.0;
      for (int h = 1; h * f0 < kMelHighHz; ++h)
        v += std::sin(2.0 * std::numbers::pi * h * f0 * t) / h;
      clean[i] = word * am * v;
      energy += clean[i] * clean[i];
    }
    double peak = 0.0;
    for (double v : clean) peak = std::max(peak, std::fabs(v));
    const double gain = peak > 0.0 ? 0.25 / peak : 0.0;
    const double rms = std::sqrt(energy / static_cast<double>(n)) * gain;
    for (int u = 0; u < spec.utterances_per_class; ++u) {
      const size_t idx = static_cast<size_t>(k) * spec.utterances_per_class + u;
      Rng rng(spec.seed, kStreamCorpus, idx);
      SynthWaveform& w = out[idx];
      w.label = k;
      w.source_id = ClassDirName(k, spec.num_classes) + "/utt_" + std::to_string(u);
      w.pcm.resize(n);
      for (size_t i = 0; i < n; ++i) {
        double v = clean[i] * gain;
        if (spec.noise_level > 0.0) v += spec.noise_level * rms * rng.Normal();
        double s = std::round(v * 32767.0);
        w.pcm[i] = static_cast<int16_t>(std::clamp(s, -32768.0, 32767.0));
      }
    }
  }
  return out;
}

Corpus SynthesizeCorpus(const SynthCorpusSpec& spec) {
  auto waves = SynthesizeWaveforms(spec);
  Corpus corpus;
  for (int k = 0; k < spec.num_classes; ++k)
    corpus.class_names.push_back(ClassDirName(k, spec.num_classes));
  corpus.utterances.resize(waves.size());
  ParallelFor(waves.size(), [&](size_t i) {
    LabeledUtterance& u = corpus.utterances[i];
    u.features = ComputeLfbe(waves[i].pcm);
    u.label = waves[i].label;
    u.source_id = waves[i].source_id;
  });
  return corpus;
}

std::vector<std::filesystem::path> WriteSynthCorpus(const SynthCorpusSpec& spec,
                                                    const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  auto waves = SynthesizeWaveforms(spec);
  std::vector<fs::path> paths;
  for (int k = 0; k < spec.num_classes; ++k)
    fs::create_directories(root / ClassDirName(k, spec.num_classes));
  for (const auto& w : waves) {
    // Zero-pad utterance numbers so path order equals generation order.
    auto slash = w.source_id.find('/');
    std::string num = w.source_id.substr(slash + 5);
    std::string padded = std::string(num.size() < 6 ? 6 - num.size() : 0, '0') + num;
    fs::path p = root / w.source_id.substr(0, slash) / ("utt_" + padded + ".wav");
    WriteWav(p, w.pcm, kSampleRate);
    paths.push_back(p);
  }
  return paths;
}

void WriteFeatureCache(const std::filesystem::path& path, const FeatureSequence& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write("LFBE", 4);
  io::Write<uint32_t>(out, 1);
  io::Write<uint32_t>(out, static_cast<uint32_t>(features.frames.rows()));
  io::Write<uint32_t>(out, static_cast<uint32_t>(features.frames.cols()));
  for (double v : features.frames.values()) io::Write<float>(out, static_cast<float>(v));
  if (!out) throw ConfigError("write failed for " + path.string());
}

FeatureSequence ReadFeatureCache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "LFBE") throw ConfigError("bad feature cache magic in " + path.string());
  const std::string what = "feature cache " + path.string();
  uint32_t version = io::Read<uint32_t>(in, what);
  if (version != 1) throw ConfigError("unsupported feature cache version in " + path.string());
  uint32_t t = io::Read<uint32_t>(in, what);
  uint32_t d = io::Read<uint32_t>(in, what);
  if (d != kNumMelBins || t == 0) throw ConfigError("bad feature cache shape in " + path.string());
  FeatureSequence f;
  f.frames = Tensor(static_cast<int>(t), static_cast<int>(d));
  for (double& v : f.frames.values()) v = io::Read<float>(in, what);
  return f;
}

}  // namespace tssl
