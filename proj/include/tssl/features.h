// include/tssl/features.h

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

#ifndef TSSL_FEATURES_H_
#define TSSL_FEATURES_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tssl/tensor.h"

namespace tssl {

// Log filterbank frontend constants. Inputs are 16 kHz PCM; frames are 25 ms
// long with a 10 ms shift, Hann windowed, zero-padded to a 512-point FFT and
// pooled by 64 triangular mel filters spanning 20-7600 Hz.
inline constexpr int kSampleRate = 16000;
inline constexpr int kFrameLength = 400;
inline constexpr int kFrameShift = 160;
inline constexpr int kFftSize = 512;
inline constexpr int kNumMelBins = 64;
inline constexpr double kMelLowHz = 20.0;
inline constexpr double kMelHighHz = 7600.0;
inline constexpr double kLogFloor = 1e-10;

/// T x 64 log filterbank energies of one utterance.
struct FeatureSequence {
  Tensor frames;
  int frame_shift_ms = 10;
  int frame_len_ms = 25;
  int sample_rate_hz = kSampleRate;

  int num_frames() const { return frames.rows(); }
};

struct LabeledUtterance {
  FeatureSequence features;
  int label = 0;
  std::string source_id;
};

struct Corpus {
  std::vector<LabeledUtterance> utterances;
  /// class_names[k] is the name of class index k.
  std::vector<std::string> class_names;
  /// Files that could not be decoded and were skipped.
  int skipped = 0;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

struct SynthCorpusSpec {
  int num_classes = 10;
  int utterances_per_class = 200;
  double utterance_sec = 1.0;
  uint64_t seed = 0;
  double noise_level = 0.5;

  /// Throws ConfigError unless num_classes >= 2, utterance_sec > 0 and
  /// noise_level >= 0.
  void Validate() const;
};

/// Frames produced for `num_samples` samples: 1 + (N - 400) / 160, or 0 when
/// N < 400.
int NumFrames(size_t num_samples);

/// 64-D LFBE features. Throws ConfigError("utterance too short") when fewer
/// than 400 samples are given and on any rate other than 16 kHz.
FeatureSequence ComputeLfbe(std::span<const int16_t> pcm, int sample_rate = kSampleRate);

struct LoadOptions {
  /// Read `<file>.lfbe` when present; otherwise compute and write it.
  bool use_feature_cache = false;
};

/// Loads `<root>/<class_name>/*.wav`. Class indices follow lexicographic
/// directory order; utterances are ordered by path. Directories starting
/// with '_' or '.' (e.g. _background_noise_) are not classes. Undecodable
/// files are skipped and counted.
Corpus LoadGscLayout(const std::filesystem::path& root, const LoadOptions& options = {});

struct SynthWaveform {
  std::vector<int16_t> pcm;
  int label = 0;
  std::string source_id;
};

/// Deterministic harmonic keyword stand-ins: class k has fundamental
/// 120 + 60k Hz under an amplitude-modulated envelope, plus seeded Gaussian
/// noise scaled by noise_level.
std::vector<SynthWaveform> SynthesizeWaveforms(const SynthCorpusSpec& spec);

/// SynthesizeWaveforms followed by ComputeLfbe.
Corpus SynthesizeCorpus(const SynthCorpusSpec& spec);

/// Writes the synthetic corpus as WAV files in the GSC directory layout and
/// returns the written paths in corpus order.
std::vector<std::filesystem::path> WriteSynthCorpus(const SynthCorpusSpec& spec,
                                                    const std::filesystem::path& root);

/// Feature cache: "LFBE", u32 version, u32 T, u32 D, then T*D little-endian
/// f32 values in row-major order.
void WriteFeatureCache(const std::filesystem::path& path, const FeatureSequence& features);
FeatureSequence ReadFeatureCache(const std::filesystem::path& path);

/// Worker thread cap from TSSL_THREADS (default: hardware concurrency).
int WorkerThreads();

}  // namespace tssl

#endif  // TSSL_FEATURES_H_
