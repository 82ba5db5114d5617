// include/tssl/wav.h

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

#ifndef TSSL_WAV_H_
#define TSSL_WAV_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tssl {

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<int16_t> samples;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM mono audio. Throws ConfigError
/// on anything else.
WavData ReadWav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono.
void WriteWav(const std::filesystem::path& path, std::span<const int16_t> samples,
              int sample_rate);

}  // namespace tssl

#endif  // TSSL_WAV_H_
