// src/wav.cc

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

#include "tssl/wav.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "tssl/common.h"

namespace tssl {

namespace {

uint32_t Le32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t Le16(const unsigned char* p) { return uint16_t(p[0] | p[1] << 8); }

void Put32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void Put16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

WavData ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw ConfigError("not a RIFF/WAVE file" + where);
  WavData wav;
  bool have_fmt = false, have_data = false;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    uint32_t size = Le32(hdr + 4);
    size_t body = pos + 8;
    if (body + size > buf.size()) throw ConfigError("truncated chunk" + where);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw ConfigError("short fmt chunk" + where);
      const unsigned char* f = buf.data() + body;
      uint16_t format = Le16(f);
      wav.channels = Le16(f + 2);
      wav.sample_rate = static_cast<int>(Le32(f + 4));
      uint16_t bits = Le16(f + 14);
      if (format != 1 || bits != 16) throw ConfigError("only 16-bit PCM is supported" + where);
      if (wav.channels != 1) throw ConfigError("only mono audio is supported" + where);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw ConfigError("data chunk before fmt chunk" + where);
      wav.samples.resize(size / 2);
      for (size_t i = 0; i < wav.samples.size(); ++i)
        wav.samples[i] = static_cast<int16_t>(Le16(buf.data() + body + 2 * i));
      have_data = true;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || !have_data) throw ConfigError("missing fmt or data chunk" + where);
  return wav;
}

void WriteWav(const std::filesystem::path& path, std::span<const int16_t> samples,
              int sample_rate) {
  std::string s;
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  s += "RIFF";
  Put32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  Put32(s, 16);
  Put16(s, 1);
  Put16(s, 1);
  Put32(s, static_cast<uint32_t>(sample_rate));
  Put32(s, static_cast<uint32_t>(sample_rate * 2));
  Put16(s, 2);
  Put16(s, 16);
  s += "data";
  Put32(s, data_bytes);
  for (int16_t v : samples) Put16(s, static_cast<uint16_t>(v));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace tssl
