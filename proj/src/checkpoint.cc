// src/checkpoint.cc

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

#include "tssl/checkpoint.h"

#include <fstream>

#include "binary_io.h"
#include "tssl/common.h"
#include "tssl/digest.h"

namespace tssl {

namespace {

constexpr char kMagic[4] = {'L', 'W', 'T', 'S'};
constexpr uint32_t kFlagReadOnly = 1u;
constexpr uint32_t kFlagF64 = 2u;

}  // namespace

const NamedTensor* Checkpoint::Find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

uint64_t ConfigDigest(const nlohmann::json& config) { return Digest64(config.dump()); }

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                    StoragePrecision precision) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  io::Write<uint32_t>(out, kCheckpointVersion);
  const std::string config = ckpt.config.dump();
  io::Write<uint64_t>(out, Digest64(config));
  io::WriteString(out, config);
  io::WriteString(out, ckpt.meta.dump());
  io::Write<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
  const bool f64 = precision == StoragePrecision::kF64;
  for (const NamedTensor& t : ckpt.tensors) {
    io::WriteString(out, t.name);
    uint32_t flags = (t.read_only ? kFlagReadOnly : 0u) | (f64 ? kFlagF64 : 0u);
    io::Write<uint32_t>(out, flags);
    io::Write<uint32_t>(out, 2);
    io::Write<uint32_t>(out, static_cast<uint32_t>(t.value.rows()));
    io::Write<uint32_t>(out, static_cast<uint32_t>(t.value.cols()));
    for (double v : t.value.values()) {
      if (f64)
        io::Write<double>(out, v);
      else
        io::Write<float>(out, static_cast<float>(v));
    }
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  const std::string what = "checkpoint " + path.string();
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4))
    throw ConfigError("not a checkpoint (bad magic): " + path.string());
  const uint32_t version = io::Read<uint32_t>(in, what);
  if (version != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  const uint64_t digest = io::Read<uint64_t>(in, what);
  const std::string config = io::ReadString(in, what);
  if (Digest64(config) != digest)
    throw ConfigError("checkpoint config digest mismatch in " + path.string());
  Checkpoint ckpt;
  try {
    ckpt.config = nlohmann::json::parse(config);
    ckpt.meta = nlohmann::json::parse(io::ReadString(in, what));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint metadata: " + std::string(e.what()));
  }
  const uint32_t count = io::Read<uint32_t>(in, what);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = io::ReadString(in, what);
    const uint32_t flags = io::Read<uint32_t>(in, what);
    const uint32_t ndims = io::Read<uint32_t>(in, what);
    if (ndims != 2) throw ConfigError("unsupported tensor rank in " + t.name);
    const uint32_t rows = io::Read<uint32_t>(in, what);
    const uint32_t cols = io::Read<uint32_t>(in, what);
    if (static_cast<uint64_t>(rows) * cols > (1ull << 28))
      throw ConfigError("implausible tensor size for " + t.name);
    t.read_only = (flags & kFlagReadOnly) != 0;
    t.value = Tensor(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : t.value.values()) {
      if (flags & kFlagF64)
        v = io::Read<double>(in, what);
      else
        v = io::Read<float>(in, what);
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void ExportParams(const ParameterSet& params, const std::string& prefix, bool read_only,
                  Checkpoint* ckpt) {
  for (const Parameter& p : params) ckpt->tensors.push_back({prefix + p.name, p.value, read_only});
}

void ImportParams(const Checkpoint& ckpt, const std::string& prefix, ParameterSet* params,
                  const std::function<bool(const Parameter&)>& skip) {
  for (Parameter& p : *params) {
    if (skip && skip(p)) continue;
    const NamedTensor* t = ckpt.Find(prefix + p.name);
    if (!t) throw ConfigError("checkpoint lacks parameter " + prefix + p.name);
    if (!t->value.SameShape(p.value))
      throw ConfigError("shape mismatch for " + prefix + p.name + ": checkpoint " +
                        t->value.ShapeString() + ", model " + p.value.ShapeString());
    p.value = t->value;
  }
}

}  // namespace tssl
