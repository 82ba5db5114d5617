// include/tssl/checkpoint.h

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

#ifndef TSSL_CHECKPOINT_H_
#define TSSL_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tssl/tape.h"

namespace tssl {

struct NamedTensor {
  std::string name;
  Tensor value;
  /// Section that must not be trained when the checkpoint is resumed (the
  /// frozen tower of a boosted run).
  bool read_only = false;
};

/// Checkpoint file:
///   "LWTS", u32 version, u64 config digest, string config json,
///   string meta json, u32 record count, then per record:
///   string name, u32 flags, u32 ndims (2), u32 rows, u32 cols, values.
/// Strings are u32 length + bytes. Flag bit 0 marks a read-only record,
/// bit 1 marks f64 values (otherwise f32). Everything is little-endian.
struct Checkpoint {
  nlohmann::json config;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* Find(const std::string& name) const;
};

enum class StoragePrecision { kF32, kF64 };

inline constexpr uint32_t kCheckpointVersion = 1;

/// Digest64 of the compact JSON dump.
uint64_t ConfigDigest(const nlohmann::json& config);

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                    StoragePrecision precision = StoragePrecision::kF32);
/// Throws ConfigError on a bad magic, unknown version, truncation or a
/// config digest that does not match the stored config.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

/// Appends every parameter of `params` as "<prefix><name>".
void ExportParams(const ParameterSet& params, const std::string& prefix, bool read_only,
                  Checkpoint* ckpt);

/// Copies "<prefix><name>" into each parameter. Parameters for which `skip`
/// returns true are left untouched. Throws ConfigError on a missing record
/// or a shape mismatch.
void ImportParams(const Checkpoint& ckpt, const std::string& prefix, ParameterSet* params,
                  const std::function<bool(const Parameter&)>& skip = {});

}  // namespace tssl

#endif  // TSSL_CHECKPOINT_H_
