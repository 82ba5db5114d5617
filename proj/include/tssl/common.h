// include/tssl/common.h

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

#ifndef TSSL_COMMON_H_
#define TSSL_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace tssl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, malformed input file or bad usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite, or a numerical check failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Seeded random stream. Independent purposes (masking, Gumbel noise, batch
/// order, ...) draw from distinct streams so that enabling one feature never
/// shifts the random numbers seen by another.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream, uint64_t index = 0);

  /// Uniform in the open interval (0, 1).
  double Uniform();
  double Normal();
  uint64_t Bits() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Stream identifiers used across the library.
enum RngStream : uint64_t {
  kStreamInit = 1,
  kStreamMask = 2,
  kStreamGumbel = 3,
  kStreamBatch = 4,
  kStreamUttGumbel = 5,
  kStreamCorpus = 6,
  kStreamGradCheck = 7,
  kStreamSplit = 8,
};

}  // namespace tssl

#endif  // TSSL_COMMON_H_
