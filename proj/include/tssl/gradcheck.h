// include/tssl/gradcheck.h

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

#ifndef TSSL_GRADCHECK_H_
#define TSSL_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "tssl/tape.h"

namespace tssl {

struct GradCheckOptions {
  /// Central-difference step; must lie in [1e-6, 1e-4].
  double step = 1e-6;
  /// Coordinates to sample. Every parameter gets at least one coordinate
  /// when samples >= number of parameters.
  int samples = 200;
  uint64_t seed = 0;
  bool all_coordinates = false;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int coordinates = 0;
};

/// Builds the scalar loss on a fresh tape from the parameters' current values.
using LossBuilder = std::function<Var(Tape&)>;

/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double RelativeError(double analytic, double numeric);

/// Compares reverse-mode gradients against central differences. The builder
/// must be deterministic; parameters are restored before returning.
GradCheckResult GradCheck(const LossBuilder& loss, std::span<Parameter* const> params,
                          const GradCheckOptions& options = {});

}  // namespace tssl

#endif  // TSSL_GRADCHECK_H_
