// src/tensor.cc

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

#include "tssl/tensor.h"

#include <algorithm>
#include <cmath>

#include "tssl/common.h"

namespace tssl {

Tensor::Tensor(int rows, int cols, double fill)
    : rows_(rows), cols_(cols),
      values_(static_cast<size_t>(rows) * static_cast<size_t>(cols), fill) {
  if (rows < 0 || cols < 0) throw Error("negative tensor dimension");
}

Tensor::Tensor(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols))
    throw Error("tensor value count does not match shape");
}

Tensor Tensor::FromRows(std::initializer_list<std::initializer_list<double>> rows) {
  int r = static_cast<int>(rows.size());
  int c = r ? static_cast<int>(rows.begin()->size()) : 0;
  std::vector<double> v;
  v.reserve(static_cast<size_t>(r) * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw Error("ragged tensor rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(v));
}

void Tensor::Fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::Add(const Tensor& other) {
  if (!SameShape(other))
    throw Error("shape mismatch in Add: " + ShapeString() + " vs " + other.ShapeString());
  for (size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
}

std::string Tensor::ShapeString() const {
  return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (!a.SameShape(b)) return false;
  auto av = a.values();
  auto bv = b.values();
  return std::equal(av.begin(), av.end(), bv.begin());
}

}  // namespace tssl
