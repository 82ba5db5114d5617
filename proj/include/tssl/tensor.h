// include/tssl/tensor.h

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

#ifndef TSSL_TENSOR_H_
#define TSSL_TENSOR_H_

#include <Eigen/Dense>

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tssl {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Dense row-major matrix of doubles. Vectors are 1 x n; scalars are 1 x 1.
/// Higher-rank data (conv feature maps) is stored flattened into the columns.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, double fill = 0.0);
  Tensor(int rows, int cols, std::vector<double> values);
  static Tensor Scalar(double v) { return Tensor(1, 1, v); }
  static Tensor FromRows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::vector<int> shape() const { return {rows_, cols_}; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> Row(int r) {
    return {values_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }
  std::span<const double> Row(int r) const {
    return {values_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }

  double& operator()(int r, int c) { return values_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const {
    return values_[static_cast<size_t>(r) * cols_ + c];
  }
  double& operator[](size_t i) { return values_[i]; }
  double operator[](size_t i) const { return values_[i]; }

  MatrixMap Mat() { return MatrixMap(values_.data(), rows_, cols_); }
  ConstMatrixMap Mat() const { return ConstMatrixMap(values_.data(), rows_, cols_); }

  void Fill(double v);
  void SetZero() { Fill(0.0); }
  bool AllFinite() const;
  bool SameShape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  /// Elementwise this += other.
  void Add(const Tensor& other);

  std::string ShapeString() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

bool operator==(const Tensor& a, const Tensor& b);

}  // namespace tssl

#endif  // TSSL_TENSOR_H_
