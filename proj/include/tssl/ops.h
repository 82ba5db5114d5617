// include/tssl/ops.h

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

#ifndef TSSL_OPS_H_
#define TSSL_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "tssl/tape.h"

namespace tssl {

/// Differentiable primitives. Every op records its result on the tape of its
/// first argument and back-propagates into any parent that requires grad.
namespace ops {

Var MatMul(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
/// Elementwise product.
Var Mul(Var a, Var b);
Var Scale(Var a, double s);
/// a[m x n] + row[1 x n] broadcast over rows.
Var AddRowVector(Var a, Var row);
/// a + c where c carries no gradient.
Var AddConstant(Var a, const Tensor& c);
/// x * w + b, with b a row vector.
Var Linear(Var x, Var w, Var b);

/// |a| elementwise; the subgradient at 0 is 0.
Var Abs(Var a);
/// Sum of all entries, as a 1 x 1 scalar.
Var Sum(Var a);
/// Row r multiplied by weights[r]; weights carry no gradient.
Var WeightRows(Var a, std::span<const double> weights);
Var SliceRows(Var a, int start, int count);
Var ConcatRows(std::span<const Var> parts);
/// Column means: [m x n] -> [1 x n].
Var MeanRows(Var a);

/// Exact (erf) GELU.
Var Gelu(Var a);
/// Per-row layer normalization with affine row-vector parameters.
Var LayerNorm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var SoftmaxRows(Var a);
/// Per-row negative log-likelihood of `targets` under softmax(logits):
/// [m x n] -> [m x 1].
Var CrossEntropyRows(Var logits, std::span<const int> targets);
/// Sum of p log p over all entries with 0 log 0 := 0. Rejects p < 0.
Var NegEntropy(Var p);

/// 3x3 convolution over a (time x freq x channel) map stored as
/// [T x (F * in_ch)], zero padding 1 on both axes. Weight is
/// [(9 * in_ch) x out_ch], bias [1 x out_ch]. Output is
/// [T' x (F' * out_ch)] with T' = (T - 1) / stride_t + 1 and likewise F'.
Var Conv2d3x3(Var x, int freq, int in_ch, Var weight, Var bias, int stride_t,
              int stride_f);

/// Scaled dot-product attention over a packed [T x 3d] QKV matrix split into
/// n_heads heads; returns [T x d]. With `causal`, position i attends only to
/// j <= i and future positions never enter any sum.
Var MultiHeadAttention(Var qkv, int n_heads, bool causal);

/// Rows with mask[r] != 0 are replaced by `row` [1 x n].
Var ReplaceRows(Var x, std::span<const uint8_t> mask, Var row);

/// Cosine similarity of every row of a [m x d] with every row of b [n x d].
/// Zero-norm rows give similarity 0 (and zero gradient).
Var CosineMatrix(Var a, Var b);
/// Row-wise cosine similarity of a [m x d] and b [m x d] -> [m x 1].
Var RowCosine(Var a, Var b);
/// Copy of a [m x n] with entry (i, cols[i]) taken from vals [m x 1].
Var ReplaceAt(Var a, std::span<const int> cols, Var vals);

/// Forward value `hard`; backward passes the gradient straight to `soft`.
Var StraightThrough(Var soft, const Tensor& hard);
/// Same value, no gradient flow.
Var Detach(Var a);

}  // namespace ops

/// Cosine similarity of two vectors; 0 when either has zero norm.
double CosineSim(std::span<const double> a, std::span<const double> b);

/// Number of zero-norm cosine evaluations seen so far (process-wide).
uint64_t DegenerateSimilarityCount();

}  // namespace tssl

#endif  // TSSL_OPS_H_
