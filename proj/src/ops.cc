// src/ops.cc

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

#include "tssl/ops.h"

#include <atomic>
#include <cmath>
#include <memory>
#include <numbers>

#include "tssl/common.h"

namespace tssl {

namespace {

std::atomic<uint64_t> g_degenerate_similarity{0};

bool NeedsGrad(Tape& t, Var v) { return t.RequiresGrad(v.id()); }
Tensor& GradOf(Tape& t, Var v) { return t.Grad(v.id()); }

void CheckSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.SameShape(b))
    throw Error(std::string(op) + ": shape mismatch " + a.ShapeString() + " vs " +
                b.ShapeString());
}

double Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double CosineSim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("CosineSim: length mismatch");
  double na = Norm(a), nb = Norm(b);
  if (na == 0.0 || nb == 0.0) {
    ++g_degenerate_similarity;
    return 0.0;
  }
  return Dot(a, b) / (na * nb);
}

uint64_t DegenerateSimilarityCount() { return g_degenerate_similarity.load(); }

namespace ops {

Var MatMul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows())
    throw Error("MatMul: " + av.ShapeString() + " x " + bv.ShapeString());
  Tensor out(av.rows(), bv.cols());
  out.Mat().noalias() = av.Mat() * bv.Mat();
  return a.tape()->Record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    if (NeedsGrad(t, a)) GradOf(t, a).Mat().noalias() += g.Mat() * b.value().Mat().transpose();
    if (NeedsGrad(t, b)) GradOf(t, b).Mat().noalias() += a.value().Mat().transpose() * g.Mat();
  });
}

Var Add(Var a, Var b) {
  CheckSameShape(a.value(), b.value(), "Add");
  Tensor out = a.value();
  out.Add(b.value());
  return a.tape()->Record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    if (NeedsGrad(t, a)) GradOf(t, a).Add(g);
    if (NeedsGrad(t, b)) GradOf(t, b).Add(g);
  });
}

Var Sub(Var a, Var b) {
  CheckSameShape(a.value(), b.value(), "Sub");
  Tensor out = a.value();
  out.Mat() -= b.value().Mat();
  return a.tape()->Record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    if (NeedsGrad(t, a)) GradOf(t, a).Add(g);
    if (NeedsGrad(t, b)) GradOf(t, b).Mat() -= g.Mat();
  });
}

Var Mul(Var a, Var b) {
  CheckSameShape(a.value(), b.value(), "Mul");
  Tensor out = a.value();
  out.Mat().array() *= b.value().Mat().array();
  return a.tape()->Record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    if (NeedsGrad(t, a))
      GradOf(t, a).Mat().array() += g.Mat().array() * b.value().Mat().array();
    if (NeedsGrad(t, b))
      GradOf(t, b).Mat().array() += g.Mat().array() * a.value().Mat().array();
  });
}

Var Scale(Var a, double s) {
  Tensor out = a.value();
  out.Mat() *= s;
  return a.tape()->Record(std::move(out), {a}, [a, s](Tape& t, int self) {
    GradOf(t, a).Mat() += s * t.Grad(self).Mat();
  });
}

Var AddRowVector(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols())
    throw Error("AddRowVector: " + av.ShapeString() + " + " + rv.ShapeString());
  Tensor out = av;
  out.Mat().rowwise() += rv.Mat().row(0);
  return a.tape()->Record(std::move(out), {a, row}, [a, row](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    if (NeedsGrad(t, a)) GradOf(t, a).Add(g);
    if (NeedsGrad(t, row)) GradOf(t, row).Mat() += g.Mat().colwise().sum();
  });
}

Var AddConstant(Var a, const Tensor& c) {
  CheckSameShape(a.value(), c, "AddConstant");
  Tensor out = a.value();
  out.Add(c);
  return a.tape()->Record(std::move(out), {a}, [a](Tape& t, int self) {
    GradOf(t, a).Add(t.Grad(self));
  });
}

Var Linear(Var x, Var w, Var b) { return AddRowVector(MatMul(x, w), b); }

Var Abs(Var a) {
  Tensor out = a.value();
  out.Mat() = out.Mat().cwiseAbs();
  return a.tape()->Record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    const Tensor& x = a.value();
    Tensor& ga = GradOf(t, a);
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0)
        ga[i] += g[i];
      else if (x[i] < 0.0)
        ga[i] -= g[i];
    }
  });
}

Var Sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape()->Record(Tensor::Scalar(s), {a}, [a](Tape& t, int self) {
    double g = t.Grad(self)[0];
    for (double& v : GradOf(t, a).values()) v += g;
  });
}

Var WeightRows(Var a, std::span<const double> weights) {
  const Tensor& av = a.value();
  if (static_cast<int>(weights.size()) != av.rows())
    throw Error("WeightRows: weight count does not match rows");
  std::vector<double> w(weights.begin(), weights.end());
  Tensor out = av;
  for (int r = 0; r < out.rows(); ++r)
    for (double& v : out.Row(r)) v *= w[r];
  return a.tape()->Record(std::move(out), {a}, [a, w](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    Tensor& ga = GradOf(t, a);
    for (int r = 0; r < g.rows(); ++r) {
      auto gr = g.Row(r);
      auto dr = ga.Row(r);
      for (size_t c = 0; c < gr.size(); ++c) dr[c] += w[r] * gr[c];
    }
  });
}

Var SliceRows(Var a, int start, int count) {
  const Tensor& av = a.value();
  if (start < 0 || count < 0 || start + count > av.rows())
    throw Error("SliceRows out of range on " + av.ShapeString());
  Tensor out(count, av.cols());
  std::copy_n(av.data() + static_cast<size_t>(start) * av.cols(), out.size(), out.data());
  return a.tape()->Record(std::move(out), {a}, [a, start](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    Tensor& ga = GradOf(t, a);
    double* dst = ga.data() + static_cast<size_t>(start) * ga.cols();
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw Error("ConcatRows of nothing");
  Tape* tape = parts[0].tape();
  int cols = parts[0].cols();
  int rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw Error("ConcatRows: column mismatch");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + off);
    off += p.value().size();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return tape->Record(std::move(out), parts, [saved](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    size_t off = 0;
    for (const Var& p : saved) {
      size_t n = p.value().size();
      if (NeedsGrad(t, p)) {
        Tensor& gp = GradOf(t, p);
        for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var MeanRows(Var a) {
  const Tensor& av = a.value();
  if (av.rows() == 0) throw Error("MeanRows of empty tensor");
  Tensor out(1, av.cols());
  out.Mat() = av.Mat().colwise().sum() / static_cast<double>(av.rows());
  return a.tape()->Record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    Tensor& ga = GradOf(t, a);
    double inv = 1.0 / ga.rows();
    ga.Mat().rowwise() += inv * g.Mat().row(0);
  });
}

Var Gelu(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  return a.tape()->Record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    const Tensor& x = a.value();
    Tensor& ga = GradOf(t, a);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (size_t i = 0; i < x.size(); ++i) {
      double cdf = 0.5 * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
      double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
      ga[i] += g[i] * (cdf + x[i] * pdf);
    }
  });
}

Var LayerNorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  int n = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
    throw Error("LayerNorm: parameter shape mismatch");
  auto xhat = std::make_shared<Tensor>(xv.rows(), n);
  auto inv_std = std::make_shared<std::vector<double>>(xv.rows());
  Tensor out(xv.rows(), n);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (int r = 0; r < xv.rows(); ++r) {
    auto row = xv.Row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= n;
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int c = 0; c < n; ++c) {
      double h = (row[c] - mean) * is;
      (*xhat)(r, c) = h;
      out(r, c) = gv[c] * h + bv[c];
    }
  }
  return x.tape()->Record(
      std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std](Tape& t, int self) {
        const Tensor& g = t.Grad(self);
        const Tensor& gv = gamma.value();
        int rows = g.rows(), n = g.cols();
        if (NeedsGrad(t, gamma)) {
          Tensor& gg = GradOf(t, gamma);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < n; ++c) gg[c] += g(r, c) * (*xhat)(r, c);
        }
        if (NeedsGrad(t, beta)) {
          Tensor& gb = GradOf(t, beta);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < n; ++c) gb[c] += g(r, c);
        }
        if (NeedsGrad(t, x)) {
          Tensor& gx = GradOf(t, x);
          std::vector<double> dh(n);
          for (int r = 0; r < rows; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (int c = 0; c < n; ++c) {
              dh[c] = g(r, c) * gv[c];
              mean_dh += dh[c];
              mean_dh_h += dh[c] * (*xhat)(r, c);
            }
            mean_dh /= n;
            mean_dh_h /= n;
            for (int c = 0; c < n; ++c)
              gx(r, c) += (*inv_std)[r] * (dh[c] - mean_dh - (*xhat)(r, c) * mean_dh_h);
          }
        }
      });
}

Var SoftmaxRows(Var a) {
  Tensor out = a.value();
  for (int r = 0; r < out.rows(); ++r) {
    auto row = out.Row(r);
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : row) v /= s;
  }
  auto probs = std::make_shared<Tensor>(out);
  return a.tape()->Record(std::move(out), {a}, [a, probs](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    Tensor& ga = GradOf(t, a);
    for (int r = 0; r < g.rows(); ++r) {
      auto p = probs->Row(r);
      auto gr = g.Row(r);
      double dot = Dot(p, gr);
      auto dr = ga.Row(r);
      for (size_t c = 0; c < p.size(); ++c) dr[c] += p[c] * (gr[c] - dot);
    }
  });
}

Var CrossEntropyRows(Var logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  if (static_cast<int>(targets.size()) != lv.rows())
    throw Error("CrossEntropyRows: target count does not match rows");
  auto probs = std::make_shared<Tensor>(lv.rows(), lv.cols());
  Tensor out(lv.rows(), 1);
  std::vector<int> tgt(targets.begin(), targets.end());
  for (int r = 0; r < lv.rows(); ++r) {
    if (tgt[r] < 0 || tgt[r] >= lv.cols()) throw Error("CrossEntropyRows: bad target");
    auto row = lv.Row(r);
    const int top = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    const double m = row[top];
    double rest = 0.0;
    for (int c = 0; c < lv.cols(); ++c)
      if (c != top) rest += std::exp(row[c] - m);
    const double log_norm = std::log1p(rest);
    out(r, 0) = (m - row[tgt[r]]) + log_norm;
    for (int c = 0; c < lv.cols(); ++c) (*probs)(r, c) = std::exp((row[c] - m) - log_norm);
  }
  return logits.tape()->Record(std::move(out), {logits}, [logits, probs, tgt](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    Tensor& gl = GradOf(t, logits);
    for (int r = 0; r < g.rows(); ++r) {
      double gr = g(r, 0);
      for (int c = 0; c < gl.cols(); ++c) gl(r, c) += gr * (*probs)(r, c);
      gl(r, tgt[r]) -= gr;
    }
  });
}

Var NegEntropy(Var p) {
  double s = 0.0;
  for (double v : p.value().values()) {
    if (v < 0.0) throw Error("NegEntropy: negative probability");
    if (v > 0.0) s += v * std::log(v);
  }
  return p.tape()->Record(Tensor::Scalar(s), {p}, [p](Tape& t, int self) {
    double g = t.Grad(self)[0];
    const Tensor& pv = p.value();
    Tensor& gp = GradOf(t, p);
    for (size_t i = 0; i < pv.size(); ++i)
      if (pv[i] > 0.0) gp[i] += g * (std::log(pv[i]) + 1.0);
  });
}

Var Conv2d3x3(Var x, int freq, int in_ch, Var weight, Var bias, int stride_t, int stride_f) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.cols() != freq * in_ch) throw Error("Conv2d3x3: input width != freq * in_ch");
  if (wv.rows() != 9 * in_ch) throw Error("Conv2d3x3: weight rows != 9 * in_ch");
  const int out_ch = wv.cols();
  if (bias.rows() != 1 || bias.cols() != out_ch) throw Error("Conv2d3x3: bias shape");
  const int t_in = xv.rows();
  const int t_out = (t_in - 1) / stride_t + 1;
  const int f_out = (freq - 1) / stride_f + 1;
  const int k = 9 * in_ch;
  auto patches = std::make_shared<Tensor>(t_out * f_out, k);
  for (int to = 0; to < t_out; ++to) {
    for (int fo = 0; fo < f_out; ++fo) {
      double* prow = patches->data() + static_cast<size_t>(to * f_out + fo) * k;
      for (int kt = 0; kt < 3; ++kt) {
        int ti = to * stride_t + kt - 1;
        for (int kf = 0; kf < 3; ++kf) {
          int fi = fo * stride_f + kf - 1;
          double* dst = prow + (kt * 3 + kf) * in_ch;
          if (ti < 0 || ti >= t_in || fi < 0 || fi >= freq) continue;
          const double* src = xv.data() + static_cast<size_t>(ti) * xv.cols() + fi * in_ch;
          std::copy_n(src, in_ch, dst);
        }
      }
    }
  }
  Tensor out(t_out, f_out * out_ch);
  {
    MatrixMap o(out.data(), t_out * f_out, out_ch);
    o.noalias() = patches->Mat() * wv.Mat();
    o.rowwise() += bias.value().Mat().row(0);
  }
  return x.tape()->Record(
      std::move(out), {x, weight, bias},
      [x, weight, bias, patches, freq, in_ch, stride_t, stride_f, t_out, f_out, out_ch, k](
          Tape& t, int self) {
        const Tensor& g = t.Grad(self);
        ConstMatrixMap go(g.data(), t_out * f_out, out_ch);
        if (NeedsGrad(t, weight)) GradOf(t, weight).Mat().noalias() += patches->Mat().transpose() * go;
        if (NeedsGrad(t, bias)) GradOf(t, bias).Mat() += go.colwise().sum();
        if (NeedsGrad(t, x)) {
          RowMatrix dp = go * weight.value().Mat().transpose();
          Tensor& gx = GradOf(t, x);
          const int t_in = gx.rows();
          for (int to = 0; to < t_out; ++to) {
            for (int fo = 0; fo < f_out; ++fo) {
              const double* prow = dp.data() + static_cast<size_t>(to * f_out + fo) * k;
              for (int kt = 0; kt < 3; ++kt) {
                int ti = to * stride_t + kt - 1;
                if (ti < 0 || ti >= t_in) continue;
                for (int kf = 0; kf < 3; ++kf) {
                  int fi = fo * stride_f + kf - 1;
                  if (fi < 0 || fi >= freq) continue;
                  const double* src = prow + (kt * 3 + kf) * in_ch;
                  double* dst = gx.data() + static_cast<size_t>(ti) * gx.cols() + fi * in_ch;
                  for (int c = 0; c < in_ch; ++c) dst[c] += src[c];
                }
              }
            }
          }
        }
      });
}

Var MultiHeadAttention(Var qkv, int n_heads, bool causal) {
  const Tensor& in = qkv.value();
  if (in.cols() % 3 != 0) throw Error("MultiHeadAttention: width not divisible by 3");
  const int d = in.cols() / 3;
  if (n_heads <= 0 || d % n_heads != 0)
    throw Error("MultiHeadAttention: d_model not divisible by head count");
  const int dh = d / n_heads;
  const int T = in.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  // probs[h] is T x T; entries outside the causal window stay 0.
  auto probs = std::make_shared<std::vector<Tensor>>(n_heads, Tensor(T, T));
  Tensor out(T, d);
  std::vector<double> s(T);
  for (int h = 0; h < n_heads; ++h) {
    Tensor& p = (*probs)[h];
    const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
    for (int i = 0; i < T; ++i) {
      const int jmax = causal ? i : T - 1;
      const double* qi = in.data() + static_cast<size_t>(i) * 3 * d + qo;
      double m = -INFINITY;
      for (int j = 0; j <= jmax; ++j) {
        const double* kj = in.data() + static_cast<size_t>(j) * 3 * d + ko;
        double acc = 0.0;
        for (int c = 0; c < dh; ++c) acc += qi[c] * kj[c];
        s[j] = acc * scale;
        m = std::max(m, s[j]);
      }
      double z = 0.0;
      for (int j = 0; j <= jmax; ++j) {
        s[j] = std::exp(s[j] - m);
        z += s[j];
      }
      double* oi = out.data() + static_cast<size_t>(i) * d + h * dh;
      for (int j = 0; j <= jmax; ++j) {
        double pij = s[j] / z;
        p(i, j) = pij;
        const double* vj = in.data() + static_cast<size_t>(j) * 3 * d + vo;
        for (int c = 0; c < dh; ++c) oi[c] += pij * vj[c];
      }
    }
  }
  return qkv.tape()->Record(
      std::move(out), {qkv}, [qkv, probs, n_heads, causal, d, dh, T, scale](Tape& t, int self) {
        const Tensor& g = t.Grad(self);
        const Tensor& in = qkv.value();
        Tensor& gin = GradOf(t, qkv);
        std::vector<double> dp(T);
        for (int h = 0; h < n_heads; ++h) {
          const Tensor& p = (*probs)[h];
          const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
          for (int i = 0; i < T; ++i) {
            const int jmax = causal ? i : T - 1;
            const double* gi = g.data() + static_cast<size_t>(i) * d + h * dh;
            double dot = 0.0;
            for (int j = 0; j <= jmax; ++j) {
              const double* vj = in.data() + static_cast<size_t>(j) * 3 * d + vo;
              double acc = 0.0;
              for (int c = 0; c < dh; ++c) acc += gi[c] * vj[c];
              dp[j] = acc;
              dot += p(i, j) * acc;
              double* gvj = gin.data() + static_cast<size_t>(j) * 3 * d + vo;
              for (int c = 0; c < dh; ++c) gvj[c] += p(i, j) * gi[c];
            }
            const double* qi = in.data() + static_cast<size_t>(i) * 3 * d + qo;
            double* gqi = gin.data() + static_cast<size_t>(i) * 3 * d + qo;
            for (int j = 0; j <= jmax; ++j) {
              double ds = p(i, j) * (dp[j] - dot) * scale;
              if (ds == 0.0) continue;
              const double* kj = in.data() + static_cast<size_t>(j) * 3 * d + ko;
              double* gkj = gin.data() + static_cast<size_t>(j) * 3 * d + ko;
              for (int c = 0; c < dh; ++c) {
                gqi[c] += ds * kj[c];
                gkj[c] += ds * qi[c];
              }
            }
          }
        }
      });
}

Var ReplaceRows(Var x, std::span<const uint8_t> mask, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  if (static_cast<int>(mask.size()) != xv.rows())
    throw Error("ReplaceRows: mask length does not match rows");
  if (rv.rows() != 1 || rv.cols() != xv.cols()) throw Error("ReplaceRows: row shape");
  std::vector<uint8_t> m(mask.begin(), mask.end());
  Tensor out = xv;
  for (int r = 0; r < out.rows(); ++r)
    if (m[r]) std::copy_n(rv.data(), rv.cols(), out.Row(r).data());
  return x.tape()->Record(std::move(out), {x, row}, [x, row, m](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    bool gx = NeedsGrad(t, x), gr = NeedsGrad(t, row);
    for (int r = 0; r < g.rows(); ++r) {
      auto src = g.Row(r);
      if (m[r]) {
        if (gr) {
          auto dst = GradOf(t, row).Row(0);
          for (size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
      } else if (gx) {
        auto dst = GradOf(t, x).Row(r);
        for (size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  });
}

Var CosineMatrix(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) throw Error("CosineMatrix: dimension mismatch");
  const int m = av.rows(), n = bv.rows();
  auto na = std::make_shared<std::vector<double>>(m);
  auto nb = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < m; ++i) (*na)[i] = Norm(av.Row(i));
  for (int j = 0; j < n; ++j) (*nb)[j] = Norm(bv.Row(j));
  Tensor out(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      if ((*na)[i] == 0.0 || (*nb)[j] == 0.0) {
        ++g_degenerate_similarity;
        continue;
      }
      out(i, j) = Dot(av.Row(i), bv.Row(j)) / ((*na)[i] * (*nb)[j]);
    }
  auto cos = std::make_shared<Tensor>(out);
  return a.tape()->Record(std::move(out), {a, b}, [a, b, na, nb, cos](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const int d = av.cols();
    bool ga = NeedsGrad(t, a), gb = NeedsGrad(t, b);
    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) {
        double ni = (*na)[i], nj = (*nb)[j];
        if (ni == 0.0 || nj == 0.0 || g(i, j) == 0.0) continue;
        double gij = g(i, j), c = (*cos)(i, j);
        auto ai = av.Row(i);
        auto bj = bv.Row(j);
        if (ga) {
          auto dst = GradOf(t, a).Row(i);
          for (int k = 0; k < d; ++k) dst[k] += gij * (bj[k] / (ni * nj) - c * ai[k] / (ni * ni));
        }
        if (gb) {
          auto dst = GradOf(t, b).Row(j);
          for (int k = 0; k < d; ++k) dst[k] += gij * (ai[k] / (ni * nj) - c * bj[k] / (nj * nj));
        }
      }
    }
  });
}

Var RowCosine(Var a, Var b) {
  CheckSameShape(a.value(), b.value(), "RowCosine");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const int m = av.rows();
  Tensor out(m, 1);
  for (int i = 0; i < m; ++i) out(i, 0) = CosineSim(av.Row(i), bv.Row(i));
  auto cos = std::make_shared<Tensor>(out);
  return a.tape()->Record(std::move(out), {a, b}, [a, b, cos](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    bool ga = NeedsGrad(t, a), gb = NeedsGrad(t, b);
    for (int i = 0; i < av.rows(); ++i) {
      auto ai = av.Row(i);
      auto bi = bv.Row(i);
      double na = Norm(ai), nb = Norm(bi);
      if (na == 0.0 || nb == 0.0) continue;
      double gi = g(i, 0), c = (*cos)(i, 0);
      if (ga) {
        auto dst = GradOf(t, a).Row(i);
        for (size_t k = 0; k < ai.size(); ++k) dst[k] += gi * (bi[k] / (na * nb) - c * ai[k] / (na * na));
      }
      if (gb) {
        auto dst = GradOf(t, b).Row(i);
        for (size_t k = 0; k < ai.size(); ++k) dst[k] += gi * (ai[k] / (na * nb) - c * bi[k] / (nb * nb));
      }
    }
  });
}

Var ReplaceAt(Var a, std::span<const int> cols, Var vals) {
  const Tensor& av = a.value();
  const Tensor& vv = vals.value();
  if (static_cast<int>(cols.size()) != av.rows() || vv.rows() != av.rows() || vv.cols() != 1)
    throw Error("ReplaceAt: shape mismatch");
  std::vector<int> idx(cols.begin(), cols.end());
  Tensor out = av;
  for (int i = 0; i < av.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= av.cols()) throw Error("ReplaceAt: column out of range");
    out(i, idx[i]) = vv(i, 0);
  }
  return a.tape()->Record(std::move(out), {a, vals}, [a, vals, idx](Tape& t, int self) {
    const Tensor& g = t.Grad(self);
    if (NeedsGrad(t, a)) {
      Tensor& ga = GradOf(t, a);
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j)
          if (j != idx[i]) ga(i, j) += g(i, j);
    }
    if (NeedsGrad(t, vals)) {
      Tensor& gv = GradOf(t, vals);
      for (int i = 0; i < g.rows(); ++i) gv(i, 0) += g(i, idx[i]);
    }
  });
}

Var StraightThrough(Var soft, const Tensor& hard) {
  CheckSameShape(soft.value(), hard, "StraightThrough");
  return soft.tape()->Record(Tensor(hard), {soft}, [soft](Tape& t, int self) {
    GradOf(t, soft).Add(t.Grad(self));
  });
}

Var Detach(Var a) { return a.tape()->Constant(a.value()); }

}  // namespace ops
}  // namespace tssl
