// src/tape.cc

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

#include "tssl/tape.h"

#include "tssl/common.h"

namespace tssl {

void Parameter::ZeroGrad() {
  if (!grad.SameShape(value))
    grad = Tensor(value.rows(), value.cols());
  else
    grad.SetZero();
}

int ParameterSet::Add(std::string name, Tensor value) {
  if (index_.count(name)) throw Error("duplicate parameter name " + name);
  int id = static_cast<int>(params_.size());
  index_[name] = id;
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(value.rows(), value.cols());
  p.value = std::move(value);
  params_.push_back(std::move(p));
  return id;
}

Parameter* ParameterSet::Find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterSet::Find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

size_t ParameterSet::NumValues() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto& p : params_) p.ZeroGrad();
}

void ParameterSet::SetRequiresGrad(bool value) {
  for (auto& p : params_) p.requires_grad = value;
}

const Tensor& Var::value() const { return tape_->Value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw Error("scalar() on non-scalar " + v.ShapeString());
  return v[0];
}

Var Tape::Constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Param(Parameter& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return Var(this, it->second);
  if (!p.grad.SameShape(p.value)) p.ZeroGrad();
  Node n;
  n.value = p.value;
  n.requires_grad = p.requires_grad;
  n.param = p.requires_grad ? &p : nullptr;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  bound_[&p] = id;
  return Var(this, id);
}

Var Tape::Record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : parents) {
    if (v.tape() != this) throw Error("op mixes vars from different tapes");
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::Grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::Backward(Var loss) {
  if (loss.tape() != this) throw Error("loss belongs to another tape");
  if (loss.value().size() != 1)
    throw Error("backward requires a scalar loss, got " + loss.value().ShapeString());
  if (backward_done_) throw Error("backward called twice on one tape");
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  Grad(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      n.param->grad.Add(n.grad);
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

}  // namespace tssl
