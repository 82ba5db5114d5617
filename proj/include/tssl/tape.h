// include/tssl/tape.h

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

#ifndef TSSL_TAPE_H_
#define TSSL_TAPE_H_

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tssl/tensor.h"

namespace tssl {

/// A named trainable (or frozen) tensor together with its gradient buffer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  /// When false the parameter is bound to tapes as a constant and never
  /// receives gradient.
  bool requires_grad = true;

  void ZeroGrad();
};

/// Ordered, name-unique collection of parameters. Enumeration order is the
/// insertion order and is stable for the lifetime of the set.
class ParameterSet {
 public:
  int Add(std::string name, Tensor value);
  Parameter& at(int index) { return params_.at(index); }
  const Parameter& at(int index) const { return params_.at(index); }
  Parameter* Find(const std::string& name);
  const Parameter* Find(const std::string& name) const;
  size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Number of scalar values over all parameters.
  size_t NumValues() const;
  void ZeroGrad();
  void SetRequiresGrad(bool value);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, int> index_;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode gradient tape. Nodes are appended in evaluation order, which
/// is a topological order; Backward visits them once each, in reverse.
/// A Tape is single-threaded.
class Tape {
 public:
  /// Receives the tape and the id of the node being back-propagated. The
  /// node's output gradient is Grad(id).
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);
  /// Binds a parameter. Binding the same parameter twice returns the same
  /// node, so every use accumulates into one gradient.
  Var Param(Parameter& p);
  /// Records an op result. `fn` runs only if some parent requires grad.
  Var Record(Tensor value, std::span<const Var> parents, BackwardFn fn);
  Var Record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
    return Record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(fn));
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every bound parameter,
  /// accumulating into Parameter::grad.
  void Backward(Var loss);

  const Tensor& Value(int id) const { return nodes_[id].value; }
  bool RequiresGrad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor& Grad(int id);
  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> bound_;
  bool backward_done_ = false;
};

}  // namespace tssl

#endif  // TSSL_TAPE_H_
