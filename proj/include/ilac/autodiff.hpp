#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ilac/tensor.hpp"

namespace ilac {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Receives gradient contributions for an operation's inputs during backward.
class GradSink {
 public:
  // Accumulation buffer for the node, or nullptr if it does not need a gradient.
  double* operator()(std::size_t node_id);

 private:
  friend class Tape;
  GradSink(const Tape& tape, std::vector<std::vector<double>>& grads) : tape_(tape), grads_(grads) {}
  const Tape& tape_;
  std::vector<std::vector<double>>& grads_;
};

class Gradients {
 public:
  // Gradient for a recorded value; zeros if the value did not participate.
  Tensor of(Var v) const;
  bool has(Var v) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::vector<double>> grads_;
};

// Define-by-run record of primitive operations. Nodes are appended in
// evaluation order, so every node's inputs precede it and backward is a
// single reverse sweep. A tape belongs to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out, GradSink& sink)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf node; participates in gradients iff value.requires_grad().
  Var leaf(const Tensor& value);
  Var constant(const Tensor& value) { return leaf(value.with_requires_grad(false)); }

  // Used by primitive operations. The node requires a gradient iff any input does.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Throws ContractError for non-scalar
  // losses or values recorded on a different tape.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;  // stable addresses: value() references survive later records
};

// ---- primitive operations -------------------------------------------------
// Shapes must match exactly; the only broadcast is a rank-0 scalar against a
// tensor. Violations throw DimensionError naming the shapes involved.

Var matmul(Var a, Var b);                   // [m x k] * [k x n]
Var linear(Var x, Var weight);              // x [m x in] * weight[out x in]^T
Var linear(Var x, Var weight, Var bias);    // ... + bias[out] on every row
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var gather_rows(Var x, std::vector<std::size_t> rows);  // x[rows[k], :]
Var reshape(Var x, Shape shape);

Var tanh(Var x);
Var sigmoid(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);

Var sum(Var x);
Var mean(Var x);

// Numerically stable softmax of a vector (max-subtracted). Throws DomainError on empty input.
Var softmax(Var scores);

// -log softmax(logits)[target] via log-sum-exp; logits is a vector.
Var cross_entropy(Var logits, std::size_t target);
// Mean of row-wise cross entropies; logits is [m x n], targets has m entries.
Var cross_entropy_mean(Var logits, std::span<const std::size_t> targets);

// Plain (tape-free) helpers shared with the evaluation code.
std::vector<double> softmax_values(std::span<const double> scores);
double log_sum_exp(std::span<const double> values);

// ---- finite-difference verification ----------------------------------------

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double autodiff = 0.0;
  double numeric = 0.0;
  bool passed = true;
};

struct FiniteDiffReport {
  std::vector<ParamCheck> params;
  double step = 0.0;
  double tolerance = 0.0;

  bool passed() const;
  double max_rel_error() const;
};

// Builds a scalar loss on the given tape from leaf handles for `params`
// (in the same order). Must be deterministic.
using Objective = std::function<Var(Tape& tape, std::span<const Var> params)>;

// Central difference stencils: (f(x+h) - f(x-h)) / 2h, or the fourth-order
// (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h which tolerates larger steps.
enum class FdStencil { kThreePoint, kFivePoint };

// Compares reverse-mode gradients of `objective` against central differences
// with step h. Per-entry error is |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8);
// a parameter passes iff its worst entry is <= tol. Throws ContractError if two
// evaluations at the same point disagree.
FiniteDiffReport finite_diff_check(const Objective& objective, std::span<const NamedTensor> params,
                                   double h = 1e-5, double tol = 1e-4, FdStencil stencil = FdStencil::kThreePoint);

}  // namespace ilac
