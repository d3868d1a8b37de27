#pragma once

// Minimal reverse-mode automatic differentiation over f64 vectors.
//
// Every value produced during a forward pass lives on a Tape as a node with a
// local adjoint. Tape::backward seeds the loss with 1 and walks the nodes in
// reverse creation order, accumulating into node gradients and, for
// parameter-reading ops, directly into Parameter::grad.
//
// A node that depends on a differentiable input but carries no adjoint is an
// error at backward time, never a silent zero.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tkgx/parameters.hpp"
#include "tkgx/segment_ops.hpp"

namespace tkgx::ad {

class Tape;

// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  std::size_t size() const;
  std::span<const double> value() const;
  double scalar() const;
  double operator[](std::size_t i) const { return value()[i]; }
  std::int64_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* t, std::int64_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::int64_t id_ = -1;
};

class Tape {
 public:
  // Adjoint callback: receives the gradient flowing into the node's output.
  using Backward = std::function<void(Tape&, std::span<const double>)>;

  // record_grad = false runs a plain forward pass: no adjoints are stored and
  // backward() is rejected.
  explicit Tape(bool record_grad = true) : record_(record_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t num_nodes() const { return nodes_.size(); }

  Var constant(std::vector<double> v);
  Var scalar_constant(double v) { return constant({v}); }

  Var param_row(Parameter& p, std::size_t row);
  Var param_vector(Parameter& p);  // whole tensor flattened
  Var matvec(Parameter& w, Var x);
  Var affine(Parameter& w, Parameter& b, Var x);  // w x + b

  Var add(Var a, Var b);
  Var axpby(double a, Var x, double b, Var y);  // a x + b y
  Var scale(Var x, double c);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  Var log(Var x);
  Var clamp(Var x, double lo, double hi);
  Var leaky_relu(Var x, double slope);
  Var dot(Var a, Var b);
  Var sum(Var x);
  Var mean(Var x);
  Var concat(std::span<const Var> parts);
  Var gather(Var x, std::span<const std::size_t> index);
  Var element(Var x, std::size_t i);
  // sum_i weights[i] * xs[i]; all xs share one length.
  Var weighted_sum(Var weights, std::span<const Var> xs);

  // sqrt(1/d) * cos(freq * t + phase), freq and phase are 1 x d parameters.
  Var time_encoding(Parameter& freq, Parameter& phase, double t);

  Var segment_sum(Var x, std::span<const seg::SegmentId> segments, std::size_t n);
  Var segment_softmax(Var x, std::span<const seg::SegmentId> segments, std::size_t n);

  // Registers an externally computed node. `fn` may be empty only when no
  // parent needs a gradient; otherwise backward() through it throws.
  Var record(std::vector<double> value, std::vector<Var> parents, Backward fn);
  // For use inside a recorded adjoint: adds g to the gradient of parent v.
  void add_grad(Var v, std::span<const double> g) { accumulate(v, g); }

  // Accumulates d(loss)/d(param) into every parameter reached from `loss`.
  void backward(Var loss);

  std::span<double> grad_of(Var v);

 private:
  friend class Var;
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    Backward backward;
    bool needs_grad = false;
  };

  Var push(std::vector<double> value, bool needs_grad, Backward fn);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id_)].needs_grad; }
  const std::vector<double>& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id_)].value; }
  void check(Var v) const;
  void accumulate(Var v, std::span<const double> g);

  bool record_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
};

}  // namespace tkgx::ad
