#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sasow/numerics.hpp"

namespace sasow {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Records a forward pass over dense matrices so it can be replayed backward.
// Nodes are appended in evaluation order, which is a topological order, so
// backward() is a single reverse sweep.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  // Trainable leaf. The gradient is retrievable afterwards by the address of
  // the parameter matrix.
  Var parameter(const Matrix& param);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& value(Var v) const { return value(v.id); }
  // Zero-shaped when no gradient reached the node.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  Matrix gradient(const Matrix& param) const;

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

  // Op plumbing.
  Var record(Matrix value, Backward backward);
  Matrix& grad_accumulator(std::size_t id);
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, std::size_t> params_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

// Differentiable primitives. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
// x (n x m) + bias (1 x m) broadcast over rows.
Var add_row(Var x, Var bias);
Var scale(Var x, double factor);
Var relu(Var x);
// Elementwise multiply by a fixed mask (already scaled by 1/(1-rate)).
Var dropout(Var x, const Matrix& mask);
// Row-major reinterpretation; element order is unchanged.
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);
// q, k: (B*P) x t. Returns (B*P) x P where block b holds Q_b K_b^T.
Var block_scores(Var q, Var k, Eigen::Index tokens);
Var softmax_rows(Var x);
// a: (B*P) x P, v: (B*P) x t. Returns (B*P) x t where block b holds A_b V_b.
Var block_mix(Var a, Var v, Eigen::Index tokens);
// Mean softmax cross-entropy over the rows of logits (1 x 1 result).
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
Var sum(Var x);
// sum(x .* weights); used to scalarize outputs in gradient checks.
Var weighted_sum(Var x, const Matrix& weights);

}  // namespace sasow
