#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dmtc/tensor.hpp"

namespace dmtc {

// Define-by-run reverse-mode tape over small dense tensors. Values are
// computed eagerly at op creation; backward() runs the recorded adjoints
// in reverse order. Every op checks its output for non-finite entries.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;             // adjoints capture this
  Graph& operator=(const Graph&) = delete;

  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  // Leaves.
  Var constant(Tensor t);
  Var constant_scalar(double x) { return constant(Tensor::scalar(x)); }
  Var param(Tensor t);  // differentiable leaf

  // Elementwise / broadcast arithmetic.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_row(Var x, Var v);  // BxC + 1xC
  Var mul_row(Var x, Var v);  // BxC * 1xC
  Var mul_col(Var x, Var v);  // row r of x scaled by v(0,r)
  Var scale(Var x, double s);
  Var add_const(Var x, double s);
  Var relu(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var sqrt(Var x);
  Var reciprocal(Var x);
  Var square(Var x);

  // Linear algebra / structure.
  Var matmul(Var a, Var b);
  Var reshape(Var x, int r, int c);
  Var slice(Var x, int r0, int nr, int c0, int nc);
  Var sum(Var x);        // -> 1x1
  Var mean(Var x);       // -> 1x1
  Var mean_rows(Var x);  // BxC -> 1xC

  // Composite primitives for the search machinery.
  Var softmax_rows(Var x);
  // Convex combination sum_i coeffs(0,i) * ys[i]; coefficients exactly 0/1
  // reproduce the selected input bit-for-bit.
  Var combine(Var coeffs, const std::vector<Var>& ys);
  // Column-wise product: NxM -> 1xM, entry j = prod_i x(i,j). Backward uses
  // leave-one-out products so zero entries are handled exactly.
  Var colprod(Var x);
  // Sum of squared differences -> 1x1.
  Var sqdist(Var a, Var b);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar(Var v) const;

  // Runs the adjoint sweep from a scalar output and returns its value.
  double forward_backward(Var out);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> backward;  // empty for leaves
  };

  Var emit(const char* op, Tensor value, bool needs_grad, std::function<void()> backward);
  Node& node(Var v) { return nodes_[v.id]; }

  std::vector<Node> nodes_;
};

}  // namespace dmtc
