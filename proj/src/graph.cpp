#include "dmtc/graph.hpp"

#include <cmath>

namespace dmtc {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

Graph::Var Graph::emit(const char* op, Tensor value, bool needs_grad,
                       std::function<void()> backward) {
  if (!all_finite(value))
    throw NumericError(std::string("non-finite intermediate in op '") + op + "'");
  Node n;
  n.grad = Tensor::zeros(value.rows, value.cols);
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Graph::Var Graph::constant(Tensor t) { return emit("constant", std::move(t), false, {}); }

Graph::Var Graph::param(Tensor t) { return emit("param", std::move(t), true, {}); }

Graph::Var Graph::add(Var a, Var b) {
  require(value(a).same_shape(value(b)), "add: shape mismatch " + value(a).shape_str() + " vs " +
                                             value(b).shape_str());
  Tensor out = value(a);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] += value(b).v[i];
  int id = static_cast<int>(nodes_.size());
  return emit("add", std::move(out), true, [this, a, b, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      node(a).grad.v[i] += g.v[i];
      node(b).grad.v[i] += g.v[i];
    }
  });
}

Graph::Var Graph::sub(Var a, Var b) {
  require(value(a).same_shape(value(b)), "sub: shape mismatch");
  Tensor out = value(a);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] -= value(b).v[i];
  int id = static_cast<int>(nodes_.size());
  return emit("sub", std::move(out), true, [this, a, b, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      node(a).grad.v[i] += g.v[i];
      node(b).grad.v[i] -= g.v[i];
    }
  });
}

Graph::Var Graph::mul(Var a, Var b) {
  require(value(a).same_shape(value(b)), "mul: shape mismatch");
  Tensor out = value(a);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] *= value(b).v[i];
  int id = static_cast<int>(nodes_.size());
  return emit("mul", std::move(out), true, [this, a, b, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      node(a).grad.v[i] += g.v[i] * value(b).v[i];
      node(b).grad.v[i] += g.v[i] * value(a).v[i];
    }
  });
}

Graph::Var Graph::add_row(Var x, Var v) {
  require(value(v).rows == 1 && value(v).cols == value(x).cols, "add_row: shape mismatch");
  Tensor out = value(x);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += value(v).at(0, c);
  int id = static_cast<int>(nodes_.size());
  return emit("add_row", std::move(out), true, [this, x, v, id] {
    const Tensor& g = nodes_[id].grad;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        node(x).grad.at(r, c) += g.at(r, c);
        node(v).grad.at(0, c) += g.at(r, c);
      }
  });
}

Graph::Var Graph::mul_row(Var x, Var v) {
  require(value(v).rows == 1 && value(v).cols == value(x).cols, "mul_row: shape mismatch");
  Tensor out = value(x);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) *= value(v).at(0, c);
  int id = static_cast<int>(nodes_.size());
  return emit("mul_row", std::move(out), true, [this, x, v, id] {
    const Tensor& g = nodes_[id].grad;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        node(x).grad.at(r, c) += g.at(r, c) * value(v).at(0, c);
        node(v).grad.at(0, c) += g.at(r, c) * value(x).at(r, c);
      }
  });
}

Graph::Var Graph::mul_col(Var x, Var v) {
  require(value(v).rows == 1 && value(v).cols == value(x).rows, "mul_col: shape mismatch");
  Tensor out = value(x);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) *= value(v).at(0, r);
  int id = static_cast<int>(nodes_.size());
  return emit("mul_col", std::move(out), true, [this, x, v, id] {
    const Tensor& g = nodes_[id].grad;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        node(x).grad.at(r, c) += g.at(r, c) * value(v).at(0, r);
        node(v).grad.at(0, r) += g.at(r, c) * value(x).at(r, c);
      }
  });
}

Graph::Var Graph::scale(Var x, double s) {
  Tensor out = value(x);
  for (double& e : out.v) e *= s;
  int id = static_cast<int>(nodes_.size());
  return emit("scale", std::move(out), true, [this, x, s, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) node(x).grad.v[i] += s * g.v[i];
  });
}

Graph::Var Graph::add_const(Var x, double s) {
  Tensor out = value(x);
  for (double& e : out.v) e += s;
  int id = static_cast<int>(nodes_.size());
  return emit("add_const", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) node(x).grad.v[i] += g.v[i];
  });
}

Graph::Var Graph::relu(Var x) {
  Tensor out = value(x);
  for (double& e : out.v) e = e > 0.0 ? e : 0.0;
  int id = static_cast<int>(nodes_.size());
  return emit("relu", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i)
      if (value(x).v[i] > 0.0) node(x).grad.v[i] += g.v[i];
  });
}

Graph::Var Graph::exp(Var x) {
  Tensor out = value(x);
  for (double& e : out.v) e = std::exp(e);
  int id = static_cast<int>(nodes_.size());
  return emit("exp", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) node(x).grad.v[i] += g.v[i] * nodes_[id].value.v[i];
  });
}

Graph::Var Graph::log(Var x) {
  Tensor out = value(x);
  for (double& e : out.v) e = std::log(e);
  int id = static_cast<int>(nodes_.size());
  return emit("log", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) node(x).grad.v[i] += g.v[i] / value(x).v[i];
  });
}

Graph::Var Graph::sqrt(Var x) {
  Tensor out = value(x);
  for (double& e : out.v) e = std::sqrt(e);
  int id = static_cast<int>(nodes_.size());
  return emit("sqrt", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i)
      node(x).grad.v[i] += g.v[i] * 0.5 / nodes_[id].value.v[i];
  });
}

Graph::Var Graph::reciprocal(Var x) {
  Tensor out = value(x);
  for (double& e : out.v) e = 1.0 / e;
  int id = static_cast<int>(nodes_.size());
  return emit("reciprocal", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      double y = nodes_[id].value.v[i];
      node(x).grad.v[i] -= g.v[i] * y * y;
    }
  });
}

Graph::Var Graph::square(Var x) {
  Tensor out = value(x);
  for (double& e : out.v) e = e * e;
  int id = static_cast<int>(nodes_.size());
  return emit("square", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) node(x).grad.v[i] += g.v[i] * 2.0 * value(x).v[i];
  });
}

Graph::Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.cols == B.rows, "matmul: inner extents differ " + A.shape_str() + " vs " +
                                B.shape_str());
  Tensor out(A.rows, B.cols);
  for (int r = 0; r < A.rows; ++r)
    for (int k = 0; k < A.cols; ++k) {
      double arc = A.at(r, k);
      if (arc == 0.0) continue;
      for (int c = 0; c < B.cols; ++c) out.at(r, c) += arc * B.at(k, c);
    }
  int id = static_cast<int>(nodes_.size());
  return emit("matmul", std::move(out), true, [this, a, b, id] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    Tensor& ga = node(a).grad;
    Tensor& gb = node(b).grad;
    // dA = g B^T ; dB = A^T g
    for (int r = 0; r < A.rows; ++r)
      for (int k = 0; k < A.cols; ++k) {
        double s = 0.0;
        for (int c = 0; c < B.cols; ++c) s += g.at(r, c) * B.at(k, c);
        ga.at(r, k) += s;
      }
    for (int k = 0; k < B.rows; ++k)
      for (int c = 0; c < B.cols; ++c) {
        double s = 0.0;
        for (int r = 0; r < A.rows; ++r) s += A.at(r, k) * g.at(r, c);
        gb.at(k, c) += s;
      }
  });
}

Graph::Var Graph::reshape(Var x, int r, int c) {
  require(static_cast<size_t>(r) * c == value(x).size(), "reshape: size mismatch");
  Tensor out(r, c);
  out.v = value(x).v;
  int id = static_cast<int>(nodes_.size());
  return emit("reshape", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    for (size_t i = 0; i < g.size(); ++i) node(x).grad.v[i] += g.v[i];
  });
}

Graph::Var Graph::slice(Var x, int r0, int nr, int c0, int nc) {
  const Tensor& X = value(x);
  require(r0 >= 0 && c0 >= 0 && r0 + nr <= X.rows && c0 + nc <= X.cols, "slice: out of range");
  Tensor out(nr, nc);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) out.at(r, c) = X.at(r0 + r, c0 + c);
  int id = static_cast<int>(nodes_.size());
  return emit("slice", std::move(out), true, [this, x, r0, c0, id] {
    const Tensor& g = nodes_[id].grad;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) node(x).grad.at(r0 + r, c0 + c) += g.at(r, c);
  });
}

Graph::Var Graph::sum(Var x) {
  double s = 0.0;
  for (double e : value(x).v) s += e;
  int id = static_cast<int>(nodes_.size());
  return emit("sum", Tensor::scalar(s), true, [this, x, id] {
    double g = nodes_[id].grad.v[0];
    for (double& e : node(x).grad.v) e += g;
  });
}

Graph::Var Graph::mean(Var x) {
  double s = 0.0;
  for (double e : value(x).v) s += e;
  double n = static_cast<double>(value(x).size());
  int id = static_cast<int>(nodes_.size());
  return emit("mean", Tensor::scalar(s / n), true, [this, x, n, id] {
    double g = nodes_[id].grad.v[0] / n;
    for (double& e : node(x).grad.v) e += g;
  });
}

Graph::Var Graph::mean_rows(Var x) {
  const Tensor& X = value(x);
  Tensor out(1, X.cols);
  for (int r = 0; r < X.rows; ++r)
    for (int c = 0; c < X.cols; ++c) out.at(0, c) += X.at(r, c);
  for (int c = 0; c < X.cols; ++c) out.at(0, c) /= X.rows;
  int id = static_cast<int>(nodes_.size());
  return emit("mean_rows", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& X = value(x);
    for (int r = 0; r < X.rows; ++r)
      for (int c = 0; c < X.cols; ++c) node(x).grad.at(r, c) += g.at(0, c) / X.rows;
  });
}

Graph::Var Graph::softmax_rows(Var x) {
  const Tensor& X = value(x);
  Tensor out(X.rows, X.cols);
  for (int r = 0; r < X.rows; ++r) {
    double mx = X.at(r, 0);
    for (int c = 1; c < X.cols; ++c) mx = std::max(mx, X.at(r, c));
    double z = 0.0;
    for (int c = 0; c < X.cols; ++c) {
      out.at(r, c) = std::exp(X.at(r, c) - mx);
      z += out.at(r, c);
    }
    for (int c = 0; c < X.cols; ++c) out.at(r, c) /= z;
  }
  int id = static_cast<int>(nodes_.size());
  return emit("softmax_rows", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& y = nodes_[id].value;
    for (int r = 0; r < y.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < y.cols; ++c) dot += g.at(r, c) * y.at(r, c);
      for (int c = 0; c < y.cols; ++c)
        node(x).grad.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

Graph::Var Graph::combine(Var coeffs, const std::vector<Var>& ys) {
  const Tensor& C = value(coeffs);
  require(C.rows == 1 && C.cols == static_cast<int>(ys.size()), "combine: coeff shape mismatch");
  require(!ys.empty(), "combine: empty input list");
  const Tensor& y0 = value(ys[0]);
  Tensor out(y0.rows, y0.cols);
  for (size_t i = 0; i < ys.size(); ++i) {
    const Tensor& Y = value(ys[i]);
    require(Y.same_shape(y0), "combine: member shape mismatch");
    double ci = C.at(0, static_cast<int>(i));
    if (ci == 0.0) continue;
    if (ci == 1.0)
      for (size_t k = 0; k < out.size(); ++k) out.v[k] += Y.v[k];
    else
      for (size_t k = 0; k < out.size(); ++k) out.v[k] += ci * Y.v[k];
  }
  int id = static_cast<int>(nodes_.size());
  std::vector<Var> members = ys;
  return emit("combine", std::move(out), true, [this, coeffs, members, id] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& C = value(coeffs);
    for (size_t i = 0; i < members.size(); ++i) {
      const Tensor& Y = value(members[i]);
      double ci = C.at(0, static_cast<int>(i));
      double dot = 0.0;
      Tensor& gy = node(members[i]).grad;
      for (size_t k = 0; k < g.size(); ++k) {
        dot += g.v[k] * Y.v[k];
        gy.v[k] += ci * g.v[k];
      }
      node(coeffs).grad.at(0, static_cast<int>(i)) += dot;
    }
  });
}

Graph::Var Graph::colprod(Var x) {
  const Tensor& X = value(x);
  Tensor out(1, X.cols);
  for (int c = 0; c < X.cols; ++c) {
    double p = 1.0;
    for (int r = 0; r < X.rows; ++r) p *= X.at(r, c);
    out.at(0, c) = p;
  }
  int id = static_cast<int>(nodes_.size());
  return emit("colprod", std::move(out), true, [this, x, id] {
    const Tensor& g = nodes_[id].grad;
    const Tensor& X = value(x);
    for (int c = 0; c < X.cols; ++c) {
      for (int r = 0; r < X.rows; ++r) {
        double loo = 1.0;  // leave-one-out product, exact under zeros
        for (int k = 0; k < X.rows; ++k)
          if (k != r) loo *= X.at(k, c);
        node(x).grad.at(r, c) += g.at(0, c) * loo;
      }
    }
  });
}

Graph::Var Graph::sqdist(Var a, Var b) {
  require(value(a).same_shape(value(b)), "sqdist: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < value(a).size(); ++i) {
    double d = value(a).v[i] - value(b).v[i];
    s += d * d;
  }
  int id = static_cast<int>(nodes_.size());
  return emit("sqdist", Tensor::scalar(s), true, [this, a, b, id] {
    double g = nodes_[id].grad.v[0];
    for (size_t i = 0; i < value(a).size(); ++i) {
      double d = value(a).v[i] - value(b).v[i];
      node(a).grad.v[i] += 2.0 * g * d;
      node(b).grad.v[i] -= 2.0 * g * d;
    }
  });
}

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw std::invalid_argument("scalar: output is not 1x1");
  return t.v[0];
}

double Graph::forward_backward(Var out) {
  double val = scalar(out);
  for (Node& n : nodes_)
    for (double& g : n.grad.v) g = 0.0;
  nodes_[out.id].grad.v[0] = 1.0;
  for (int i = out.id; i >= 0; --i)
    if (nodes_[i].backward) nodes_[i].backward();
  return val;
}

}  // namespace dmtc
