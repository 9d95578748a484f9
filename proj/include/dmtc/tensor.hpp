#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dmtc {

// Row-major double-precision matrix. Scalars are 1x1, row vectors 1xC.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {
    if (r <= 0 || c <= 0) throw std::invalid_argument("Tensor: extents must be positive");
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor row(const std::vector<double>& xs) {
    Tensor t(1, static_cast<int>(xs.size()));
    t.v = xs;
    return t;
  }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

// Raised when an op produces a non-finite intermediate; names the op.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool all_finite(const Tensor& t);

}  // namespace dmtc
