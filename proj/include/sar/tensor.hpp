#pragma once

#include <cassert>
#include <cmath>
#include <vector>

namespace sar {

// Dense row-major matrix of doubles. Everything at desk scale is 2-D; token
// sequences are [T, d] and object sets [K, D].
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    assert(static_cast<size_t>(r) * c == data.size());
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double sq_norm() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return s;
  }
};

inline bool operator==(const Tensor& a, const Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

// c += a * b
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c);
// c += a * b^T
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c);
// c += a^T * b
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c);

}  // namespace sar
