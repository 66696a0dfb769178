#include "sar/tensor.hpp"

namespace sar {

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  const int m = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < m; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * k];
    double* crow = &c.data[static_cast<size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(p) * n];
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
  const int m = a.rows, k = a.cols, n = b.rows;
  for (int i = 0; i < m; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * k];
    double* crow = &c.data[static_cast<size_t>(i) * n];
    for (int j = 0; j < n; ++j) {
      const double* brow = &b.data[static_cast<size_t>(j) * k];
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  const int m = a.cols, k = a.rows, n = b.cols;
  for (int p = 0; p < k; ++p) {
    const double* arow = &a.data[static_cast<size_t>(p) * m];
    const double* brow = &b.data[static_cast<size_t>(p) * n];
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = &c.data[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace sar
