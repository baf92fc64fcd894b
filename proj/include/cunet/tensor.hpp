// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_TENSOR_HPP
#define CUNET_TENSOR_HPP

#include <cassert>
#include <cstddef>
#include <vector>

namespace cunet {

// Dense row-major matrix of doubles. The library keeps all in-memory math
// in double; checkpoints quantize to float32 on disk.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(static_cast<size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }

  double& operator()(int r, int c) { return d_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return d_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }
  std::vector<double>& raw() { return d_; }
  const std::vector<double>& raw() const { return d_; }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : d_) {
      const double a = v < 0 ? -v : v;
      if (a > m) m = a;
    }
    return m;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> d_;
};

// Batched feature map, layout [n][c][h][w], contiguous.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> d;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), d(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  size_t size() const { return d.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t sample_stride() const { return static_cast<size_t>(c) * h * w; }

  double* at(int ni, int ci) { return d.data() + (static_cast<size_t>(ni) * c + ci) * plane(); }
  const double* at(int ni, int ci) const {
    return d.data() + (static_cast<size_t>(ni) * c + ci) * plane();
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

// C = A(m x k) * B(k x n), all row-major flat buffers.
void gemm(const double* a, const double* b, double* c_out, int m, int k, int n);
// C = A^T(m x k, stored k x m) * B(k x n)
void gemm_at(const double* a, const double* b, double* c_out, int m, int k, int n);
// C = A(m x k) * B^T(n x k)
void gemm_bt(const double* a, const double* b, double* c_out, int m, int k, int n);

}  // namespace cunet

#endif  // CUNET_TENSOR_HPP
