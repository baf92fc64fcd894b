// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/tensor.hpp"

#include <Eigen/Dense>

namespace cunet {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;
}  // namespace

void gemm(const double* a, const double* b, double* c_out, int m, int k, int n) {
  MMap(c_out, m, n).noalias() = CMap(a, m, k) * CMap(b, k, n);
}

void gemm_at(const double* a, const double* b, double* c_out, int m, int k, int n) {
  MMap(c_out, m, n).noalias() = CMap(a, k, m).transpose() * CMap(b, k, n);
}

void gemm_bt(const double* a, const double* b, double* c_out, int m, int k, int n) {
  MMap(c_out, m, n).noalias() = CMap(a, m, k) * CMap(b, n, k).transpose();
}

}  // namespace cunet
