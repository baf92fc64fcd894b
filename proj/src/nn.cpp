// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/nn.hpp"

#include <cmath>
#include <cstring>

#include "cunet/errors.hpp"

namespace cunet {

int ParamStore::add_param(const std::string& name, const std::vector<int>& shape) {
  Param p;
  p.name = name;
  p.shape = shape;
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  p.w.assign(n, 0.0);
  p.g.assign(n, 0.0);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

int ParamStore::add_buffer(const std::string& name, const std::vector<int>& shape, double fill) {
  Param p;
  p.name = name;
  p.shape = shape;
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  p.w.assign(n, fill);
  buffers_.push_back(std::move(p));
  return static_cast<int>(buffers_.size()) - 1;
}

size_t ParamStore::trainable_count() const {
  size_t n = 0;
  for (const Param& p : params_) n += p.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (Param& p : params_) std::fill(p.g.begin(), p.g.end(), 0.0);
}

void glorot_uniform(Param& p, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : p.w) v = rng.uniform(-limit, limit);
}

namespace {

// col has rows = in_c*kh*kw, cols = oh*ow, for one sample.
void im2col(const ConvGeom& g, const double* x, int h, int w, int oh, int ow, double* col) {
  const size_t patch = static_cast<size_t>(oh) * ow;
  for (int ic = 0; ic < g.in_c; ++ic) {
    const double* xc = x + static_cast<size_t>(ic) * h * w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        double* row = col + ((static_cast<size_t>(ic) * g.kh + ki) * g.kw + kj) * patch;
        for (int oi = 0; oi < oh; ++oi) {
          const int ii = oi * g.stride_h - g.pad_t + ki;
          double* dst = row + static_cast<size_t>(oi) * ow;
          if (ii < 0 || ii >= h) {
            std::memset(dst, 0, sizeof(double) * ow);
            continue;
          }
          const double* src = xc + static_cast<size_t>(ii) * w;
          for (int oj = 0; oj < ow; ++oj) {
            const int jj = oj * g.stride_w - g.pad_l + kj;
            dst[oj] = (jj >= 0 && jj < w) ? src[jj] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back onto the input grid.
void col2im(const ConvGeom& g, const double* col, int h, int w, int oh, int ow, double* x) {
  const size_t patch = static_cast<size_t>(oh) * ow;
  for (int ic = 0; ic < g.in_c; ++ic) {
    double* xc = x + static_cast<size_t>(ic) * h * w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        const double* row = col + ((static_cast<size_t>(ic) * g.kh + ki) * g.kw + kj) * patch;
        for (int oi = 0; oi < oh; ++oi) {
          const int ii = oi * g.stride_h - g.pad_t + ki;
          if (ii < 0 || ii >= h) continue;
          double* dst = xc + static_cast<size_t>(ii) * w;
          const double* src = row + static_cast<size_t>(oi) * ow;
          for (int oj = 0; oj < ow; ++oj) {
            const int jj = oj * g.stride_w - g.pad_l + kj;
            if (jj >= 0 && jj < w) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor4 conv2d_forward(const ConvGeom& g, const Param& weight, const Param& bias,
                       const Tensor4& x) {
  if (x.c != g.in_c) throw ShapeError("conv2d: input channel mismatch");
  const int oh = g.out_h(x.h), ow = g.out_w(x.w);
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: non-positive output dims");
  const int kk = g.in_c * g.kh * g.kw;
  const size_t patch = static_cast<size_t>(oh) * ow;

  Tensor4 y(x.n, g.out_c, oh, ow);
  std::vector<double> col(static_cast<size_t>(kk) * patch);
  for (int ni = 0; ni < x.n; ++ni) {
    im2col(g, x.at(ni, 0), x.h, x.w, oh, ow, col.data());
    gemm(weight.w.data(), col.data(), y.at(ni, 0), g.out_c, kk, static_cast<int>(patch));
    for (int oc = 0; oc < g.out_c; ++oc) {
      double* yp = y.at(ni, oc);
      const double b = bias.w[static_cast<size_t>(oc)];
      for (size_t i = 0; i < patch; ++i) yp[i] += b;
    }
  }
  return y;
}

Tensor4 conv2d_backward(const ConvGeom& g, Param& weight, Param& bias, const Tensor4& x,
                        const Tensor4& dy) {
  const int oh = dy.h, ow = dy.w;
  const int kk = g.in_c * g.kh * g.kw;
  const size_t patch = static_cast<size_t>(oh) * ow;

  Tensor4 dx(x.n, x.c, x.h, x.w);
  std::vector<double> col(static_cast<size_t>(kk) * patch);
  std::vector<double> dcol(static_cast<size_t>(kk) * patch);
  std::vector<double> dw_local(weight.w.size());

  for (int ni = 0; ni < x.n; ++ni) {
    // dW += dY * col^T
    im2col(g, x.at(ni, 0), x.h, x.w, oh, ow, col.data());
    gemm_bt(dy.at(ni, 0), col.data(), dw_local.data(), g.out_c, static_cast<int>(patch), kk);
    for (size_t i = 0; i < weight.g.size(); ++i) weight.g[i] += dw_local[i];
    // db += row sums of dY
    for (int oc = 0; oc < g.out_c; ++oc) {
      const double* dyp = dy.at(ni, oc);
      double acc = 0.0;
      for (size_t i = 0; i < patch; ++i) acc += dyp[i];
      bias.g[static_cast<size_t>(oc)] += acc;
    }
    // dX = col2im(W^T * dY)
    gemm_at(weight.w.data(), dy.at(ni, 0), dcol.data(), kk, g.out_c, static_cast<int>(patch));
    col2im(g, dcol.data(), x.h, x.w, oh, ow, dx.at(ni, 0));
  }
  return dx;
}

Tensor4 deconv2d_forward(const DeconvGeom& g, const Param& weight, const Param& bias,
                         const Tensor4& x) {
  if (x.c != g.in_c) throw ShapeError("deconv2d: input channel mismatch");
  const int oh = g.out_h(x.h), ow = g.out_w(x.w);
  if (oh <= 0 || ow <= 0) throw ShapeError("deconv2d: non-positive output dims");

  // The scatter geometry is the conv geometry read backwards: output
  // positions of a stride-s conv over the (oh, ow) canvas are exactly the
  // (x.h, x.w) grid.
  ConvGeom cg;
  cg.in_c = g.out_c;
  cg.out_c = g.in_c;
  cg.kh = g.kh;
  cg.kw = g.kw;
  cg.stride_h = g.stride_h;
  cg.stride_w = g.stride_w;
  cg.pad_t = g.pad_t;
  cg.pad_b = g.pad_b + g.out_pad_h;
  cg.pad_l = g.pad_l;
  cg.pad_r = g.pad_r + g.out_pad_w;

  const int kk = g.out_c * g.kh * g.kw;
  const size_t patch = static_cast<size_t>(x.h) * x.w;

  Tensor4 y(x.n, g.out_c, oh, ow);
  std::vector<double> col(static_cast<size_t>(kk) * patch);
  for (int ni = 0; ni < x.n; ++ni) {
    // col = W^T (in_c x kk)^T * X(in_c x patch)
    gemm_at(weight.w.data(), x.at(ni, 0), col.data(), kk, g.in_c, static_cast<int>(patch));
    col2im(cg, col.data(), oh, ow, x.h, x.w, y.at(ni, 0));
    for (int oc = 0; oc < g.out_c; ++oc) {
      double* yp = y.at(ni, oc);
      const double b = bias.w[static_cast<size_t>(oc)];
      for (int i = 0; i < oh * ow; ++i) yp[i] += b;
    }
  }
  return y;
}

Tensor4 deconv2d_backward(const DeconvGeom& g, Param& weight, Param& bias, const Tensor4& x,
                          const Tensor4& dy) {
  ConvGeom cg;
  cg.in_c = g.out_c;
  cg.out_c = g.in_c;
  cg.kh = g.kh;
  cg.kw = g.kw;
  cg.stride_h = g.stride_h;
  cg.stride_w = g.stride_w;
  cg.pad_t = g.pad_t;
  cg.pad_b = g.pad_b + g.out_pad_h;
  cg.pad_l = g.pad_l;
  cg.pad_r = g.pad_r + g.out_pad_w;

  const int kk = g.out_c * g.kh * g.kw;
  const size_t patch = static_cast<size_t>(x.h) * x.w;

  Tensor4 dx(x.n, x.c, x.h, x.w);
  std::vector<double> dcol(static_cast<size_t>(kk) * patch);
  std::vector<double> dw_local(weight.w.size());

  for (int ni = 0; ni < x.n; ++ni) {
    // Gather dY patches on the small grid, then dX = W * dcol.
    im2col(cg, dy.at(ni, 0), dy.h, dy.w, x.h, x.w, dcol.data());
    gemm(weight.w.data(), dcol.data(), dx.at(ni, 0), g.in_c, kk, static_cast<int>(patch));
    // dW += X * dcol^T
    gemm_bt(x.at(ni, 0), dcol.data(), dw_local.data(), g.in_c, static_cast<int>(patch), kk);
    for (size_t i = 0; i < weight.g.size(); ++i) weight.g[i] += dw_local[i];
    // db += sums of dY per output channel
    for (int oc = 0; oc < g.out_c; ++oc) {
      const double* dyp = dy.at(ni, oc);
      double acc = 0.0;
      for (int i = 0; i < dy.h * dy.w; ++i) acc += dyp[i];
      bias.g[static_cast<size_t>(oc)] += acc;
    }
  }
  return dx;
}

Tensor4 batchnorm_forward(const BatchNormOpts& o, const Param& gamma, const Param& beta,
                          Param& running_mean, Param& running_var, const Tensor4& x, Mode mode,
                          BatchNormCache* cache) {
  const int C = x.c;
  const size_t plane = x.plane();
  const size_t m = static_cast<size_t>(x.n) * plane;  // elements per channel

  Tensor4 y(x.n, x.c, x.h, x.w);
  if (mode == Mode::Eval) {
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(running_var.w[static_cast<size_t>(c)] + o.eps);
      const double mu = running_mean.w[static_cast<size_t>(c)];
      const double g = gamma.w[static_cast<size_t>(c)], b = beta.w[static_cast<size_t>(c)];
      for (int ni = 0; ni < x.n; ++ni) {
        const double* xp = x.at(ni, c);
        double* yp = y.at(ni, c);
        for (size_t i = 0; i < plane; ++i) yp[i] = g * (xp[i] - mu) * inv + b;
      }
    }
    if (cache) cache->train = false;
    return y;
  }

  if (cache) {
    cache->train = true;
    cache->xhat = Tensor4(x.n, x.c, x.h, x.w);
    cache->invstd.assign(static_cast<size_t>(C), 0.0);
  }
  for (int c = 0; c < C; ++c) {
    double mu = 0.0;
    for (int ni = 0; ni < x.n; ++ni) {
      const double* xp = x.at(ni, c);
      for (size_t i = 0; i < plane; ++i) mu += xp[i];
    }
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (int ni = 0; ni < x.n; ++ni) {
      const double* xp = x.at(ni, c);
      for (size_t i = 0; i < plane; ++i) {
        const double d = xp[i] - mu;
        var += d * d;
      }
    }
    var /= static_cast<double>(m);

    const double inv = 1.0 / std::sqrt(var + o.eps);
    const double g = gamma.w[static_cast<size_t>(c)], b = beta.w[static_cast<size_t>(c)];
    for (int ni = 0; ni < x.n; ++ni) {
      const double* xp = x.at(ni, c);
      double* yp = y.at(ni, c);
      double* hp = cache ? cache->xhat.at(ni, c) : nullptr;
      for (size_t i = 0; i < plane; ++i) {
        const double xh = (xp[i] - mu) * inv;
        if (hp) hp[i] = xh;
        yp[i] = g * xh + b;
      }
    }
    if (cache) cache->invstd[static_cast<size_t>(c)] = inv;

    running_mean.w[static_cast<size_t>(c)] =
        o.momentum * running_mean.w[static_cast<size_t>(c)] + (1.0 - o.momentum) * mu;
    running_var.w[static_cast<size_t>(c)] =
        o.momentum * running_var.w[static_cast<size_t>(c)] + (1.0 - o.momentum) * var;
  }
  return y;
}

Tensor4 batchnorm_backward(Param& gamma, Param& beta, const BatchNormCache& cache,
                           const Tensor4& dy) {
  if (!cache.train) throw StateError("batchnorm_backward: requires a train-mode cache");
  const Tensor4& xhat = cache.xhat;
  const int C = dy.c;
  const size_t plane = dy.plane();
  const double m = static_cast<double>(static_cast<size_t>(dy.n) * plane);

  Tensor4 dx(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int ni = 0; ni < dy.n; ++ni) {
      const double* dyp = dy.at(ni, c);
      const double* hp = xhat.at(ni, c);
      for (size_t i = 0; i < plane; ++i) {
        sum_dy += dyp[i];
        sum_dy_xhat += dyp[i] * hp[i];
      }
    }
    gamma.g[static_cast<size_t>(c)] += sum_dy_xhat;
    beta.g[static_cast<size_t>(c)] += sum_dy;
    const double g = gamma.w[static_cast<size_t>(c)];
    const double inv = cache.invstd[static_cast<size_t>(c)];
    const double k = g * inv / m;
    for (int ni = 0; ni < dy.n; ++ni) {
      const double* dyp = dy.at(ni, c);
      const double* hp = xhat.at(ni, c);
      double* dxp = dx.at(ni, c);
      for (size_t i = 0; i < plane; ++i)
        dxp[i] = k * (m * dyp[i] - sum_dy - hp[i] * sum_dy_xhat);
    }
  }
  return dx;
}

void leaky_relu_inplace(Tensor4& x, double slope) {
  for (double& v : x.d)
    if (v < 0.0) v *= slope;
}

Tensor4 leaky_relu_backward(const Tensor4& x_in, const Tensor4& dy, double slope) {
  Tensor4 dx(dy.n, dy.c, dy.h, dy.w);
  for (size_t i = 0; i < dy.d.size(); ++i)
    dx.d[i] = x_in.d[i] >= 0.0 ? dy.d[i] : dy.d[i] * slope;
  return dx;
}

void relu_inplace(Tensor4& x) {
  for (double& v : x.d)
    if (v < 0.0) v = 0.0;
}

Tensor4 relu_backward(const Tensor4& x_in, const Tensor4& dy) {
  Tensor4 dx(dy.n, dy.c, dy.h, dy.w);
  for (size_t i = 0; i < dy.d.size(); ++i) dx.d[i] = x_in.d[i] >= 0.0 ? dy.d[i] : 0.0;
  return dx;
}

void sigmoid_inplace(Tensor4& x) {
  for (double& v : x.d) v = 1.0 / (1.0 + std::exp(-v));
}

Tensor4 sigmoid_backward(const Tensor4& s_out, const Tensor4& dy) {
  Tensor4 dx(dy.n, dy.c, dy.h, dy.w);
  for (size_t i = 0; i < dy.d.size(); ++i) dx.d[i] = dy.d[i] * s_out.d[i] * (1.0 - s_out.d[i]);
  return dx;
}

Tensor4 dropout_mask(const Tensor4& like, double rate, Rng* rng) {
  Tensor4 mask(like.n, like.c, like.h, like.w, 1.0);
  if (rng == nullptr || rate <= 0.0) return mask;
  const double keep = 1.0 - rate;
  for (double& v : mask.d) v = rng->uniform() < rate ? 0.0 : 1.0 / keep;
  return mask;
}

void apply_mask_inplace(Tensor4& x, const Tensor4& mask) {
  for (size_t i = 0; i < x.d.size(); ++i) x.d[i] *= mask.d[i];
}

}  // namespace cunet
