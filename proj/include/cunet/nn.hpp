// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_NN_HPP
#define CUNET_NN_HPP

#include <string>
#include <vector>

#include "cunet/rng.hpp"
#include "cunet/tensor.hpp"

namespace cunet {

enum class Mode { Train, Eval };

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> w;
  std::vector<double> g;

  size_t numel() const { return w.size(); }
};

// Flat registry of trainable parameters and non-trainable buffers
// (batch-norm running statistics). The optimizer and the checkpoint
// container iterate it in registration order.
class ParamStore {
 public:
  int add_param(const std::string& name, const std::vector<int>& shape);
  int add_buffer(const std::string& name, const std::vector<int>& shape, double fill = 0.0);

  Param& param(int id) { return params_[static_cast<size_t>(id)]; }
  const Param& param(int id) const { return params_[static_cast<size_t>(id)]; }
  Param& buffer(int id) { return buffers_[static_cast<size_t>(id)]; }
  const Param& buffer(int id) const { return buffers_[static_cast<size_t>(id)]; }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Param>& buffers() { return buffers_; }
  const std::vector<Param>& buffers() const { return buffers_; }

  size_t trainable_count() const;
  void zero_grad();

 private:
  std::vector<Param> params_;
  std::vector<Param> buffers_;
};

void glorot_uniform(Param& p, int fan_in, int fan_out, Rng& rng);

// 2D convolution geometry. 1D convolutions and dense layers reuse this
// with unit height / unit kernels.
struct ConvGeom {
  int in_c = 0, out_c = 0;
  int kh = 1, kw = 1;
  int stride_h = 1, stride_w = 1;
  int pad_t = 0, pad_b = 0, pad_l = 0, pad_r = 0;

  int out_h(int h) const { return (h + pad_t + pad_b - kh) / stride_h + 1; }
  int out_w(int w) const { return (w + pad_l + pad_r - kw) / stride_w + 1; }
};

// weight layout [out_c][in_c][kh][kw], bias [out_c]
Tensor4 conv2d_forward(const ConvGeom& g, const Param& weight, const Param& bias,
                       const Tensor4& x);
// Accumulates into weight.g / bias.g; returns dx.
Tensor4 conv2d_backward(const ConvGeom& g, Param& weight, Param& bias, const Tensor4& x,
                        const Tensor4& dy);

// Transposed convolution: output spatial dims are
// (h-1)*stride - (pad_t+pad_b) + kh + output_pad. weight layout
// [in_c][out_c][kh][kw], matching the adjoint of conv2d.
struct DeconvGeom {
  int in_c = 0, out_c = 0;
  int kh = 1, kw = 1;
  int stride_h = 1, stride_w = 1;
  int pad_t = 0, pad_b = 0, pad_l = 0, pad_r = 0;
  int out_pad_h = 0, out_pad_w = 0;

  int out_h(int h) const { return (h - 1) * stride_h - (pad_t + pad_b) + kh + out_pad_h; }
  int out_w(int w) const { return (w - 1) * stride_w - (pad_l + pad_r) + kw + out_pad_w; }
};

Tensor4 deconv2d_forward(const DeconvGeom& g, const Param& weight, const Param& bias,
                         const Tensor4& x);
Tensor4 deconv2d_backward(const DeconvGeom& g, Param& weight, Param& bias, const Tensor4& x,
                          const Tensor4& dy);

// Batch normalization over (n, h, w) per channel, with running statistics.
struct BatchNormCache {
  Tensor4 xhat;
  std::vector<double> invstd;
  bool train = false;
};

struct BatchNormOpts {
  double eps = 1e-5;
  double momentum = 0.99;  // running = momentum*running + (1-momentum)*batch
};

Tensor4 batchnorm_forward(const BatchNormOpts& o, const Param& gamma, const Param& beta,
                          Param& running_mean, Param& running_var, const Tensor4& x, Mode mode,
                          BatchNormCache* cache);
// Train-mode backward (batch statistics). Accumulates gamma.g / beta.g.
Tensor4 batchnorm_backward(Param& gamma, Param& beta, const BatchNormCache& cache,
                           const Tensor4& dy);

// Elementwise activations. Backward takes the cached input.
void leaky_relu_inplace(Tensor4& x, double slope);
Tensor4 leaky_relu_backward(const Tensor4& x_in, const Tensor4& dy, double slope);
void relu_inplace(Tensor4& x);
Tensor4 relu_backward(const Tensor4& x_in, const Tensor4& dy);
void sigmoid_inplace(Tensor4& x);
// dy * s * (1 - s), taking the cached sigmoid output.
Tensor4 sigmoid_backward(const Tensor4& s_out, const Tensor4& dy);

// Inverted dropout; mask entries are 0 or 1/(1-rate). No-op when rng is null.
Tensor4 dropout_mask(const Tensor4& like, double rate, Rng* rng);
void apply_mask_inplace(Tensor4& x, const Tensor4& mask);

}  // namespace cunet

#endif  // CUNET_NN_HPP
