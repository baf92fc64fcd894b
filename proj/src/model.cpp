// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/model.hpp"

#include <cmath>
#include <cstring>

#include "cunet/errors.hpp"

namespace cunet {

namespace {

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  Tensor4 out(a.n, a.c + b.c, a.h, a.w);
  const size_t pa = a.plane(), pb = b.plane();
  for (int ni = 0; ni < a.n; ++ni) {
    std::memcpy(out.at(ni, 0), a.at(ni, 0), sizeof(double) * a.c * pa);
    std::memcpy(out.at(ni, a.c), b.at(ni, 0), sizeof(double) * b.c * pb);
  }
  return out;
}

void split_channels(const Tensor4& d, int c_first, Tensor4& da, Tensor4& db) {
  da = Tensor4(d.n, c_first, d.h, d.w);
  db = Tensor4(d.n, d.c - c_first, d.h, d.w);
  const size_t plane = d.plane();
  for (int ni = 0; ni < d.n; ++ni) {
    std::memcpy(da.at(ni, 0), d.at(ni, 0), sizeof(double) * c_first * plane);
    std::memcpy(db.at(ni, 0), d.at(ni, c_first), sizeof(double) * (d.c - c_first) * plane);
  }
}

Tensor4 mat_to_tensor(const Mat& m) {
  Tensor4 t(1, 1, m.rows(), m.cols());
  std::memcpy(t.d.data(), m.data(), sizeof(double) * m.size());
  return t;
}

Mat tensor_to_mat(const Tensor4& t, int ni, int ci) {
  Mat m(t.h, t.w);
  std::memcpy(m.data(), t.at(ni, ci), sizeof(double) * m.size());
  return m;
}

}  // namespace

std::vector<int> ModelConfig::encoder_channels() const {
  std::vector<int> ch(static_cast<size_t>(n_blocks));
  for (int i = 0; i < n_blocks; ++i) ch[static_cast<size_t>(i)] = base_filters << i;
  return ch;
}

void ModelConfig::validate() const {
  if (n_blocks < 1) throw ConfigError("ModelConfig: n_blocks must be >= 1");
  if (base_filters < 1) throw ConfigError("ModelConfig: base_filters must be >= 1");
  if (stride != 2) throw ConfigError("ModelConfig: only stride 2 is supported");
  const int div = 1 << n_blocks;
  if (input_rows % div != 0 || input_cols % div != 0)
    throw ConfigError("ModelConfig: input dims must be divisible by 2^n_blocks");
}

double l1_loss(const Mat& masked, const Mat& target, LossReduction reduction) {
  if (!masked.same_shape(target)) throw ShapeError("l1_loss: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < masked.size(); ++i) acc += std::fabs(masked.raw()[i] - target.raw()[i]);
  if (reduction == LossReduction::Mean && masked.size() > 0)
    acc /= static_cast<double>(masked.size());
  return acc;
}

struct CUNet::Fwd {
  Mode mode = Mode::Eval;
  bool conditioned = false;
  std::vector<Tensor4> enc_in;       // input of conv i
  std::vector<BatchNormCache> enc_bn;
  std::vector<Tensor4> enc_film_in;  // BN output (film input), conditioned only
  std::vector<Tensor4> enc_act_in;   // leaky ReLU input
  std::vector<Tensor4> enc_out;      // post-activation, skip sources
  Mat gammas, betas;                 // (n x film_values)
  Generator::Cache gen;
  std::vector<Tensor4> dec_in;       // input of deconv j
  std::vector<BatchNormCache> dec_bn;
  std::vector<Tensor4> dec_act_in;   // ReLU input
  std::vector<Tensor4> dec_drop;     // dropout masks
  Tensor4 final_in;
  Tensor4 mask;                      // sigmoid output
};

CUNet::CUNet(const ModelConfig& config, std::optional<GeneratorConfig> gen_config, uint64_t seed)
    : cfg_(config), gen_cfg_(std::move(gen_config)) {
  cfg_.validate();
  if (cfg_.conditioned && !gen_cfg_)
    throw ConfigError("CUNet: conditioned model requires a generator config");

  Rng rng(seed);
  const std::vector<int> ec = cfg_.encoder_channels();
  const int k = cfg_.kernel;
  const int pad = (k - 1) / 2;

  auto make_bn = [&](const std::string& name, int c) {
    BnIds ids;
    ids.gamma = store_.add_param(name + ".gamma", {c});
    ids.beta = store_.add_param(name + ".beta", {c});
    std::fill(store_.param(ids.gamma).w.begin(), store_.param(ids.gamma).w.end(), 1.0);
    ids.rmean = store_.add_buffer(name + ".running_mean", {c}, 0.0);
    ids.rvar = store_.add_buffer(name + ".running_var", {c}, 1.0);
    return ids;
  };

  for (int i = 0; i < cfg_.n_blocks; ++i) {
    const int in_c = i == 0 ? 1 : ec[static_cast<size_t>(i - 1)];
    const int out_c = ec[static_cast<size_t>(i)];
    ConvIds conv;
    conv.geom.in_c = in_c;
    conv.geom.out_c = out_c;
    conv.geom.kh = conv.geom.kw = k;
    conv.geom.stride_h = conv.geom.stride_w = cfg_.stride;
    conv.geom.pad_t = conv.geom.pad_b = conv.geom.pad_l = conv.geom.pad_r = pad;
    const std::string name = "enc" + std::to_string(i);
    conv.w = store_.add_param(name + ".conv.w", {out_c, in_c, k, k});
    conv.b = store_.add_param(name + ".conv.b", {out_c});
    glorot_uniform(store_.param(conv.w), in_c * k * k, out_c * k * k, rng);
    enc_conv_.push_back(conv);
    enc_bn_.push_back(make_bn(name + ".bn", out_c));
  }

  for (int j = 0; j < cfg_.n_blocks; ++j) {
    const int n = cfg_.n_blocks;
    const int in_c = j == 0 ? ec[static_cast<size_t>(n - 1)] : 2 * ec[static_cast<size_t>(n - 1 - j)];
    const int out_c = j == n - 1 ? cfg_.base_filters : ec[static_cast<size_t>(n - 2 - j)];
    DeconvIds dec;
    dec.geom.in_c = in_c;
    dec.geom.out_c = out_c;
    dec.geom.kh = dec.geom.kw = k;
    dec.geom.stride_h = dec.geom.stride_w = cfg_.stride;
    dec.geom.pad_t = dec.geom.pad_b = dec.geom.pad_l = dec.geom.pad_r = pad;
    // output padding makes each block exactly double the spatial dims
    dec.geom.out_pad_h = 2 * pad + 2 - k;
    dec.geom.out_pad_w = dec.geom.out_pad_h;
    const std::string name = "dec" + std::to_string(j);
    dec.w = store_.add_param(name + ".deconv.w", {in_c, out_c, k, k});
    dec.b = store_.add_param(name + ".deconv.b", {out_c});
    glorot_uniform(store_.param(dec.w), in_c * k * k, out_c * k * k, rng);
    dec_deconv_.push_back(dec);
    dec_bn_.push_back(make_bn(name + ".bn", out_c));
  }

  final_conv_.geom.in_c = cfg_.base_filters;
  final_conv_.geom.out_c = 1;
  final_conv_.w = store_.add_param("mask.conv.w", {1, cfg_.base_filters, 1, 1});
  final_conv_.b = store_.add_param("mask.conv.b", {1});
  glorot_uniform(store_.param(final_conv_.w), cfg_.base_filters, 1, rng);

  core_params_ = store_.trainable_count();

  if (cfg_.conditioned) {
    gen_cfg_->channels_per_depth = ec;
    gen_ = Generator(*gen_cfg_, store_, rng);
    film_offsets_.assign(static_cast<size_t>(cfg_.n_blocks), 0);
    int off = 0;
    for (int i = 0; i < cfg_.n_blocks; ++i) {
      film_offsets_[static_cast<size_t>(i)] = off;
      off += cfg_.film_mode == FilmMode::Simple ? 1 : ec[static_cast<size_t>(i)];
    }
  }
}

Tensor4 CUNet::run_forward(const Tensor4& x, const Mat& z, const Mat* film_gammas,
                           const Mat* film_betas, Mode mode, Rng* dropout_rng, Fwd& f) {
  if (x.h != cfg_.input_rows || x.w != cfg_.input_cols)
    throw ShapeError("CUNet: input patch shape does not match the model config");
  for (double v : x.d)
    if (v < 0.0) throw DomainError("CUNet: magnitude input must be non-negative");

  const int n = cfg_.n_blocks;
  const std::vector<int> ec = cfg_.encoder_channels();
  BatchNormOpts bn_opts;

  f.mode = mode;
  f.conditioned = cfg_.conditioned;
  f.enc_in.clear();
  f.enc_bn.assign(static_cast<size_t>(n), BatchNormCache{});
  f.enc_film_in.clear();
  f.enc_film_in.resize(static_cast<size_t>(n));
  f.enc_act_in.clear();
  f.enc_out.clear();
  f.dec_in.clear();
  f.dec_bn.assign(static_cast<size_t>(n), BatchNormCache{});
  f.dec_act_in.clear();
  f.dec_drop.clear();

  if (cfg_.conditioned) {
    if (film_gammas != nullptr) {
      f.gammas = *film_gammas;
      f.betas = *film_betas;
      if (f.gammas.rows() != x.n || f.gammas.cols() != gen_cfg_->film_values_per_kind())
        throw ShapeError("CUNet: FiLM override cardinality mismatch");
    } else {
      if (z.rows() != x.n || z.cols() != gen_cfg_->n_tasks)
        throw ShapeError("CUNet: condition vector length mismatch");
      gen_.forward(z, mode, dropout_rng, f.gammas, f.betas, &f.gen);
    }
  }

  Tensor4 cur = x;
  for (int i = 0; i < n; ++i) {
    f.enc_in.push_back(cur);
    const ConvIds& conv = enc_conv_[static_cast<size_t>(i)];
    Tensor4 t = conv2d_forward(conv.geom, store_.param(conv.w), store_.param(conv.b), cur);
    const BnIds& bn = enc_bn_[static_cast<size_t>(i)];
    t = batchnorm_forward(bn_opts, store_.param(bn.gamma), store_.param(bn.beta),
                          store_.buffer(bn.rmean), store_.buffer(bn.rvar), t, mode,
                          &f.enc_bn[static_cast<size_t>(i)]);
    if (cfg_.conditioned) {
      f.enc_film_in[static_cast<size_t>(i)] = t;
      const int off = film_offsets_[static_cast<size_t>(i)];
      const bool simple = cfg_.film_mode == FilmMode::Simple;
      const size_t plane = t.plane();
      for (int ni = 0; ni < t.n; ++ni) {
        for (int c = 0; c < t.c; ++c) {
          const int idx = simple ? off : off + c;
          const double g = f.gammas(ni, idx), b = f.betas(ni, idx);
          double* tp = t.at(ni, c);
          for (size_t p = 0; p < plane; ++p) tp[p] = g * tp[p] + b;
        }
      }
    }
    f.enc_act_in.push_back(t);
    leaky_relu_inplace(t, cfg_.leakiness);
    f.enc_out.push_back(t);
    cur = std::move(t);
  }

  for (int j = 0; j < n; ++j) {
    f.dec_in.push_back(cur);
    const DeconvIds& dec = dec_deconv_[static_cast<size_t>(j)];
    Tensor4 t = deconv2d_forward(dec.geom, store_.param(dec.w), store_.param(dec.b), cur);
    const BnIds& bn = dec_bn_[static_cast<size_t>(j)];
    t = batchnorm_forward(bn_opts, store_.param(bn.gamma), store_.param(bn.beta),
                          store_.buffer(bn.rmean), store_.buffer(bn.rvar), t, mode,
                          &f.dec_bn[static_cast<size_t>(j)]);
    f.dec_act_in.push_back(t);
    relu_inplace(t);
    if (j < cfg_.decoder_dropout_blocks) {
      Tensor4 mask = dropout_mask(t, cfg_.dropout, mode == Mode::Train ? dropout_rng : nullptr);
      apply_mask_inplace(t, mask);
      f.dec_drop.push_back(std::move(mask));
    }
    if (j < n - 1)
      cur = concat_channels(t, f.enc_out[static_cast<size_t>(n - 2 - j)]);
    else
      cur = std::move(t);
  }

  f.final_in = cur;
  Tensor4 pre = conv2d_forward(final_conv_.geom, store_.param(final_conv_.w),
                               store_.param(final_conv_.b), cur);
  sigmoid_inplace(pre);
  f.mask = pre;
  return f.mask;
}

void CUNet::run_backward(const Tensor4& x, Fwd& f, const Tensor4& dmask) {
  const int n = cfg_.n_blocks;
  Tensor4 dpre = sigmoid_backward(f.mask, dmask);
  Tensor4 dcur = conv2d_backward(final_conv_.geom, store_.param(final_conv_.w),
                                 store_.param(final_conv_.b), f.final_in, dpre);

  std::vector<Tensor4> skip_grad(static_cast<size_t>(n));
  for (int j = n - 1; j >= 0; --j) {
    if (j < cfg_.decoder_dropout_blocks)
      apply_mask_inplace(dcur, f.dec_drop[static_cast<size_t>(j)]);
    dcur = relu_backward(f.dec_act_in[static_cast<size_t>(j)], dcur);
    const BnIds& bn = dec_bn_[static_cast<size_t>(j)];
    dcur = batchnorm_backward(store_.param(bn.gamma), store_.param(bn.beta),
                              f.dec_bn[static_cast<size_t>(j)], dcur);
    const DeconvIds& dec = dec_deconv_[static_cast<size_t>(j)];
    dcur = deconv2d_backward(dec.geom, store_.param(dec.w), store_.param(dec.b),
                             f.dec_in[static_cast<size_t>(j)], dcur);
    if (j >= 1) {
      const int c_first = f.dec_in[static_cast<size_t>(j)].c / 2;
      Tensor4 da, db;
      split_channels(dcur, c_first, da, db);
      skip_grad[static_cast<size_t>(n - 1 - j)] = std::move(db);
      dcur = std::move(da);
    } else {
      skip_grad[static_cast<size_t>(n - 1)] = std::move(dcur);
    }
  }

  Mat dgammas, dbetas;
  if (cfg_.conditioned) {
    dgammas = Mat(f.gammas.rows(), f.gammas.cols());
    dbetas = Mat(f.betas.rows(), f.betas.cols());
  }

  Tensor4 dout = std::move(skip_grad[static_cast<size_t>(n - 1)]);
  for (int i = n - 1; i >= 0; --i) {
    Tensor4 dact = leaky_relu_backward(f.enc_act_in[static_cast<size_t>(i)], dout,
                                       cfg_.leakiness);
    if (cfg_.conditioned) {
      const Tensor4& film_in = f.enc_film_in[static_cast<size_t>(i)];
      const int off = film_offsets_[static_cast<size_t>(i)];
      const bool simple = cfg_.film_mode == FilmMode::Simple;
      const size_t plane = dact.plane();
      for (int ni = 0; ni < dact.n; ++ni) {
        for (int c = 0; c < dact.c; ++c) {
          const int idx = simple ? off : off + c;
          const double g = f.gammas(ni, idx);
          const double* dp = dact.at(ni, c);
          const double* xp = film_in.at(ni, c);
          double sg = 0.0, sb = 0.0;
          double* mdp = dact.at(ni, c);
          for (size_t p = 0; p < plane; ++p) {
            sg += dp[p] * xp[p];
            sb += dp[p];
            mdp[p] = dp[p] * g;  // dx through the affine scale
          }
          dgammas(ni, idx) += sg;
          dbetas(ni, idx) += sb;
        }
      }
    }
    const BnIds& bn = enc_bn_[static_cast<size_t>(i)];
    Tensor4 dconv = batchnorm_backward(store_.param(bn.gamma), store_.param(bn.beta),
                                       f.enc_bn[static_cast<size_t>(i)], dact);
    const ConvIds& conv = enc_conv_[static_cast<size_t>(i)];
    Tensor4 din = conv2d_backward(conv.geom, store_.param(conv.w), store_.param(conv.b),
                                  f.enc_in[static_cast<size_t>(i)], dconv);
    if (i >= 1) {
      dout = std::move(skip_grad[static_cast<size_t>(i - 1)]);
      for (size_t p = 0; p < dout.d.size(); ++p) dout.d[p] += din.d[p];
    }
  }

  if (cfg_.conditioned) gen_.backward(f.gen, dgammas, dbetas);
  (void)x;
}

MaskOutput CUNet::forward_internal(const Mat& x, const ConditionVector* z,
                                   const FiLMParamSet* film, Mode mode) {
  Tensor4 xt = mat_to_tensor(x);
  Fwd f;
  Mat zmat;
  Mat gammas, betas;
  const Mat* gp = nullptr;
  const Mat* bp = nullptr;

  if (cfg_.conditioned) {
    if (film != nullptr) {
      const int width = gen_cfg_->film_values_per_kind();
      if (film->mode != cfg_.film_mode)
        throw ShapeError("CUNet: FiLM override mode mismatch");
      gammas = Mat(1, width);
      betas = Mat(1, width);
      int off = 0;
      for (size_t d = 0; d < film->gammas.size(); ++d) {
        for (size_t i = 0; i < film->gammas[d].size(); ++i) {
          gammas(0, off) = film->gammas[d][i];
          betas(0, off) = film->betas[d][i];
          ++off;
        }
      }
      if (off != width) throw ShapeError("CUNet: FiLM override cardinality mismatch");
      gp = &gammas;
      bp = &betas;
    } else {
      if (z == nullptr) throw ShapeError("CUNet: conditioned model requires z");
      if (z->n_tasks() != gen_cfg_->n_tasks)
        throw ShapeError("CUNet: condition vector length mismatch");
      zmat = Mat(1, z->n_tasks());
      for (int i = 0; i < z->n_tasks(); ++i) zmat(0, i) = z->weights[static_cast<size_t>(i)];
    }
  } else if (film != nullptr) {
    throw ConfigError("CUNet: FiLM override on a dedicated model");
  }

  Tensor4 mask_t = run_forward(xt, zmat, gp, bp, mode, nullptr, f);
  MaskOutput out;
  out.mask = tensor_to_mat(mask_t, 0, 0);
  out.masked_magnitude = Mat(x.rows(), x.cols());
  for (size_t i = 0; i < out.masked_magnitude.size(); ++i)
    out.masked_magnitude.raw()[i] = out.mask.raw()[i] * x.raw()[i];
  return out;
}

MaskOutput CUNet::forward(const Mat& x, const ConditionVector* z, Mode mode) {
  return forward_internal(x, z, nullptr, mode);
}

MaskOutput CUNet::forward_with_film(const Mat& x, const FiLMParamSet& film, Mode mode) {
  return forward_internal(x, nullptr, &film, mode);
}

double CUNet::loss(const Mat& x, const Mat& y, const ConditionVector* z, Mode mode) {
  if (!x.same_shape(y)) throw ShapeError("CUNet::loss: X/Y shape mismatch");
  MaskOutput out = forward(x, z, mode);
  return l1_loss(out.masked_magnitude, y, cfg_.loss_reduction);
}

double CUNet::batch_loss(const TrainBatch& batch, Mode mode, Rng* dropout_rng, bool backward) {
  if (!batch.x.same_shape(batch.y)) throw ShapeError("CUNet::batch_loss: X/Y shape mismatch");
  if (backward && mode != Mode::Train)
    throw StateError("CUNet::batch_loss: backward requires train mode");
  Fwd f;
  Tensor4 mask = run_forward(batch.x, batch.z, nullptr, nullptr, mode, dropout_rng, f);

  double loss = 0.0;
  Tensor4 dmask(mask.n, mask.c, mask.h, mask.w);
  const double scale = cfg_.loss_reduction == LossReduction::Mean
                           ? 1.0 / static_cast<double>(mask.d.size())
                           : 1.0;
  for (size_t i = 0; i < mask.d.size(); ++i) {
    const double masked = mask.d[i] * batch.x.d[i];
    const double r = masked - batch.y.d[i];
    loss += std::fabs(r) * scale;
    if (backward) {
      const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      dmask.d[i] = sgn * batch.x.d[i] * scale;
    }
  }
  if (backward) run_backward(batch.x, f, dmask);
  return loss;
}

Tensor4 CUNet::batch_mask(const TrainBatch& batch, Mode mode, Rng* dropout_rng) {
  Fwd f;
  return run_forward(batch.x, batch.z, nullptr, nullptr, mode, dropout_rng, f);
}

size_t CUNet::count_parameters() const { return store_.trainable_count(); }

size_t CUNet::core_param_count() const { return core_params_; }

size_t CUNet::generator_param_count() const {
  return store_.trainable_count() - core_params_;
}

}  // namespace cunet
