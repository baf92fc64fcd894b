// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/conditioning.hpp"

#include <cstring>
#include <numeric>

#include "cunet/errors.hpp"

namespace cunet {

std::string film_mode_name(FilmMode m) {
  return m == FilmMode::Simple ? "simple" : "complex";
}

std::string embedding_name(EmbeddingKind e) {
  return e == EmbeddingKind::FullyConnected ? "fc" : "cnn";
}

ConditionVector one_hot(int task_index, int n_tasks) {
  if (n_tasks <= 0) throw IndexError("one_hot: n_tasks must be positive");
  if (task_index < 0 || task_index >= n_tasks)
    throw IndexError("one_hot: task_index out of range");
  ConditionVector z;
  z.weights.assign(static_cast<size_t>(n_tasks), 0.0);
  z.weights[static_cast<size_t>(task_index)] = 1.0;
  return z;
}

int FiLMParamSet::total_values() const {
  size_t n = 0;
  for (const auto& g : gammas) n += g.size();
  for (const auto& b : betas) n += b.size();
  return static_cast<int>(n);
}

FiLMParamSet FiLMParamSet::identity(FilmMode mode, const std::vector<int>& channels_per_depth) {
  FiLMParamSet s;
  s.mode = mode;
  s.channels_per_depth = channels_per_depth;
  for (int c : channels_per_depth) {
    const size_t n = mode == FilmMode::Simple ? 1 : static_cast<size_t>(c);
    s.gammas.emplace_back(n, 1.0);
    s.betas.emplace_back(n, 0.0);
  }
  return s;
}

Tensor4 film_apply(const Tensor4& x, const std::vector<double>& gamma,
                   const std::vector<double>& beta, FilmMode mode) {
  if (gamma.size() != beta.size()) throw ShapeError("film_apply: gamma/beta size mismatch");
  Tensor4 y(x.n, x.c, x.h, x.w);
  const size_t plane = x.plane();
  if (mode == FilmMode::Simple) {
    if (gamma.size() != 1) throw ShapeError("film_apply: simple mode expects scalars");
    const double g = gamma[0], b = beta[0];
    for (size_t i = 0; i < x.d.size(); ++i) y.d[i] = g * x.d[i] + b;
    return y;
  }
  if (static_cast<int>(gamma.size()) != x.c)
    throw ShapeError("film_apply: complex mode expects one pair per channel");
  for (int ni = 0; ni < x.n; ++ni) {
    for (int c = 0; c < x.c; ++c) {
      const double g = gamma[static_cast<size_t>(c)], b = beta[static_cast<size_t>(c)];
      const double* xp = x.at(ni, c);
      double* yp = y.at(ni, c);
      for (size_t i = 0; i < plane; ++i) yp[i] = g * xp[i] + b;
    }
  }
  return y;
}

std::vector<int> GeneratorConfig::resolved_hidden_sizes() const {
  if (!hidden_sizes.empty()) {
    if (hidden_sizes.size() != 3)
      throw ConfigError("GeneratorConfig: hidden_sizes must have three entries");
    return hidden_sizes;
  }
  if (embedding == EmbeddingKind::FullyConnected)
    return film_mode == FilmMode::Simple ? std::vector<int>{16, 64, 256}
                                         : std::vector<int>{16, 256, 1024};
  return film_mode == FilmMode::Simple ? std::vector<int>{16, 32, 64}
                                       : std::vector<int>{32, 64, 256};
}

int GeneratorConfig::film_values_per_kind() const {
  if (film_mode == FilmMode::Simple) return static_cast<int>(channels_per_depth.size());
  return std::accumulate(channels_per_depth.begin(), channels_per_depth.end(), 0);
}

Generator::Generator(const GeneratorConfig& cfg, ParamStore& store, Rng& init_rng,
                     const std::string& prefix)
    : cfg_(cfg), store_(&store) {
  if (cfg.n_tasks <= 0) throw ConfigError("Generator: n_tasks must be positive");
  const std::vector<int> sizes = cfg.resolved_hidden_sizes();
  const int t = cfg.n_tasks;
  const bool fc = cfg.embedding == EmbeddingKind::FullyConnected;

  auto make_conv = [&](const std::string& name, int in_c, int out_c, int kw, int pad_l,
                       int pad_r) {
    ConvIds ids;
    ids.geom.in_c = in_c;
    ids.geom.out_c = out_c;
    ids.geom.kw = kw;
    ids.geom.pad_l = pad_l;
    ids.geom.pad_r = pad_r;
    ids.w = store.add_param(prefix + name + ".w", {out_c, in_c, 1, kw});
    ids.b = store.add_param(prefix + name + ".b", {out_c});
    glorot_uniform(store.param(ids.w), in_c * kw, out_c * kw, init_rng);
    return ids;
  };
  auto make_bn = [&](const std::string& name, int c) {
    BnIds ids;
    ids.gamma = store.add_param(prefix + name + ".gamma", {c});
    ids.beta = store.add_param(prefix + name + ".beta", {c});
    std::fill(store.param(ids.gamma).w.begin(), store.param(ids.gamma).w.end(), 1.0);
    ids.rmean = store.add_buffer(prefix + name + ".running_mean", {c}, 0.0);
    ids.rvar = store.add_buffer(prefix + name + ".running_var", {c}, 1.0);
    return ids;
  };

  if (fc) {
    // Dense layers as 1x1 convolutions over (n, features, 1, 1).
    embed_[0] = make_conv("fc0", t, sizes[0], 1, 0, 0);
    embed_[1] = make_conv("fc1", sizes[0], sizes[1], 1, 0, 0);
    embed_[2] = make_conv("fc2", sizes[1], sizes[2], 1, 0, 0);
  } else {
    // 1D convolutions over (n, channels, 1, len(z)); kernel width len(z),
    // 'same' padding on the first two and 'valid' on the last.
    const int pad_total = t - 1;
    const int pl = pad_total / 2, pr = pad_total - pl;
    embed_[0] = make_conv("cnn0", 1, sizes[0], t, pl, pr);
    embed_[1] = make_conv("cnn1", sizes[0], sizes[1], t, pl, pr);
    embed_[2] = make_conv("cnn2", sizes[1], sizes[2], t, 0, 0);
  }
  bn_[0] = make_bn(fc ? "fc1.bn" : "cnn1.bn", sizes[1]);
  bn_[1] = make_bn(fc ? "fc2.bn" : "cnn2.bn", sizes[2]);

  const int film_values = cfg_.film_values_per_kind();
  gamma_head_ = make_conv("gamma_head", sizes[2], film_values, 1, 0, 0);
  beta_head_ = make_conv("beta_head", sizes[2], film_values, 1, 0, 0);
  // Start near the identity transform: gamma head biased to 1.
  std::fill(store.param(gamma_head_.b).w.begin(), store.param(gamma_head_.b).w.end(), 1.0);
}

void Generator::forward(const Mat& z, Mode mode, Rng* dropout_rng, Mat& gammas, Mat& betas,
                        Cache* cache) const {
  if (store_ == nullptr) throw StateError("Generator::forward: weights not initialized");
  if (z.cols() != cfg_.n_tasks) throw ShapeError("Generator::forward: z length mismatch");
  const int n = z.rows();
  const bool fc = cfg_.embedding == EmbeddingKind::FullyConnected;
  ParamStore& st = *store_;
  BatchNormOpts bn_opts;

  // Both layouts are flat copies of the (n x n_tasks) matrix.
  Tensor4 x = fc ? Tensor4(n, cfg_.n_tasks, 1, 1) : Tensor4(n, 1, 1, cfg_.n_tasks);
  std::memcpy(x.d.data(), z.data(), sizeof(double) * x.d.size());

  Cache local;
  Cache& c = cache ? *cache : local;
  c.x0 = x;
  c.layer_in.clear();
  c.act_in.clear();
  c.drop_mask.clear();
  c.bn.assign(2, BatchNormCache{});

  Tensor4 cur = x;
  for (int i = 0; i < 3; ++i) {
    c.layer_in.push_back(cur);
    const ConvIds& conv = embed_[i];
    Tensor4 t = conv2d_forward(conv.geom, st.param(conv.w), st.param(conv.b), cur);
    if (i > 0) {
      Tensor4 mask = dropout_mask(t, cfg_.dropout, mode == Mode::Train ? dropout_rng : nullptr);
      apply_mask_inplace(t, mask);
      c.drop_mask.push_back(std::move(mask));
      const BnIds& bn = bn_[i - 1];
      t = batchnorm_forward(bn_opts, st.param(bn.gamma), st.param(bn.beta), st.buffer(bn.rmean),
                            st.buffer(bn.rvar), t, mode, &c.bn[static_cast<size_t>(i - 1)]);
    }
    c.act_in.push_back(t);
    relu_inplace(t);
    cur = std::move(t);
  }
  c.feat = cur;

  Tensor4 g4 = conv2d_forward(gamma_head_.geom, st.param(gamma_head_.w), st.param(gamma_head_.b),
                              cur);
  Tensor4 b4 = conv2d_forward(beta_head_.geom, st.param(beta_head_.w), st.param(beta_head_.b),
                              cur);
  const int film_values = cfg_.film_values_per_kind();
  gammas = Mat(n, film_values);
  betas = Mat(n, film_values);
  std::memcpy(gammas.data(), g4.d.data(), sizeof(double) * g4.d.size());
  std::memcpy(betas.data(), b4.d.data(), sizeof(double) * b4.d.size());
}

void Generator::backward(const Cache& cache, const Mat& dgammas, const Mat& dbetas) const {
  if (store_ == nullptr) throw StateError("Generator::backward: weights not initialized");
  ParamStore& st = *store_;
  const int n = dgammas.rows();
  const int film_values = cfg_.film_values_per_kind();

  Tensor4 dg4(n, film_values, 1, 1), db4(n, film_values, 1, 1);
  std::memcpy(dg4.d.data(), dgammas.data(), sizeof(double) * dg4.d.size());
  std::memcpy(db4.d.data(), dbetas.data(), sizeof(double) * db4.d.size());

  Tensor4 dfeat = conv2d_backward(gamma_head_.geom, st.param(gamma_head_.w),
                                  st.param(gamma_head_.b), cache.feat, dg4);
  Tensor4 dfeat_b = conv2d_backward(beta_head_.geom, st.param(beta_head_.w),
                                    st.param(beta_head_.b), cache.feat, db4);
  for (size_t i = 0; i < dfeat.d.size(); ++i) dfeat.d[i] += dfeat_b.d[i];

  Tensor4 dcur = std::move(dfeat);
  for (int i = 2; i >= 0; --i) {
    dcur = relu_backward(cache.act_in[static_cast<size_t>(i)], dcur);
    if (i > 0) {
      const BnIds& bn = bn_[i - 1];
      dcur = batchnorm_backward(st.param(bn.gamma), st.param(bn.beta),
                                cache.bn[static_cast<size_t>(i - 1)], dcur);
      const ConvIds& conv = embed_[i];
      apply_mask_inplace(dcur, cache.drop_mask[static_cast<size_t>(i - 1)]);
      dcur = conv2d_backward(conv.geom, st.param(conv.w), st.param(conv.b),
                             cache.layer_in[static_cast<size_t>(i)], dcur);
    } else {
      const ConvIds& conv = embed_[0];
      dcur = conv2d_backward(conv.geom, st.param(conv.w), st.param(conv.b),
                             cache.layer_in[0], dcur);
    }
  }
}

FiLMParamSet Generator::to_param_set(const Mat& gammas, const Mat& betas, int row) const {
  FiLMParamSet s;
  s.mode = cfg_.film_mode;
  s.channels_per_depth = cfg_.channels_per_depth;
  int offset = 0;
  for (int c : cfg_.channels_per_depth) {
    const int n = cfg_.film_mode == FilmMode::Simple ? 1 : c;
    std::vector<double> g(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      g[static_cast<size_t>(i)] = gammas(row, offset + i);
      b[static_cast<size_t>(i)] = betas(row, offset + i);
    }
    s.gammas.push_back(std::move(g));
    s.betas.push_back(std::move(b));
    offset += n;
  }
  return s;
}

size_t Generator::param_count() const {
  if (store_ == nullptr) return 0;
  size_t n = 0;
  auto add_conv = [&](const ConvIds& c) {
    n += store_->param(c.w).numel() + store_->param(c.b).numel();
  };
  for (const ConvIds& c : embed_) add_conv(c);
  for (const BnIds& b : bn_)
    n += store_->param(b.gamma).numel() + store_->param(b.beta).numel();
  add_conv(gamma_head_);
  add_conv(beta_head_);
  return n;
}

size_t generator_param_count(const GeneratorConfig& cfg) {
  ParamStore store;
  Rng rng(0);
  Generator gen(cfg, store, rng);
  return store.trainable_count();
}

FiLMParamSet generator_forward(const ConditionVector& z, const Generator& gen, Mode mode) {
  if (!gen.bound()) throw StateError("generator_forward: weights not initialized");
  if (z.n_tasks() != gen.config().n_tasks)
    throw ShapeError("generator_forward: z length mismatch");
  Mat zm(1, z.n_tasks());
  for (int i = 0; i < z.n_tasks(); ++i) zm(0, i) = z.weights[static_cast<size_t>(i)];
  Mat gammas, betas;
  gen.forward(zm, mode, nullptr, gammas, betas, nullptr);
  return gen.to_param_set(gammas, betas, 0);
}

}  // namespace cunet
