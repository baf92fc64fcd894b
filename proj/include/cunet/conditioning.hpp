// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_CONDITIONING_HPP
#define CUNET_CONDITIONING_HPP

#include <string>
#include <vector>

#include "cunet/nn.hpp"
#include "cunet/tensor.hpp"

namespace cunet {

enum class FilmMode { Simple, Complex };
enum class EmbeddingKind { FullyConnected, Cnn };

std::string film_mode_name(FilmMode m);
std::string embedding_name(EmbeddingKind e);

// The task selector z. One-hot in pure mode; progressive training scales it
// by a shared weight in [0, 1].
struct ConditionVector {
  std::vector<double> weights;

  int n_tasks() const { return static_cast<int>(weights.size()); }
};

ConditionVector one_hot(int task_index, int n_tasks);

// Per-depth FiLM parameters: one scalar pair per depth in simple mode, one
// pair per channel per depth in complex mode.
struct FiLMParamSet {
  FilmMode mode = FilmMode::Simple;
  std::vector<int> channels_per_depth;
  std::vector<std::vector<double>> gammas;  // [depth][1] or [depth][channels]
  std::vector<std::vector<double>> betas;

  int total_values() const;

  // Identity transform (gamma = 1, beta = 0) of the requested cardinality.
  static FiLMParamSet identity(FilmMode mode, const std::vector<int>& channels_per_depth);
};

// gamma * x + beta, per channel in complex mode, uniformly in simple mode.
// gamma/beta hold one value (simple) or channels(x) values (complex).
Tensor4 film_apply(const Tensor4& x, const std::vector<double>& gamma,
                   const std::vector<double>& beta, FilmMode mode);

struct GeneratorConfig {
  EmbeddingKind embedding = EmbeddingKind::FullyConnected;
  FilmMode film_mode = FilmMode::Simple;
  int n_tasks = 4;
  // FC: sizes of the first dense layer and the two dense blocks.
  // CNN: filter counts of the three convolutions.
  // Empty = defaults (FC 16/64/256 or 16/256/1024; CNN 16/32/64 or 32/64/256).
  std::vector<int> hidden_sizes;
  double dropout = 0.5;
  // Channel widths of the conditioned encoder, depth by depth.
  std::vector<int> channels_per_depth = {16, 32, 64, 128, 256, 512};

  std::vector<int> resolved_hidden_sizes() const;
  int film_values_per_kind() const;  // gamma count = beta count
};

// Condition generator: embeds z and emits all FiLM parameters through two
// linear heads (one for the gammas, one for the betas).
class Generator {
 public:
  Generator() = default;  // unbound; forward throws StateError
  Generator(const GeneratorConfig& cfg, ParamStore& store, Rng& init_rng,
            const std::string& prefix = "gen.");

  struct Cache {
    Tensor4 x0;
    std::vector<Tensor4> layer_in;   // input of each conv/dense
    std::vector<Tensor4> act_in;     // input of each relu
    std::vector<Tensor4> drop_mask;  // per block
    std::vector<BatchNormCache> bn;
    Tensor4 feat;  // embedding fed to the heads
  };

  // z rows are the batch. Returns gammas/betas as [batch x film_values].
  void forward(const Mat& z, Mode mode, Rng* dropout_rng, Mat& gammas, Mat& betas,
               Cache* cache) const;

  // Accumulates parameter gradients from head gradients of the same shape
  // forward produced.
  void backward(const Cache& cache, const Mat& dgammas, const Mat& dbetas) const;

  FiLMParamSet to_param_set(const Mat& gammas, const Mat& betas, int row) const;

  size_t param_count() const;
  const GeneratorConfig& config() const { return cfg_; }
  bool bound() const { return store_ != nullptr; }

 private:
  GeneratorConfig cfg_;
  ParamStore* store_ = nullptr;

  struct ConvIds {
    ConvGeom geom;
    int w = -1, b = -1;
  };
  struct BnIds {
    int gamma = -1, beta = -1, rmean = -1, rvar = -1;
  };

  ConvIds embed_[3];
  BnIds bn_[2];  // blocks 2 and 3 carry batch norm
  ConvIds gamma_head_, beta_head_;
};

// Exact trainable-parameter count for a generator of this configuration.
size_t generator_param_count(const GeneratorConfig& cfg);

// Convenience wrapper around Generator for single condition vectors.
FiLMParamSet generator_forward(const ConditionVector& z, const Generator& gen, Mode mode);

}  // namespace cunet

#endif  // CUNET_CONDITIONING_HPP
