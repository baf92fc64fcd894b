// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_MODEL_HPP
#define CUNET_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "cunet/conditioning.hpp"
#include "cunet/nn.hpp"
#include "cunet/tensor.hpp"

namespace cunet {

enum class LossReduction { Sum, Mean };

// U-Net hyperparameters. Defaults follow the 6-block, 16-base-filter
// spectrogram architecture on 512x128 patches.
struct ModelConfig {
  int n_blocks = 6;
  int base_filters = 16;
  int kernel = 5;
  int stride = 2;
  double leakiness = 0.2;
  int decoder_dropout_blocks = 3;
  double dropout = 0.5;
  bool conditioned = false;
  FilmMode film_mode = FilmMode::Simple;
  int input_rows = 512;
  int input_cols = 128;
  LossReduction loss_reduction = LossReduction::Sum;

  std::vector<int> encoder_channels() const;
  void validate() const;
};

struct MaskOutput {
  Mat mask;               // sigmoid output, strictly in (0, 1)
  Mat masked_magnitude;   // mask ⊙ input
};

// Entrywise L1 of (masked - target); the contractual reduction is Sum.
double l1_loss(const Mat& masked, const Mat& target, LossReduction reduction);

// The conditioned U-Net (or the dedicated baseline when
// config.conditioned is false). Encoder blocks run conv -> batch norm ->
// [FiLM] -> leaky ReLU; decoder blocks run deconv -> batch norm -> ReLU
// with dropout in the first three; skip connections concatenate the
// post-activation encoder outputs; a 1x1 convolution plus sigmoid emits
// the soft mask.
class CUNet {
 public:
  CUNet(const ModelConfig& config, std::optional<GeneratorConfig> gen_config, uint64_t seed);

  struct TrainBatch {
    Tensor4 x;  // (n, 1, rows, cols), non-negative
    Tensor4 y;  // same shape; pre-scaled by the progressive weight if any
    Mat z;      // (n, n_tasks); empty for dedicated models
  };

  MaskOutput forward(const Mat& x, const ConditionVector* z, Mode mode);
  // Runs the conditioned path with explicitly supplied FiLM parameters
  // instead of the generator output.
  MaskOutput forward_with_film(const Mat& x, const FiLMParamSet& film, Mode mode);
  double loss(const Mat& x, const Mat& y, const ConditionVector* z, Mode mode);

  // Forward + loss (+ parameter gradients when backward is set). Dropout
  // is active only when a train-mode rng is supplied.
  double batch_loss(const TrainBatch& batch, Mode mode, Rng* dropout_rng, bool backward);

  // Mask tensor for a batch, no loss or gradients.
  Tensor4 batch_mask(const TrainBatch& batch, Mode mode, Rng* dropout_rng);

  size_t count_parameters() const;
  size_t core_param_count() const;       // excludes the generator
  size_t generator_param_count() const;  // zero for dedicated models

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const std::optional<GeneratorConfig>& gen_config() const { return gen_cfg_; }
  const Generator& generator() const { return gen_; }

 private:
  struct Fwd;
  Tensor4 run_forward(const Tensor4& x, const Mat& z, const Mat* film_gammas,
                      const Mat* film_betas, Mode mode, Rng* dropout_rng, Fwd& f);
  void run_backward(const Tensor4& x, Fwd& f, const Tensor4& dmask);
  MaskOutput forward_internal(const Mat& x, const ConditionVector* z, const FiLMParamSet* film,
                              Mode mode);

  ModelConfig cfg_;
  std::optional<GeneratorConfig> gen_cfg_;
  ParamStore store_;
  Generator gen_;

  struct ConvIds {
    ConvGeom geom;
    int w = -1, b = -1;
  };
  struct DeconvIds {
    DeconvGeom geom;
    int w = -1, b = -1;
  };
  struct BnIds {
    int gamma = -1, beta = -1, rmean = -1, rvar = -1;
  };

  std::vector<ConvIds> enc_conv_;
  std::vector<BnIds> enc_bn_;
  std::vector<DeconvIds> dec_deconv_;
  std::vector<BnIds> dec_bn_;
  ConvIds final_conv_;
  std::vector<int> film_offsets_;  // start of each depth slice in the head output
  size_t core_params_ = 0;
};

}  // namespace cunet

#endif  // CUNET_MODEL_HPP
