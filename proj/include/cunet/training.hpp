// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_TRAINING_HPP
#define CUNET_TRAINING_HPP

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cunet/checkpoint.hpp"
#include "cunet/dataset.hpp"
#include "cunet/model.hpp"

namespace cunet {

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  int max_epochs = 20;
  int patience = 5;             // epochs without validation improvement
  bool progressive = false;
  int progressive_period = 5;   // weight every N-th instance
  uint64_t seed = 0;
  int instances_per_epoch = 256;
  int val_instances = 64;
  int n_val_tracks = 5;
  int dedicated_task = -1;      // >= 0 trains a single-task baseline

  void validate() const;
};

class Adam {
 public:
  Adam(ParamStore& store, double lr, double beta1, double beta2, double eps);

  // One update from the gradients currently held by the store.
  void step();

  uint64_t step_count() const { return t_; }
  std::vector<std::vector<double>>& moment1() { return m_; }
  std::vector<std::vector<double>>& moment2() { return v_; }
  void set_step_count(uint64_t t) { t_ = t; }

 private:
  ParamStore& store_;
  double lr_, beta1_, beta2_, eps_;
  uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Every progressive_period-th instance (counter is 1-based), scales both z
// and Y by one shared draw from Uniform[0, 1].
void progressive_weight(ConditionVector& z, Mat& y, long instance_counter, Rng& rng,
                        int period = 5);

// Strict round-robin task interleaving for joint training.
inline int round_robin_task(long counter, int n_tasks) {
  return static_cast<int>(counter % n_tasks);
}

// Keeps the best validation loss and counts epochs without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  bool observe(double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      since_best_ = 0;
      return true;
    }
    ++since_best_;
    return false;
  }
  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_best_ = 0;
};

// Snapshot / restore between live models and the checkpoint container.
// config_text is stored verbatim; digest_text (the architecture-relevant
// serialization) is what the digest hashes. Empty digest_text falls back
// to config_text.
Checkpoint snapshot_checkpoint(const CUNet& model, const Adam* optimizer,
                               const std::string& config_text, int epoch, double val_loss,
                               const std::string& digest_text = "");
// Shapes and digest are validated against the live model; mismatch throws
// IncompatibleCheckpoint.
void restore_checkpoint(const Checkpoint& ckpt, CUNet& model, Adam* optimizer,
                        const std::string& expected_digest_text);

struct TrainResult {
  Checkpoint best;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_loss;
  int best_epoch = 0;
  int final_epoch = 0;
};

using EpochCallback =
    std::function<void(int epoch, double train_loss, double val_loss, bool improved)>;

// Joint (or dedicated) training with round-robin task interleaving, ADAM,
// and early stopping on the validation loss. Returns the checkpoint with
// the best validation loss.
TrainResult train(const ModelConfig& model_config,
                  const std::optional<GeneratorConfig>& gen_config,
                  const TrainConfig& train_config, const std::string& dataset_root,
                  const PipelineConfig& pipeline, const std::vector<std::string>& tasks,
                  const std::string& config_text, const std::string& digest_text = "",
                  const EpochCallback& on_epoch = nullptr);

}  // namespace cunet

#endif  // CUNET_TRAINING_HPP
