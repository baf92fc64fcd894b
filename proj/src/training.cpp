// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/training.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "cunet/errors.hpp"

namespace cunet {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be positive");
  if (patience < 1) throw ConfigError("TrainConfig: patience must be >= 1");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (instances_per_epoch < batch_size)
    throw ConfigError("TrainConfig: instances_per_epoch must cover one batch");
  if (progressive_period < 1) throw ConfigError("TrainConfig: progressive_period must be >= 1");
}

Adam::Adam(ParamStore& store, double lr, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Param& p : store.params()) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t pi = 0; pi < store_.params().size(); ++pi) {
    Param& p = store_.params()[pi];
    std::vector<double>& m = m_[pi];
    std::vector<double>& v = v_[pi];
    for (size_t i = 0; i < p.w.size(); ++i) {
      const double g = p.g[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void progressive_weight(ConditionVector& z, Mat& y, long instance_counter, Rng& rng,
                        int period) {
  if (period < 1) throw ConfigError("progressive_weight: period must be >= 1");
  if (instance_counter % period != 0) return;
  const double w = rng.uniform();
  for (double& v : z.weights) v *= w;
  for (double& v : y.raw()) v *= w;
}

namespace {

Checkpoint::Entry to_entry(const std::string& name, const Param& p) {
  Checkpoint::Entry e;
  e.name = name;
  e.shape = p.shape;
  e.data.resize(p.numel());
  for (size_t i = 0; i < p.w.size(); ++i) e.data[i] = static_cast<float>(p.w[i]);
  return e;
}

Checkpoint::Entry vec_entry(const std::string& name, const std::vector<double>& v,
                            const std::vector<int>& shape) {
  Checkpoint::Entry e;
  e.name = name;
  e.shape = shape;
  e.data.resize(v.size());
  for (size_t i = 0; i < v.size(); ++i) e.data[i] = static_cast<float>(v[i]);
  return e;
}

void fill_from_entry(const Checkpoint::Entry& e, std::vector<double>& out,
                     const std::vector<int>& expect_shape, const std::string& what) {
  if (e.shape != expect_shape)
    throw IncompatibleCheckpointError("checkpoint tensor shape mismatch for " + what);
  out.resize(e.data.size());
  for (size_t i = 0; i < e.data.size(); ++i) out[i] = static_cast<double>(e.data[i]);
}

}  // namespace

Checkpoint snapshot_checkpoint(const CUNet& model, const Adam* optimizer,
                               const std::string& config_text, int epoch, double val_loss,
                               const std::string& digest_text) {
  Checkpoint ckpt;
  ckpt.config_text = config_text;
  ckpt.config_digest = fnv1a64(digest_text.empty() ? config_text : digest_text);
  ckpt.epoch = epoch;
  ckpt.val_loss = val_loss;
  ckpt.opt_step = optimizer ? optimizer->step_count() : 0;

  const ParamStore& store = model.store();
  for (const Param& p : store.params()) ckpt.tensors.push_back(to_entry("param." + p.name, p));
  for (const Param& b : store.buffers())
    ckpt.tensors.push_back(to_entry("buffer." + b.name, b));
  if (optimizer != nullptr) {
    Adam& opt = *const_cast<Adam*>(optimizer);
    for (size_t pi = 0; pi < store.params().size(); ++pi) {
      const Param& p = store.params()[pi];
      ckpt.tensors.push_back(vec_entry("adam.m." + p.name, opt.moment1()[pi], p.shape));
      ckpt.tensors.push_back(vec_entry("adam.v." + p.name, opt.moment2()[pi], p.shape));
    }
  }
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, CUNet& model, Adam* optimizer,
                        const std::string& expected_digest_text) {
  if (!expected_digest_text.empty() &&
      ckpt.config_digest != fnv1a64(expected_digest_text))
    throw IncompatibleCheckpointError("restore_checkpoint: config digest mismatch");

  ParamStore& store = model.store();
  for (Param& p : store.params()) {
    const Checkpoint::Entry* e = ckpt.find("param." + p.name);
    if (e == nullptr)
      throw IncompatibleCheckpointError("restore_checkpoint: missing tensor param." + p.name);
    fill_from_entry(*e, p.w, p.shape, p.name);
  }
  for (Param& b : store.buffers()) {
    const Checkpoint::Entry* e = ckpt.find("buffer." + b.name);
    if (e == nullptr)
      throw IncompatibleCheckpointError("restore_checkpoint: missing tensor buffer." + b.name);
    fill_from_entry(*e, b.w, b.shape, b.name);
  }
  if (optimizer != nullptr) {
    for (size_t pi = 0; pi < store.params().size(); ++pi) {
      const Param& p = store.params()[pi];
      const Checkpoint::Entry* em = ckpt.find("adam.m." + p.name);
      const Checkpoint::Entry* ev = ckpt.find("adam.v." + p.name);
      if (em == nullptr || ev == nullptr)
        throw IncompatibleCheckpointError("restore_checkpoint: missing optimizer state");
      fill_from_entry(*em, optimizer->moment1()[pi], p.shape, p.name);
      fill_from_entry(*ev, optimizer->moment2()[pi], p.shape, p.name);
    }
    optimizer->set_step_count(ckpt.opt_step);
  }
}

TrainResult train(const ModelConfig& model_config,
                  const std::optional<GeneratorConfig>& gen_config,
                  const TrainConfig& train_config, const std::string& dataset_root,
                  const PipelineConfig& pipeline, const std::vector<std::string>& tasks,
                  const std::string& config_text, const std::string& digest_text,
                  const EpochCallback& on_epoch) {
  train_config.validate();
  const int n_tasks = static_cast<int>(tasks.size());
  const bool dedicated = train_config.dedicated_task >= 0;
  if (dedicated && train_config.dedicated_task >= n_tasks)
    throw ConfigError("train: dedicated task index out of range");
  if (model_config.conditioned == dedicated)
    throw ConfigError("train: conditioned flag and dedicated task disagree");

  DatasetManifest manifest = read_manifest(dataset_root);
  Rng seeds(train_config.seed);
  DatasetSplit split = split_dataset(manifest.train_tracks, manifest.test_tracks,
                                     train_config.n_val_tracks,
                                     seeds.stream(1).next_u64());
  TrackStore store(dataset_root, pipeline, tasks);

  CUNet model(model_config, gen_config, seeds.stream(2).next_u64());
  Adam adam(model.store(), train_config.learning_rate, train_config.beta1, train_config.beta2,
            train_config.eps);

  Rng sample_rng = seeds.stream(3);
  Rng dropout_rng = seeds.stream(4);
  Rng progressive_rng = seeds.stream(5);
  Rng val_rng = seeds.stream(6);

  // Fixed validation instances so epoch losses are comparable.
  std::vector<Instance> val_set;
  const bool has_val = !split.val_tracks.empty() && train_config.val_instances > 0;
  if (has_val) {
    for (int i = 0; i < train_config.val_instances; ++i) {
      const int task = dedicated ? train_config.dedicated_task : i % n_tasks;
      val_set.push_back(sample_instance(store, split.val_tracks, task, val_rng));
    }
  }

  const int rows = model_config.input_rows, cols = model_config.input_cols;
  auto make_batch = [&](const std::vector<Instance>& insts,
                        const std::vector<ConditionVector>& zs) {
    CUNet::TrainBatch batch;
    const int n = static_cast<int>(insts.size());
    batch.x = Tensor4(n, 1, rows, cols);
    batch.y = Tensor4(n, 1, rows, cols);
    if (model_config.conditioned) batch.z = Mat(n, n_tasks);
    for (int b = 0; b < n; ++b) {
      if (insts[static_cast<size_t>(b)].x.rows() != rows ||
          insts[static_cast<size_t>(b)].x.cols() != cols)
        throw ShapeError("train: instance patch shape does not match the model input");
      std::memcpy(batch.x.at(b, 0), insts[static_cast<size_t>(b)].x.data(),
                  sizeof(double) * static_cast<size_t>(rows) * cols);
      std::memcpy(batch.y.at(b, 0), insts[static_cast<size_t>(b)].y.data(),
                  sizeof(double) * static_cast<size_t>(rows) * cols);
      if (model_config.conditioned)
        for (int t = 0; t < n_tasks; ++t)
          batch.z(b, t) = zs[static_cast<size_t>(b)].weights[static_cast<size_t>(t)];
    }
    return batch;
  };

  TrainResult result;
  EarlyStopping stopper(train_config.patience);
  long instance_counter = 0;
  long round_robin = 0;

  const int steps = train_config.instances_per_epoch / train_config.batch_size;
  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    double train_loss = 0.0;
    long train_items = 0;
    for (int s = 0; s < steps; ++s) {
      std::vector<Instance> insts;
      std::vector<ConditionVector> zs;
      for (int b = 0; b < train_config.batch_size; ++b) {
        const int task = dedicated ? train_config.dedicated_task
                                   : round_robin_task(round_robin++, n_tasks);
        Instance inst = sample_instance(store, split.train_tracks, task, sample_rng);
        ++instance_counter;
        if (train_config.progressive && !dedicated)
          progressive_weight(inst.z, inst.y, instance_counter, progressive_rng,
                             train_config.progressive_period);
        zs.push_back(inst.z);
        insts.push_back(std::move(inst));
      }
      CUNet::TrainBatch batch = make_batch(insts, zs);
      model.store().zero_grad();
      const double loss = model.batch_loss(batch, Mode::Train, &dropout_rng, true);
      if (!std::isfinite(loss))
        throw CunetError("train: non-finite loss at epoch " + std::to_string(epoch) +
                         ", step " + std::to_string(s));
      adam.step();
      train_loss += loss;
      train_items += train_config.batch_size;
    }
    train_loss /= static_cast<double>(train_items);

    double val_loss = std::numeric_limits<double>::quiet_NaN();
    bool improved = false;
    if (has_val) {
      double acc = 0.0;
      for (const Instance& inst : val_set) {
        std::vector<Instance> one{inst};
        std::vector<ConditionVector> z1{inst.z};
        CUNet::TrainBatch batch = make_batch(one, z1);
        acc += model.batch_loss(batch, Mode::Eval, nullptr, false);
      }
      val_loss = acc / static_cast<double>(val_set.size());
      improved = stopper.observe(val_loss);
      if (improved) {
        result.best =
            snapshot_checkpoint(model, &adam, config_text, epoch, val_loss, digest_text);
        result.best_epoch = epoch;
      }
    }

    result.epoch_train_loss.push_back(train_loss);
    result.epoch_val_loss.push_back(val_loss);
    result.final_epoch = epoch;
    if (on_epoch) on_epoch(epoch, train_loss, val_loss, improved);

    if (has_val && stopper.should_stop()) break;
  }

  if (!has_val || result.best.tensors.empty()) {
    // No validation set: keep the final state (early stopping disabled).
    result.best = snapshot_checkpoint(model, &adam, config_text, result.final_epoch,
                                      std::numeric_limits<double>::infinity(), digest_text);
    result.best_epoch = result.final_epoch;
  }
  return result;
}

}  // namespace cunet
