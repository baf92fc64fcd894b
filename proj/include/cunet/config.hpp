// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_CONFIG_HPP
#define CUNET_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "cunet/dataset.hpp"
#include "cunet/model.hpp"
#include "cunet/training.hpp"

namespace cunet {

// Experiment description: model + generator + train + data, mirrored by
// the sectioned key/value config file. Flags override file values.
struct ExperimentConfig {
  ModelConfig model;
  std::optional<GeneratorConfig> generator;
  TrainConfig train;
  PipelineConfig pipeline;
  std::string data_root;
  std::vector<std::string> tasks = kDefaultTasks;
  std::string output_dir = ".";

  void validate() const;
};

ExperimentConfig default_experiment_config(bool conditioned = true);

// Sectioned key = value text. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config_text(const std::string& text);
std::string serialize_experiment_config(const ExperimentConfig& cfg);

// Canonical serialization of the architecture-relevant parts (model,
// generator, pipeline, tasks); its hash is the checkpoint digest.
std::string architecture_text(const ExperimentConfig& cfg);

}  // namespace cunet

#endif  // CUNET_CONFIG_HPP
