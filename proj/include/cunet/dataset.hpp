// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_DATASET_HPP
#define CUNET_DATASET_HPP

#include <map>
#include <string>
#include <vector>

#include "cunet/conditioning.hpp"
#include "cunet/rng.hpp"
#include "cunet/spectrogram.hpp"

namespace cunet {

// STFT front-end parameters shared by training, separation and evaluation.
struct PipelineConfig {
  int sample_rate = 8192;
  int window_size = 1024;
  int hop = 768;
  int patch_frames = 128;
};

inline const std::vector<std::string> kDefaultTasks = {"vocals", "drums", "bass", "rest"};

// manifest.txt at the dataset root: one "<track_id> <train|test>" per line.
struct DatasetManifest {
  std::string root;
  std::vector<std::string> train_tracks;
  std::vector<std::string> test_tracks;
};

DatasetManifest read_manifest(const std::string& root);
void write_manifest(const DatasetManifest& manifest);

struct DatasetSplit {
  std::vector<std::string> train_tracks;
  std::vector<std::string> val_tracks;
  std::vector<std::string> test_tracks;
};

// Deterministic seeded shuffle of the train partition into train/val. The
// test partition comes from the manifest and is never shuffled.
DatasetSplit split_dataset(const std::vector<std::string>& train_partition,
                           const std::vector<std::string>& test_partition, int n_val,
                           uint64_t seed);

// Loads and caches per-track normalized magnitude spectrograms. The
// mixture maximum is the shared normalization scale for all stems.
class TrackStore {
 public:
  TrackStore(std::string root, PipelineConfig pipeline, std::vector<std::string> tasks);

  struct TrackData {
    MagnitudeSpectrogram mix;                // normalized, norm_scale = mixture max
    std::vector<MagnitudeSpectrogram> stems; // one per task, same scale
  };

  const TrackData& get(const std::string& track_id);
  const PipelineConfig& pipeline() const { return pipeline_; }
  const std::vector<std::string>& tasks() const { return tasks_; }

 private:
  std::string root_;
  PipelineConfig pipeline_;
  std::vector<std::string> tasks_;
  std::map<std::string, TrackData> cache_;
};

struct Instance {
  Mat x;  // mixture magnitude patch
  Mat y;  // target stem magnitude patch
  ConditionVector z;
};

// Uniformly samples a track and a frame offset; X and Y share the mixture
// normalization scale; z = one_hot(task_index).
Instance sample_instance(TrackStore& store, const std::vector<std::string>& tracks,
                         int task_index, Rng& rng);

// Writes a seeded synthetic dataset: four spectrally disjoint stems per
// track (vocals: vibrato harmonic tone, drums: periodic broadband noise
// bursts, bass: low tone, rest: slow chirps) plus mixture = exact sum,
// stored as float32 WAV. The first n_tracks - n_test tracks form the train
// partition.
DatasetManifest synth_dataset(int n_tracks, int n_test, double duration_s, uint64_t seed,
                              const std::string& out_dir, int sample_rate = 8192);

}  // namespace cunet

#endif  // CUNET_DATASET_HPP
