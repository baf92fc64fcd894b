// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cunet/errors.hpp"

namespace fs = std::filesystem;

namespace cunet {

DatasetManifest read_manifest(const std::string& root) {
  const std::string path = (fs::path(root) / "manifest.txt").string();
  std::ifstream is(path);
  if (!is) throw NotFoundError("read_manifest: cannot open " + path);

  DatasetManifest m;
  m.root = root;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string track, part;
    ls >> track >> part;
    if (track.empty() || (part != "train" && part != "test"))
      throw FormatError("read_manifest: bad line " + std::to_string(lineno) + " in " + path);
    (part == "train" ? m.train_tracks : m.test_tracks).push_back(track);
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest) {
  const std::string path = (fs::path(manifest.root) / "manifest.txt").string();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("write_manifest: cannot open " + path);
  for (const std::string& t : manifest.train_tracks) os << t << " train\n";
  for (const std::string& t : manifest.test_tracks) os << t << " test\n";
  if (!os) throw IoError("write_manifest: write failed for " + path);
}

DatasetSplit split_dataset(const std::vector<std::string>& train_partition,
                           const std::vector<std::string>& test_partition, int n_val,
                           uint64_t seed) {
  std::set<std::string> seen(train_partition.begin(), train_partition.end());
  if (seen.size() != train_partition.size())
    throw InputError("split_dataset: duplicate track ids");
  if (n_val < 0 || static_cast<size_t>(n_val) >= train_partition.size())
    throw InputError("split_dataset: n_val must be smaller than the train partition");

  std::vector<std::string> shuffled = train_partition;
  Rng rng(seed);
  for (size_t i = shuffled.size(); i > 1; --i) {
    const size_t j = rng.uniform_int(i);
    std::swap(shuffled[i - 1], shuffled[j]);
  }

  DatasetSplit split;
  split.val_tracks.assign(shuffled.begin(), shuffled.begin() + n_val);
  split.train_tracks.assign(shuffled.begin() + n_val, shuffled.end());
  split.test_tracks = test_partition;
  return split;
}

TrackStore::TrackStore(std::string root, PipelineConfig pipeline, std::vector<std::string> tasks)
    : root_(std::move(root)), pipeline_(pipeline), tasks_(std::move(tasks)) {}

const TrackStore::TrackData& TrackStore::get(const std::string& track_id) {
  auto it = cache_.find(track_id);
  if (it != cache_.end()) return it->second;

  auto load_stem = [&](const std::string& name) {
    const std::string path = (fs::path(root_) / track_id / (name + ".wav")).string();
    AudioSignal sig;
    try {
      sig = load_wav(path);
    } catch (const NotFoundError&) {
      throw DataError("TrackStore: missing stem file " + path);
    }
    if (sig.sample_rate != pipeline_.sample_rate) sig = resample(sig, pipeline_.sample_rate);
    return magnitude(stft(sig, pipeline_.window_size, pipeline_.hop));
  };

  TrackData data;
  MagnitudeSpectrogram mix_raw = load_stem("mixture");
  data.mix = normalize_per_song(mix_raw);
  for (const std::string& task : tasks_)
    data.stems.push_back(apply_norm_scale(load_stem(task), data.mix.norm_scale));

  auto [pos, inserted] = cache_.emplace(track_id, std::move(data));
  (void)inserted;
  return pos->second;
}

namespace {

Mat slice_patch(const Mat& values, long frame_offset, int width) {
  const int rows = values.rows() - 1;  // drop the Nyquist row
  Mat out(rows, width);
  for (int r = 0; r < rows; ++r)
    for (int t = 0; t < width; ++t) {
      const long src = frame_offset + t;
      out(r, t) = src < values.cols() ? values(r, static_cast<int>(src)) : 0.0;
    }
  return out;
}

}  // namespace

Instance sample_instance(TrackStore& store, const std::vector<std::string>& tracks,
                         int task_index, Rng& rng) {
  if (tracks.empty()) throw InputError("sample_instance: no tracks to sample from");
  if (task_index < 0 || task_index >= static_cast<int>(store.tasks().size()))
    throw IndexError("sample_instance: task index out of range");

  const std::string& track = tracks[rng.uniform_int(tracks.size())];
  const TrackStore::TrackData& data = store.get(track);

  const int width = store.pipeline().patch_frames;
  const int frames = data.mix.values.cols();
  const long max_offset = std::max(0, frames - width);
  const long offset = max_offset > 0 ? static_cast<long>(rng.uniform_int(max_offset + 1)) : 0;

  Instance inst;
  inst.x = slice_patch(data.mix.values, offset, width);
  inst.y = slice_patch(data.stems[static_cast<size_t>(task_index)].values, offset, width);
  inst.z = one_hot(task_index, static_cast<int>(store.tasks().size()));
  return inst;
}

namespace {

void fade_edges(std::vector<double>& x, int sample_rate) {
  const int n = static_cast<int>(x.size());
  const int f = std::min(n / 2, sample_rate / 20);  // 50 ms
  for (int i = 0; i < f; ++i) {
    const double w = 0.5 * (1.0 - std::cos(M_PI * i / f));
    x[static_cast<size_t>(i)] *= w;
    x[static_cast<size_t>(n - 1 - i)] *= w;
  }
}

std::vector<double> synth_vocals(int n, int rate, Rng& rng) {
  const double f0 = rng.uniform(200.0, 400.0);
  const double vib_rate = rng.uniform(4.0, 6.0);
  const double vib_depth = 0.03;
  const double amps[5] = {1.0, 0.5, 0.33, 0.2, 0.12};
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  double phase = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double inst_f = f0 * (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_rate * t));
    phase += 2.0 * M_PI * inst_f / rate;
    double v = 0.0;
    for (int k = 0; k < 5; ++k) v += amps[k] * std::sin((k + 1) * phase);
    x[static_cast<size_t>(i)] = 0.11 * v;
  }
  fade_edges(x, rate);
  return x;
}

std::vector<double> synth_drums(int n, int rate, Rng& rng) {
  const double period_s = rng.uniform(0.4, 0.7);
  const int period = static_cast<int>(period_s * rate);
  const int burst = static_cast<int>(0.08 * rate);
  const double tau = 0.02 * rate;
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int start = period / 4; start < n; start += period) {
    for (int i = 0; i < burst && start + i < n; ++i) {
      const double env = std::exp(-static_cast<double>(i) / tau);
      x[static_cast<size_t>(start + i)] += 0.3 * env * (2.0 * rng.uniform() - 1.0);
    }
  }
  fade_edges(x, rate);
  return x;
}

std::vector<double> synth_bass(int n, int rate, Rng& rng) {
  const double f0 = rng.uniform(40.0, 120.0);
  const double trem_rate = rng.uniform(0.3, 0.8);
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double env = 1.0 + 0.2 * std::sin(2.0 * M_PI * trem_rate * t);
    const double v = std::sin(2.0 * M_PI * f0 * t) + 0.25 * std::sin(4.0 * M_PI * f0 * t);
    x[static_cast<size_t>(i)] = 0.22 * env * v;
  }
  fade_edges(x, rate);
  return x;
}

std::vector<double> synth_rest(int n, int rate, Rng& rng) {
  // Two slow chirp voices sweeping 1-3 kHz and back, half a period apart.
  const double sweep_s = rng.uniform(6.0, 9.0);
  const double f_lo = 1000.0, f_hi = 3000.0;
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  double phase_a = 0.0, phase_b = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    auto tri = [&](double offset) {
      const double saw = std::fmod(t + offset, sweep_s) / sweep_s;  // 0..1
      return saw < 0.5 ? 2.0 * saw : 2.0 * (1.0 - saw);             // 0..1..0
    };
    phase_a += 2.0 * M_PI * (f_lo + (f_hi - f_lo) * tri(0.0)) / rate;
    phase_b += 2.0 * M_PI * (f_lo + (f_hi - f_lo) * tri(sweep_s / 2.0)) / rate;
    x[static_cast<size_t>(i)] = 0.16 * std::sin(phase_a) + 0.16 * std::sin(phase_b);
  }
  fade_edges(x, rate);
  return x;
}

void round_to_float32(std::vector<double>& x) {
  for (double& v : x) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace

DatasetManifest synth_dataset(int n_tracks, int n_test, double duration_s, uint64_t seed,
                              const std::string& out_dir, int sample_rate) {
  if (duration_s < 4.0) throw InputError("synth_dataset: duration must be at least 4 s");
  if (n_tracks <= 0 || n_test < 0 || n_test >= n_tracks)
    throw InputError("synth_dataset: bad track counts");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("synth_dataset: cannot create " + out_dir);

  const int n = static_cast<int>(duration_s * sample_rate);
  Rng master(seed);

  DatasetManifest manifest;
  manifest.root = out_dir;

  for (int t = 0; t < n_tracks; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "track_%03d", t);
    const fs::path dir = fs::path(out_dir) / name;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("synth_dataset: cannot create " + dir.string());

    Rng rng = master.stream(static_cast<uint64_t>(t) + 1);
    std::vector<std::vector<double>> stems;
    stems.push_back(synth_vocals(n, sample_rate, rng));
    stems.push_back(synth_drums(n, sample_rate, rng));
    stems.push_back(synth_bass(n, sample_rate, rng));
    stems.push_back(synth_rest(n, sample_rate, rng));
    for (auto& s : stems) round_to_float32(s);

    std::vector<double> mix(static_cast<size_t>(n), 0.0);
    for (const auto& s : stems)
      for (int i = 0; i < n; ++i) mix[static_cast<size_t>(i)] += s[static_cast<size_t>(i)];

    const char* stem_names[4] = {"vocals", "drums", "bass", "rest"};
    for (int s = 0; s < 4; ++s) {
      AudioSignal sig{stems[static_cast<size_t>(s)], sample_rate};
      save_wav((dir / (std::string(stem_names[s]) + ".wav")).string(), sig,
               WavEncoding::Float32);
    }
    save_wav((dir / "mixture.wav").string(), AudioSignal{mix, sample_rate},
             WavEncoding::Float32);

    (t < n_tracks - n_test ? manifest.train_tracks : manifest.test_tracks).push_back(name);
  }

  write_manifest(manifest);
  return manifest;
}

}  // namespace cunet
